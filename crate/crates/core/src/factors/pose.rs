//! Start, goal and task-pose factors.

use crate::graph::{Factor, FactorKind, NoiseModel, VariableKey};
use crate::robot::{end_effector_jacobian, forward_kinematics, RobotModel};
use crate::spatial::{so3_log, so3_right_jacobian_inv, PoseTransform};
use nalgebra::{DMatrix, DVector, Vector6};
use std::sync::Arc;

/// `x − target` over a list of scalar joint-state keys.
#[derive(Debug, Clone)]
pub struct JointStateFactor {
    keys: Vec<VariableKey>,
    target: DVector<f64>,
    noise: NoiseModel,
    kind: FactorKind,
}

impl JointStateFactor {
    pub fn new(keys: Vec<VariableKey>, target: DVector<f64>, noise: NoiseModel) -> Self {
        assert_eq!(keys.len(), target.len(), "one target entry per key");
        JointStateFactor { keys, target, noise, kind: FactorKind::Prior }
    }

    pub fn with_kind(mut self, kind: FactorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }
}

impl Factor for JointStateFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        self.kind
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        if let Some(j) = jacobians {
            for (c, block) in j.iter_mut().enumerate() {
                block.fill(0.0);
                block[(c, 0)] = 1.0;
            }
        }
        DVector::from_iterator(x.len(), x.iter().map(|v| v[0])) - &self.target
    }
}

/// End-effector pose error `(log(R_tᵀ R), p − p_t)` at one step.
pub fn pose_error(actual: &PoseTransform, target: &PoseTransform) -> Vector6<f64> {
    let phi = so3_log(&(target.rotation.transpose() * actual.rotation));
    let dp = actual.translation - target.translation;
    Vector6::new(phi.x, phi.y, phi.z, dp.x, dp.y, dp.z)
}

/// Workspace pose target on the joint angles of one step.
#[derive(Debug, Clone)]
pub struct EndEffectorPoseFactor {
    model: Arc<RobotModel>,
    keys: Vec<VariableKey>,
    target: PoseTransform,
    noise: NoiseModel,
    kind: FactorKind,
}

impl EndEffectorPoseFactor {
    pub fn new(model: Arc<RobotModel>, step: usize, target: PoseTransform, noise: NoiseModel) -> Self {
        let keys = (0..model.dof()).map(|j| VariableKey::q(j, step)).collect();
        EndEffectorPoseFactor { model, keys, target, noise, kind: FactorKind::Pose }
    }

    pub fn with_kind(mut self, kind: FactorKind) -> Self {
        self.kind = kind;
        self
    }
}

impl Factor for EndEffectorPoseFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        self.kind
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let q = DVector::from_iterator(x.len(), x.iter().map(|v| v[0]));
        let ee = forward_kinematics(&self.model, &q).expect("one key per joint").end_effector;
        let err = pose_error(&ee, &self.target);
        if let Some(j) = jacobians {
            let jb = end_effector_jacobian(&self.model, &q).expect("one key per joint");
            let jr_inv = so3_right_jacobian_inv(&err.fixed_rows::<3>(0).into_owned());
            let rot = jr_inv * jb.fixed_rows::<3>(0);
            let trans = ee.rotation * jb.fixed_rows::<3>(3);
            for (c, block) in j.iter_mut().enumerate() {
                block.view_mut((0, 0), (3, 1)).copy_from(&rot.column(c));
                block.view_mut((3, 0), (3, 1)).copy_from(&trans.column(c));
            }
        }
        DVector::from_column_slice(err.as_slice())
    }
}
