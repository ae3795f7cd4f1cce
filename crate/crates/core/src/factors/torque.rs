//! Torque objective and the zero-torque prior for passive joints.

use crate::graph::{Factor, FactorKind, NoiseModel, PriorFactor, VariableKey};
use nalgebra::{DMatrix, DVector};

/// Per-joint residual `τ_j` at one step, so the cost is `Σ_j τ_j²`.
#[derive(Debug, Clone)]
pub struct MinTorqueFactor {
    keys: Vec<VariableKey>,
    noise: NoiseModel,
}

impl MinTorqueFactor {
    pub fn new(joints: impl IntoIterator<Item = usize>, step: usize, sigma: f64) -> crate::Result<Self> {
        let keys: Vec<_> = joints.into_iter().map(|j| VariableKey::torque(j, step)).collect();
        let noise = NoiseModel::isotropic(keys.len(), sigma)?;
        Ok(MinTorqueFactor { keys, noise })
    }
}

impl Factor for MinTorqueFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Objective
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        if let Some(j) = jacobians {
            for (c, block) in j.iter_mut().enumerate() {
                block.fill(0.0);
                block[(c, 0)] = 1.0;
            }
        }
        DVector::from_iterator(x.len(), x.iter().map(|v| v[0]))
    }
}

/// Near-hard prior `τ_j = 0` for a joint without an actuator.
pub fn unactuated_torque_prior(joint: usize, step: usize, sigma: f64) -> crate::Result<PriorFactor> {
    Ok(PriorFactor::new(VariableKey::torque(joint, step), DVector::zeros(1), NoiseModel::isotropic(1, sigma)?))
}
