//! Serial-chain robot description, kinematics and dynamics.

mod dynamics;
mod io;
mod kinematics;

pub(crate) use dynamics::base_acceleration;
pub use dynamics::{forward_dynamics, mass_matrix, rnea, rnea_inverse_dynamics, RneaResult};
pub use io::{bundled_model, load_model, load_model_file, BUNDLED_MODELS};
pub use kinematics::{end_effector_jacobian, forward_kinematics, FkResult};

use crate::spatial::{exp_screw, PoseTransform, ScrewAxis, SpatialInertia};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub q_min: f64,
    pub q_max: f64,
    pub vel_max: f64,
    pub acc_max: f64,
    pub torque_max: f64,
}

/// One joint: screw axis in the child frame and the child frame pose
/// relative to the parent at `q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub screw_axis: ScrewAxis,
    pub home: PoseTransform,
    pub limits: JointLimits,
    pub actuated: bool,
}

impl JointSpec {
    /// Parent-to-child transform `T_{j−1,j}(q) = M_j exp([A_j] q)`.
    pub fn transform(&self, q: f64) -> PoseTransform {
        self.home.compose(&exp_screw(&self.screw_axis, q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionSphere {
    pub offset: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub inertia: SpatialInertia,
    pub spheres: Vec<CollisionSphere>,
}

/// Chain of (joint, link) pairs from root to tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkSpec>,
    pub gravity: Vector3<f64>,
    pub end_effector: PoseTransform,
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn actuated(&self, j: usize) -> bool {
        self.joints[j].actuated
    }

    pub fn sphere_count(&self) -> usize {
        self.links.iter().map(|l| l.spheres.len()).sum()
    }

    /// Checks the model invariants, naming the offending joint or link.
    pub fn validate(&self) -> Result<(), String> {
        if self.joints.is_empty() {
            return Err("model has no joints".into());
        }
        if self.joints.len() != self.links.len() {
            return Err(format!("{} joints but {} links", self.joints.len(), self.links.len()));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err("gravity is not finite".into());
        }
        for (j, joint) in self.joints.iter().enumerate() {
            let l = &joint.limits;
            if !(l.q_min < l.q_max) {
                return Err(format!("joints[{j}].limits: q_min must be below q_max"));
            }
            for (name, v) in [("vel_max", l.vel_max), ("acc_max", l.acc_max), ("torque_max", l.torque_max)] {
                if !(v > 0.0) {
                    return Err(format!("joints[{j}].limits.{name} must be positive"));
                }
            }
            if !joint.home.is_valid(1e-6) {
                return Err(format!("joints[{j}].home is not a rigid transform"));
            }
            let w = joint.screw_axis.angular();
            if joint.screw_axis.is_revolute() && (w.norm() - 1.0).abs() > 1e-9 {
                return Err(format!("joints[{j}].axis angular part must be a unit vector"));
            }
            if !joint.screw_axis.is_revolute() && (joint.screw_axis.linear().norm() - 1.0).abs() > 1e-9 {
                return Err(format!("joints[{j}].axis must be a unit screw"));
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            if !link.inertia.is_physical() {
                return Err(format!("links[{i}]: spatial inertia is not positive definite"));
            }
            for (s, sp) in link.spheres.iter().enumerate() {
                if !(sp.radius > 0.0) {
                    return Err(format!("links[{i}].spheres[{s}].radius must be positive"));
                }
            }
        }
        if !self.end_effector.is_valid(1e-6) {
            return Err("end_effector is not a rigid transform".into());
        }
        Ok(())
    }
}
