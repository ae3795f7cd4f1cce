//! Planning factors: state and pose priors, GP smoothness, Newton-Euler
//! equality factors, limit hinges, collision and the torque objective.

mod dynamics;
mod gp;
mod limits;
mod obstacle;
mod pose;
mod torque;

pub use dynamics::{AccelFactor, TorqueFactor, TwistFactor, WrenchFactor};
pub use gp::{gp_covariance, gp_transition, GpCovariance, GpOrder, GpPriorFactor, GpPriorSpec};
pub use limits::{limit_hinge, HingeParams, LimitFactor};
pub use obstacle::ObstacleFactor;
pub use pose::{pose_error, EndEffectorPoseFactor, JointStateFactor};
pub use torque::{unactuated_torque_prior, MinTorqueFactor};

use crate::graph::{VariableKey, VariableValues};
use crate::robot::{rnea, RobotModel};
use nalgebra::DVector;

/// Writes `(q, q̇, q̈)` for one step together with the link twists,
/// accelerations, wrenches and joint torques that RNEA computes from them.
pub fn insert_rnea_state(
    values: &mut VariableValues,
    model: &RobotModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    qdd: &DVector<f64>,
    step: usize,
) -> crate::Result<()> {
    let r = rnea(model, q, qd, qdd)?;
    for j in 0..model.dof() {
        values.insert_scalar(VariableKey::q(j, step), q[j]);
        values.insert_scalar(VariableKey::v(j, step), qd[j]);
        values.insert_scalar(VariableKey::a(j, step), qdd[j]);
        values.insert(VariableKey::twist(j, step), DVector::from_column_slice(r.twists[j].as_slice()));
        values.insert(VariableKey::accel(j, step), DVector::from_column_slice(r.accels[j].as_slice()));
        values.insert(VariableKey::wrench(j, step), DVector::from_column_slice(r.wrenches[j].as_slice()));
        values.insert_scalar(VariableKey::torque(j, step), r.torques[j]);
    }
    Ok(())
}
