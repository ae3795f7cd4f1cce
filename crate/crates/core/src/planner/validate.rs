//! Independent checks of a trajectory against the robot model, its limits
//! and the obstacle field.

use super::problem::{Goal, Tolerances};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::factors::{gp_transition, pose_error, GpOrder};
use crate::robot::{forward_kinematics, rnea_inverse_dynamics, RobotModel};
use crate::sdf::{sphere_centers, SdfGrid};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub step: usize,
    pub joint: usize,
    /// `q`, `dq`, `ddq` or `tau`.
    pub quantity: String,
    pub value: f64,
    /// Amount beyond the limit.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub states: usize,
    /// Largest `|τ − τ_RNEA(q, q̇, q̈)|` over steps and joints.
    pub max_dynamics_defect: f64,
    /// `(step, joint)` of the largest defect.
    pub worst_defect_at: Option<(usize, usize)>,
    pub max_limit_violation: f64,
    pub limit_violations: Vec<LimitViolation>,
    pub min_clearance: Option<f64>,
    pub goal_error: Option<f64>,
    /// Largest entry of `x_i − Φ x_{i−1}` over intervals.
    pub max_gp_defect: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub fn validate_trajectory(
    traj: &Trajectory,
    model: &RobotModel,
    sdf: Option<&SdfGrid>,
    goal: Option<&Goal>,
    tol: &Tolerances,
) -> Result<ValidationReport> {
    traj.check_shape()?;
    let d = model.dof();
    if traj.dof() != d {
        return Err(Error::Model(format!("trajectory has {} joints, model {} has {d}", traj.dof(), model.name)));
    }
    let n = traj.len();

    let mut max_defect = 0.0;
    let mut worst = None;
    for i in 0..n {
        let tau = rnea_inverse_dynamics(model, &traj.q[i], &traj.qd[i], &traj.qdd[i])?;
        for j in 0..d {
            let e = (traj.tau[i][j] - tau[j]).abs();
            if e > max_defect || worst.is_none() {
                max_defect = e;
                worst = Some((i, j));
            }
        }
    }

    let mut violations = Vec::new();
    let mut max_violation: f64 = 0.0;
    for i in 0..n {
        for (j, joint) in model.joints.iter().enumerate() {
            let l = joint.limits;
            let checks = [
                ("q", traj.q[i][j], l.q_min, l.q_max),
                ("dq", traj.qd[i][j], -l.vel_max, l.vel_max),
                ("ddq", traj.qdd[i][j], -l.acc_max, l.acc_max),
                ("tau", traj.tau[i][j], -l.torque_max, l.torque_max),
            ];
            for (quantity, value, lo, hi) in checks {
                let excess = (lo - value).max(value - hi);
                max_violation = max_violation.max(excess);
                if excess > tol.limit_slack {
                    violations.push(LimitViolation { step: i, joint: j, quantity: quantity.into(), value, excess });
                }
            }
        }
    }

    let min_clearance = match sdf {
        Some(sdf) if model.sphere_count() > 0 => {
            let mut m = f64::INFINITY;
            for q in &traj.q {
                for (_, c, r) in sphere_centers(model, q)? {
                    m = m.min(sdf.query(&c).distance - r);
                }
            }
            Some(m)
        }
        _ => None,
    };

    let last = n - 1;
    let goal_error = match goal {
        Some(Goal::Joint(g)) => Some((&traj.q[last] - g).amax()),
        Some(Goal::Pose(p)) => Some(pose_error(&forward_kinematics(model, &traj.q[last])?.end_effector, p).norm()),
        None => None,
    };

    let mut max_gp: f64 = 0.0;
    for i in 1..n {
        let phi = gp_transition(traj.times[i] - traj.times[i - 1], d, GpOrder::ConstantAcceleration);
        let stack = |k: usize| {
            let mut x = DVector::zeros(3 * d);
            x.rows_mut(0, d).copy_from(&traj.q[k]);
            x.rows_mut(d, d).copy_from(&traj.qd[k]);
            x.rows_mut(2 * d, d).copy_from(&traj.qdd[k]);
            x
        };
        max_gp = max_gp.max((stack(i) - phi * stack(i - 1)).amax());
    }

    let mut failures = Vec::new();
    if !(max_defect <= tol.dynamics_defect) {
        let (i, j) = worst.unwrap_or_default();
        failures.push(format!("dynamics defect {max_defect:.3e} at step {i}, joint {j} exceeds {:.1e}", tol.dynamics_defect));
    }
    for v in &violations {
        failures.push(format!("{}[{}] = {:.6} exceeds its limit by {:.3e} at step {}", v.quantity, v.joint, v.value, v.excess, v.step));
    }
    if let Some(c) = min_clearance {
        if !(c >= tol.min_clearance) {
            failures.push(format!("minimum clearance {c:.4} m is below {}", tol.min_clearance));
        }
    }
    if let Some(e) = goal_error {
        if !(e <= tol.goal_error) {
            failures.push(format!("goal error {e:.3e} exceeds {:.1e}", tol.goal_error));
        }
    }
    Ok(ValidationReport {
        states: n,
        max_dynamics_defect: max_defect,
        worst_defect_at: worst,
        max_limit_violation: max_violation,
        limit_violations: violations,
        min_clearance,
        goal_error,
        max_gp_defect: max_gp,
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::init::quintic_states;
    use crate::robot::bundled_model;

    fn oracle_trajectory(model: &RobotModel, q1: &[f64], horizon: f64, steps: usize) -> Trajectory {
        let q0 = DVector::zeros(model.dof());
        let states = quintic_states(&q0, &DVector::from_column_slice(q1), horizon, steps);
        let mut t = Trajectory { times: vec![], q: vec![], qd: vec![], qdd: vec![], tau: vec![], twists: vec![], accels: vec![], wrenches: vec![] };
        for (i, (q, v, a)) in states.into_iter().enumerate() {
            t.times.push(i as f64 * horizon / steps as f64);
            t.tau.push(rnea_inverse_dynamics(model, &q, &v, &a).unwrap());
            t.q.push(q);
            t.qd.push(v);
            t.qdd.push(a);
        }
        t
    }

    #[test]
    fn oracle_trajectory_has_no_defect() {
        let m = bundled_model("arm3").unwrap();
        let t = oracle_trajectory(&m, &[0.5, -0.3, 0.8], 2.0, 20);
        let goal = Goal::Joint(DVector::from_vec(vec![0.5, -0.3, 0.8]));
        let r = validate_trajectory(&t, &m, None, Some(&goal), &Tolerances::default()).unwrap();
        assert!(r.max_dynamics_defect <= 1e-9);
        assert!(r.passed, "{:?}", r.failures);
        assert!(r.goal_error.unwrap() < 1e-12);
    }

    #[test]
    fn torque_violation_flags_exact_joint_and_step() {
        let m = bundled_model("rr_planar").unwrap();
        let mut t = oracle_trajectory(&m, &[0.2, 0.1], 2.0, 10);
        let limit = m.joints[1].limits.torque_max;
        t.tau[4][1] = limit + 1.0;
        let r = validate_trajectory(&t, &m, None, None, &Tolerances::default()).unwrap();
        assert_eq!(r.limit_violations.len(), 1);
        let v = &r.limit_violations[0];
        assert_eq!((v.step, v.joint, v.quantity.as_str()), (4, 1, "tau"));
        assert!((v.excess - 1.0).abs() < 1e-12);
        assert_eq!(r.worst_defect_at, Some((4, 1)));
        assert!(!r.passed);
    }

    #[test]
    fn model_mismatch_is_an_error() {
        let t = oracle_trajectory(&bundled_model("rr_planar").unwrap(), &[0.2, 0.1], 1.0, 4);
        assert!(validate_trajectory(&t, &bundled_model("arm3").unwrap(), None, None, &Tolerances::default()).is_err());
    }
}
