//! Initial trajectory: a quintic per joint from start to goal with every
//! link quantity filled in by Newton-Euler.

use super::problem::{Goal, PlanningProblem};
use crate::factors::insert_rnea_state;
use crate::graph::VariableValues;
use nalgebra::DVector;

/// Quintic blend `s(u) = 10u³ − 15u⁴ + 6u⁵` and its first two derivatives.
pub fn quintic(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        u3 * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - u) * (1.0 - u),
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
    )
}

/// Joint states of the quintic from `q0` to `q1` at the problem's steps.
pub fn quintic_states(q0: &DVector<f64>, q1: &DVector<f64>, horizon: f64, steps: usize) -> Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let dq = q1 - q0;
    (0..=steps)
        .map(|i| {
            let u = i as f64 / steps as f64;
            let (s, ds, dds) = quintic(u);
            (q0 + &dq * s, &dq * (ds / horizon), &dq * (dds / (horizon * horizon)))
        })
        .collect()
}

/// Workspace goals have no goal configuration, so the start is held.
pub fn initialize_trajectory(problem: &PlanningProblem) -> VariableValues {
    let q0 = &problem.start.q;
    let q1 = match &problem.goal {
        Goal::Joint(q) => q.clone(),
        Goal::Pose(_) => q0.clone(),
    };
    initialize_between(problem, q0, &q1)
}

pub fn initialize_between(problem: &PlanningProblem, q0: &DVector<f64>, q1: &DVector<f64>) -> VariableValues {
    let mut values = VariableValues::new();
    for (i, (q, v, a)) in quintic_states(q0, q1, problem.horizon, problem.steps).iter().enumerate() {
        insert_rnea_state(&mut values, &problem.model, q, v, a, i).expect("dimensions checked by the problem");
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VariableKey;
    use crate::robot::bundled_model;

    #[test]
    fn quintic_boundary_conditions() {
        assert_eq!(quintic(0.0), (0.0, 0.0, 0.0));
        assert_eq!(quintic(1.0), (1.0, 0.0, 0.0));
        assert_eq!(quintic(0.5).0, 0.5);
    }

    #[test]
    fn hold_problem_is_constant() {
        let q = DVector::from_vec(vec![0.3, -0.4]);
        let p = PlanningProblem::new(bundled_model("rr_planar").unwrap(), q.clone(), Goal::Joint(q), 1.0, 6).unwrap();
        let v = initialize_trajectory(&p);
        for i in 0..=6 {
            assert_eq!(v.scalar(&VariableKey::q(1, i)).unwrap(), -0.4);
            assert_eq!(v.scalar(&VariableKey::v(0, i)).unwrap(), 0.0);
            assert_eq!(v.scalar(&VariableKey::a(1, i)).unwrap(), 0.0);
        }
    }

    #[test]
    fn midpoint_and_rest_at_ends() {
        let p = PlanningProblem::new(
            bundled_model("rr_planar").unwrap(),
            DVector::zeros(2),
            Goal::Joint(DVector::from_vec(vec![1.0, 1.0])),
            3.0,
            10,
        )
        .unwrap();
        let v = initialize_trajectory(&p);
        assert_eq!(v.scalar(&VariableKey::q(0, 5)).unwrap(), 0.5);
        for i in [0, 10] {
            assert_eq!(v.scalar(&VariableKey::v(0, i)).unwrap(), 0.0);
            assert_eq!(v.scalar(&VariableKey::a(0, i)).unwrap(), 0.0);
        }
        assert_eq!(v.scalar(&VariableKey::q(1, 10)).unwrap(), 1.0);
    }
}
