//! Newton-Euler dynamics checked against an independent planar Lagrangian
//! model and against energy conservation.

mod common;

use common::PlanarTwoLink;
use dynplan::robot::{bundled_model, forward_dynamics, mass_matrix, rnea_inverse_dynamics, RobotModel};
use nalgebra::{DVector, Vector3};
use proptest::prelude::*;

fn check_against_lagrangian(name: &str, q: [f64; 2], qd: [f64; 2], qdd: [f64; 2]) -> f64 {
    let model = bundled_model(name).unwrap();
    let oracle = PlanarTwoLink::from_model(&model).torques(q, qd, qdd);
    let tau = rnea_inverse_dynamics(
        &model,
        &DVector::from_row_slice(&q),
        &DVector::from_row_slice(&qd),
        &DVector::from_row_slice(&qdd),
    )
    .unwrap();
    (tau[0] - oracle[0]).abs().max((tau[1] - oracle[1]).abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rnea_matches_planar_lagrangian(
        q in prop::array::uniform2(-3.5..3.5f64),
        qd in prop::array::uniform2(-6.0..6.0f64),
        qdd in prop::array::uniform2(-20.0..20.0f64),
    ) {
        for name in ["rr_planar", "acrobot"] {
            let err = check_against_lagrangian(name, q, qd, qdd);
            prop_assert!(err < 1e-9, "{name}: {err}");
        }
    }
}

#[test]
fn lagrangian_oracle_reproduces_hand_statics() {
    // horizontal rr arm holding still: tau1 = g(m1 lc1 + m2 (l1 + lc2)), tau2 = g m2 lc2
    let model = bundled_model("rr_planar").unwrap();
    let o = PlanarTwoLink::from_model(&model).torques([0.0, 0.0], [0.0, 0.0], [0.0, 0.0]);
    assert!((o[0] - 9.81 * (0.5 + 1.5)).abs() < 1e-12);
    assert!((o[1] - 9.81 * 0.5).abs() < 1e-12);
}

fn kinetic_energy(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
    0.5 * qd.dot(&(mass_matrix(model, q).unwrap() * qd))
}

fn rk4_energy_drift(name: &str, q0: &[f64], qd0: &[f64]) -> f64 {
    let mut model = bundled_model(name).unwrap();
    model.gravity = Vector3::zeros();
    let n = model.dof();
    let zero = DVector::zeros(n);
    let f = |q: &DVector<f64>, qd: &DVector<f64>| forward_dynamics(&model, q, qd, &zero).unwrap();
    let mut q = DVector::from_row_slice(q0);
    let mut qd = DVector::from_row_slice(qd0);
    let e0 = kinetic_energy(&model, &q, &qd);
    let dt = 1e-4;
    for _ in 0..10_000 {
        let k1q = qd.clone();
        let k1v = f(&q, &qd);
        let k2q = &qd + &k1v * (dt / 2.0);
        let k2v = f(&(&q + &k1q * (dt / 2.0)), &k2q);
        let k3q = &qd + &k2v * (dt / 2.0);
        let k3v = f(&(&q + &k2q * (dt / 2.0)), &k3q);
        let k4q = &qd + &k3v * dt;
        let k4v = f(&(&q + &k3q * dt), &k4q);
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
        qd += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
    }
    (kinetic_energy(&model, &q, &qd) - e0).abs() / e0
}

#[test]
fn kinetic_energy_is_conserved_without_gravity_or_torque() {
    let cases: [(&str, &[f64], &[f64]); 4] = [
        ("rr_planar", &[0.3, -0.8], &[1.5, -2.0]),
        ("acrobot", &[0.1, 0.9], &[-1.0, 3.0]),
        ("arm3", &[0.2, -0.4, 1.0], &[0.8, -0.5, 1.2]),
        ("arm7", &[0.1, 0.5, -0.3, -1.0, 0.4, 0.7, -0.2], &[0.4, -0.3, 0.6, 0.5, -0.8, 0.3, 1.0]),
    ];
    for (name, q, qd) in cases {
        let drift = rk4_energy_drift(name, q, qd);
        assert!(drift < 1e-6, "{name}: relative drift {drift}");
    }
}
