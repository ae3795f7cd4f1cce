use super::kinematics::check_len;
use super::RobotModel;
use crate::error::{Error, Result};
use crate::spatial::{ad_operator, PoseTransform};
use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};

/// Every intermediate quantity of one Newton-Euler pass, in link frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RneaResult {
    /// `T_{j−1,j}(q_j)` for each joint.
    pub transforms: Vec<PoseTransform>,
    pub twists: Vec<Vector6<f64>>,
    pub accels: Vec<Vector6<f64>>,
    pub wrenches: Vec<Vector6<f64>>,
    pub torques: DVector<f64>,
}

/// Base acceleration that injects gravity: `(0, −g)`.
pub(crate) fn base_acceleration(gravity: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(0.0, 0.0, 0.0, -gravity.x, -gravity.y, -gravity.z)
}

/// Recursive Newton-Euler with zero base twist, gravity as base
/// acceleration and zero tip wrench.
pub fn rnea(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>, qdd: &DVector<f64>) -> Result<RneaResult> {
    check_len(model, q, "q")?;
    check_len(model, qd, "qdot")?;
    check_len(model, qdd, "qddot")?;
    Ok(rnea_with_gravity(model, q, qd, qdd, &model.gravity))
}

pub(crate) fn rnea_with_gravity(
    model: &RobotModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    qdd: &DVector<f64>,
    gravity: &Vector3<f64>,
) -> RneaResult {
    let n = model.dof();
    let mut transforms = Vec::with_capacity(n);
    let mut ad_inv: Vec<Matrix6<f64>> = Vec::with_capacity(n);
    let mut twists = Vec::with_capacity(n);
    let mut accels = Vec::with_capacity(n);
    let mut v_prev = Vector6::zeros();
    let mut a_prev = base_acceleration(gravity);
    for (j, joint) in model.joints.iter().enumerate() {
        let t = joint.transform(q[j]);
        let ad = t.inverse().adjoint();
        let s = joint.screw_axis.0;
        let v = ad * v_prev + s * qd[j];
        let a = ad * a_prev + ad_operator(&v) * s * qd[j] + s * qdd[j];
        transforms.push(t);
        ad_inv.push(ad);
        twists.push(v);
        accels.push(a);
        v_prev = v;
        a_prev = a;
    }
    let mut wrenches = vec![Vector6::zeros(); n];
    let mut torques = DVector::zeros(n);
    let mut f_next = Vector6::zeros();
    for j in (0..n).rev() {
        let g = model.links[j].inertia.matrix();
        let mut f = g * accels[j] - ad_operator(&twists[j]).transpose() * (g * twists[j]);
        if j + 1 < n {
            f += ad_inv[j + 1].transpose() * f_next;
        }
        torques[j] = f.dot(&model.joints[j].screw_axis.0);
        wrenches[j] = f;
        f_next = f;
    }
    RneaResult { transforms, twists, accels, wrenches, torques }
}

/// Joint torques realizing `(q, q̇, q̈)`.
pub fn rnea_inverse_dynamics(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>, qdd: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(rnea(model, q, qd, qdd)?.torques)
}

/// Joint-space mass matrix, one RNEA call per column with unit
/// acceleration, zero velocity and no gravity.
pub fn mass_matrix(model: &RobotModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_len(model, q, "q")?;
    let n = model.dof();
    let zero = DVector::zeros(n);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let col = rnea_with_gravity(model, q, &zero, &e, &Vector3::zeros()).torques;
        m.set_column(i, &col);
    }
    Ok(m)
}

/// Joint accelerations produced by torques `tau`.
pub fn forward_dynamics(model: &RobotModel, q: &DVector<f64>, qd: &DVector<f64>, tau: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(model, tau, "tau")?;
    let m = mass_matrix(model, q)?;
    let bias = rnea(model, q, qd, &DVector::zeros(model.dof()))?.torques;
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Model(format!("mass matrix of {} is singular at q = {:?}", model.name, q.as_slice())))?;
    Ok(chol.solve(&(tau - bias)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{bundled_model, CollisionSphere, JointLimits, JointSpec, LinkSpec};
    use crate::spatial::{ScrewAxis, SpatialInertia};
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn pendulum(m: f64, l: f64) -> RobotModel {
        RobotModel {
            name: "pendulum".into(),
            joints: vec![JointSpec {
                screw_axis: ScrewAxis::revolute(Vector3::z(), Vector3::zeros()),
                home: PoseTransform::identity(),
                limits: JointLimits { q_min: -4.0, q_max: 4.0, vel_max: 10.0, acc_max: 10.0, torque_max: 100.0 },
                actuated: true,
            }],
            links: vec![LinkSpec {
                inertia: SpatialInertia::new(m, Matrix3::identity() * 1e-9, Vector3::new(l, 0.0, 0.0)),
                spheres: vec![CollisionSphere { offset: Vector3::new(l, 0.0, 0.0), radius: 0.1 }],
            }],
            gravity: Vector3::new(0.0, -9.81, 0.0),
            end_effector: PoseTransform::from_translation(Vector3::new(l, 0.0, 0.0)),
        }
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn pendulum_statics() {
        let (m, l) = (1.3, 0.7);
        let p = pendulum(m, l);
        for &q in &[0.0, 0.4, 1.2, -2.0] {
            let tau = rnea_inverse_dynamics(&p, &v(&[q]), &v(&[0.0]), &v(&[0.0])).unwrap();
            // tiny rotational inertia does not enter statics
            assert!((tau[0] - m * 9.81 * l * q.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_gravity_no_motion_no_torque() {
        let mut m = bundled_model("arm7").unwrap();
        m.gravity = Vector3::zeros();
        let q = v(&[0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7]);
        let tau = rnea_inverse_dynamics(&m, &q, &DVector::zeros(7), &DVector::zeros(7)).unwrap();
        assert_eq!(tau.amax(), 0.0);
    }

    #[test]
    fn acrobot_rest_is_equilibrium() {
        let m = bundled_model("acrobot").unwrap();
        let qdd = forward_dynamics(&m, &DVector::zeros(2), &DVector::zeros(2), &DVector::zeros(2)).unwrap();
        assert!(qdd.amax() < 1e-12);
    }

    #[test]
    fn forward_dynamics_inverts_rnea() {
        let m = bundled_model("arm7").unwrap();
        let q = v(&[0.1, -0.7, 0.3, 1.2, -0.5, 0.8, -0.2]);
        let qd = v(&[0.5, -0.2, 0.3, 0.1, -0.4, 0.6, 0.9]);
        let qdd = v(&[1.0, -2.0, 0.5, 0.3, 0.2, -0.7, 1.1]);
        let tau = rnea_inverse_dynamics(&m, &q, &qd, &qdd).unwrap();
        let back = forward_dynamics(&m, &q, &qd, &tau).unwrap();
        assert!((back - qdd).amax() < 1e-9);
    }

    #[test]
    fn zero_torque_zero_gravity_at_rest_gives_zero_acceleration() {
        let mut m = bundled_model("rr_planar").unwrap();
        m.gravity = Vector3::zeros();
        let qdd = forward_dynamics(&m, &v(&[0.3, 1.0]), &DVector::zeros(2), &DVector::zeros(2)).unwrap();
        assert!(qdd.amax() < 1e-14);
    }

    proptest! {
        #[test]
        fn torque_is_affine_in_acceleration(
            q in proptest::collection::vec(-3.0..3.0f64, 7),
            qd in proptest::collection::vec(-2.0..2.0f64, 7),
            a1 in proptest::collection::vec(-5.0..5.0f64, 7),
            a2 in proptest::collection::vec(-5.0..5.0f64, 7),
        ) {
            let m = bundled_model("arm7").unwrap();
            let (q, qd, a1, a2) = (v(&q), v(&qd), v(&a1), v(&a2));
            let t = |a: &DVector<f64>| rnea_inverse_dynamics(&m, &q, &qd, a).unwrap();
            let t0 = t(&DVector::zeros(7));
            let lhs = t(&(&a1 + &a2)) - &t0;
            let rhs = (t(&a1) - &t0) + (t(&a2) - &t0);
            prop_assert!((lhs - rhs).amax() < 1e-9);
        }

        #[test]
        fn mass_matrix_is_symmetric_positive_definite(q in proptest::collection::vec(-3.0..3.0f64, 7)) {
            let m = bundled_model("arm7").unwrap();
            let mm = mass_matrix(&m, &v(&q)).unwrap();
            prop_assert!((&mm - mm.transpose()).amax() < 1e-10);
            prop_assert!(mm.symmetric_eigenvalues().min() > 0.0);
        }
    }
}
