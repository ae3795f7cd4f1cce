//! Newton-Euler equality factors: one twist, acceleration and wrench
//! factor per link and one torque factor per joint, per time step.
//!
//! Together they encode the same recursion as [`crate::robot::rnea`], so
//! RNEA values satisfy every residual exactly.

use crate::graph::{Factor, FactorKind, NoiseModel, VariableKey};
use crate::robot::{JointSpec, RobotModel};
use crate::spatial::{ad_operator, coadjoint_jacobian, exp_screw, PoseTransform, ScrewAxis};
use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

fn six(x: &DVector<f64>) -> Vector6<f64> {
    Vector6::from_column_slice(x.as_slice())
}

fn put6(dst: &mut DMatrix<f64>, m: &Matrix6<f64>) {
    dst.copy_from(m);
}

fn put_col(dst: &mut DMatrix<f64>, c: &Vector6<f64>) {
    dst.copy_from(c);
}

#[derive(Debug, Clone)]
struct JointGeometry {
    screw: Vector6<f64>,
    home: PoseTransform,
}

impl JointGeometry {
    fn new(joint: &JointSpec) -> Self {
        JointGeometry { screw: joint.screw_axis.0, home: joint.home }
    }

    /// `Ad_{T_{j−1,j}(q)⁻¹}`, mapping parent-frame quantities into the child.
    fn ad_inv(&self, q: f64) -> Matrix6<f64> {
        self.home.compose(&exp_screw(&ScrewAxis(self.screw), q)).inverse().adjoint()
    }
}

/// `V_j − (Ad_{T_j⁻¹} V_{j−1} + A_j q̇_j)`.
///
/// Keys `[q_j, q̇_j, V_{j−1}, V_j]`; the first link has a base at rest and
/// uses `[q̇_0, V_0]`.
#[derive(Debug, Clone)]
pub struct TwistFactor {
    keys: Vec<VariableKey>,
    geom: JointGeometry,
    noise: NoiseModel,
}

impl TwistFactor {
    pub fn new(model: &RobotModel, joint: usize, step: usize, noise: NoiseModel) -> Self {
        let keys = if joint == 0 {
            vec![VariableKey::v(0, step), VariableKey::twist(0, step)]
        } else {
            vec![
                VariableKey::q(joint, step),
                VariableKey::v(joint, step),
                VariableKey::twist(joint - 1, step),
                VariableKey::twist(joint, step),
            ]
        };
        TwistFactor { keys, geom: JointGeometry::new(&model.joints[joint]), noise }
    }
}

impl Factor for TwistFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Dynamics
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let a = self.geom.screw;
        if x.len() == 2 {
            let (qd, v) = (x[0][0], six(x[1]));
            if let Some(j) = jacobians {
                put_col(&mut j[0], &(-a));
                j[1].fill_with_identity();
            }
            return DVector::from_column_slice((v - a * qd).as_slice());
        }
        let (q, qd, v_prev, v) = (x[0][0], x[1][0], six(x[2]), six(x[3]));
        let ad = self.geom.ad_inv(q);
        let carried = ad * v_prev;
        if let Some(j) = jacobians {
            put_col(&mut j[0], &(ad_operator(&a) * carried));
            put_col(&mut j[1], &(-a));
            put6(&mut j[2], &(-ad));
            j[3].fill_with_identity();
        }
        DVector::from_column_slice((v - carried - a * qd).as_slice())
    }
}

/// `A_j − (Ad_{T_j⁻¹} A_{j−1} + ad_{V_j} A_j q̇_j + A_j q̈_j)`.
///
/// Keys `[q_j, q̇_j, q̈_j, V_j, A_{j−1}, A_j]`; for the first link the
/// parent acceleration is the constant gravity base acceleration and the
/// keys are `[q_0, q̇_0, q̈_0, V_0, A_0]`.
#[derive(Debug, Clone)]
pub struct AccelFactor {
    keys: Vec<VariableKey>,
    geom: JointGeometry,
    base: Option<Vector6<f64>>,
    noise: NoiseModel,
}

impl AccelFactor {
    pub fn new(model: &RobotModel, joint: usize, step: usize, noise: NoiseModel) -> Self {
        let mut keys = vec![
            VariableKey::q(joint, step),
            VariableKey::v(joint, step),
            VariableKey::a(joint, step),
            VariableKey::twist(joint, step),
        ];
        let base = if joint == 0 {
            Some(crate::robot::base_acceleration(&model.gravity))
        } else {
            keys.push(VariableKey::accel(joint - 1, step));
            None
        };
        keys.push(VariableKey::accel(joint, step));
        AccelFactor { keys, geom: JointGeometry::new(&model.joints[joint]), base, noise }
    }
}

impl Factor for AccelFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Dynamics
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let s = self.geom.screw;
        let (q, qd, qdd, v) = (x[0][0], x[1][0], x[2][0], six(x[3]));
        let (a_prev, a) = match self.base {
            Some(b) => (b, six(x[4])),
            None => (six(x[4]), six(x[5])),
        };
        let ad = self.geom.ad_inv(q);
        let carried = ad * a_prev;
        let ad_v = ad_operator(&v);
        if let Some(j) = jacobians {
            put_col(&mut j[0], &(ad_operator(&s) * carried));
            put_col(&mut j[1], &(-(ad_v * s)));
            put_col(&mut j[2], &(-s));
            put6(&mut j[3], &(ad_operator(&s) * qd));
            if self.base.is_some() {
                j[4].fill_with_identity();
            } else {
                put6(&mut j[4], &(-ad));
                j[5].fill_with_identity();
            }
        }
        DVector::from_column_slice((a - carried - ad_v * s * qd - s * qdd).as_slice())
    }
}

/// `F_j − Ad_{T_{j+1}⁻¹}ᵀ F_{j+1} − G_j A_j + ad_{V_j}ᵀ G_j V_j`.
///
/// Keys `[V_j, A_j, F_j, F_{j+1}, q_{j+1}]`; the last link carries no tip
/// wrench and uses `[V_j, A_j, F_j]`.
#[derive(Debug, Clone)]
pub struct WrenchFactor {
    keys: Vec<VariableKey>,
    inertia: Matrix6<f64>,
    child: Option<JointGeometry>,
    noise: NoiseModel,
}

impl WrenchFactor {
    pub fn new(model: &RobotModel, link: usize, step: usize, noise: NoiseModel) -> Self {
        let mut keys = vec![VariableKey::twist(link, step), VariableKey::accel(link, step), VariableKey::wrench(link, step)];
        let child = if link + 1 < model.dof() {
            keys.push(VariableKey::wrench(link + 1, step));
            keys.push(VariableKey::q(link + 1, step));
            Some(JointGeometry::new(&model.joints[link + 1]))
        } else {
            None
        };
        WrenchFactor { keys, inertia: model.links[link].inertia.matrix(), child, noise }
    }
}

impl Factor for WrenchFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Dynamics
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let g = &self.inertia;
        let (v, a, f) = (six(x[0]), six(x[1]), six(x[2]));
        let gv = g * v;
        let mut r = f - g * a + ad_operator(&v).transpose() * gv;
        let mut child_terms = None;
        if let Some(child) = &self.child {
            let (f_next, q_next) = (six(x[3]), x[4][0]);
            let ad = child.ad_inv(q_next);
            r -= ad.transpose() * f_next;
            child_terms = Some((ad, f_next, child.screw));
        }
        if let Some(j) = jacobians {
            put6(&mut j[0], &(ad_operator(&v).transpose() * g + coadjoint_jacobian(&gv)));
            put6(&mut j[1], &(-g));
            j[2].fill_with_identity();
            if let Some((ad, f_next, s)) = child_terms {
                put6(&mut j[3], &(-ad.transpose()));
                put_col(&mut j[4], &(ad.transpose() * ad_operator(&s).transpose() * f_next));
            }
        }
        DVector::from_column_slice(r.as_slice())
    }
}

/// `τ_j − F_jᵀ A_j`. Keys `[F_j, τ_j]`.
#[derive(Debug, Clone)]
pub struct TorqueFactor {
    keys: [VariableKey; 2],
    screw: Vector6<f64>,
    noise: NoiseModel,
}

impl TorqueFactor {
    pub fn new(model: &RobotModel, joint: usize, step: usize, noise: NoiseModel) -> Self {
        TorqueFactor {
            keys: [VariableKey::wrench(joint, step), VariableKey::torque(joint, step)],
            screw: model.joints[joint].screw_axis.0,
            noise,
        }
    }
}

impl Factor for TorqueFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Dynamics
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        if let Some(j) = jacobians {
            j[0].copy_from(&(-self.screw.transpose()));
            j[1][(0, 0)] = 1.0;
        }
        DVector::from_element(1, x[1][0] - six(x[0]).dot(&self.screw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::testing::{assert_jacobians_match, values_from_rnea};
    use crate::graph::VariableValues;
    use crate::robot::{bundled_model, rnea};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn noise(d: usize) -> NoiseModel {
        NoiseModel::isotropic(d, 1e-3).unwrap()
    }

    fn all_factors(model: &RobotModel, step: usize) -> Vec<Box<dyn Factor>> {
        let mut out: Vec<Box<dyn Factor>> = Vec::new();
        for j in 0..model.dof() {
            out.push(Box::new(TwistFactor::new(model, j, step, noise(6))));
            out.push(Box::new(AccelFactor::new(model, j, step, noise(6))));
            out.push(Box::new(WrenchFactor::new(model, j, step, noise(6))));
            out.push(Box::new(TorqueFactor::new(model, j, step, noise(1))));
        }
        out
    }

    fn max_residual(model: &RobotModel, values: &VariableValues) -> f64 {
        all_factors(model, 0)
            .iter()
            .map(|f| f.unwhitened_error(values).unwrap().amax())
            .fold(0.0, f64::max)
    }

    #[test]
    fn twist_of_spinning_first_joint() {
        let m = bundled_model("rr_planar").unwrap();
        let f = TwistFactor::new(&m, 0, 0, noise(6));
        let one = DVector::from_element(1, 1.0);
        let v = DVector::from_column_slice(m.joints[0].screw_axis.0.as_slice());
        assert_eq!(f.evaluate(&[&one, &v], None).amax(), 0.0);
        let zero = DVector::zeros(1);
        assert_eq!(f.evaluate(&[&zero, &DVector::zeros(6)], None).amax(), 0.0);
        assert!(f.evaluate(&[&zero, &v], None).amax() > 0.0);
    }

    #[test]
    fn accel_at_rest_carries_gravity() {
        let m = bundled_model("rr_planar").unwrap();
        let f = AccelFactor::new(&m, 0, 0, noise(6));
        let z = DVector::zeros(1);
        let base = Vector6::new(0.0, 0.0, 0.0, 0.0, 9.81, 0.0);
        let a = DVector::from_column_slice(base.as_slice());
        assert!(f.evaluate(&[&z, &z, &z, &DVector::zeros(6), &a], None).amax() < 1e-15);
    }

    #[test]
    fn massless_tip_link_needs_zero_wrench() {
        let mut m = bundled_model("rr_planar").unwrap();
        m.links[1].inertia.mass = 0.0;
        m.links[1].inertia.inertia = nalgebra::Matrix3::zeros();
        let f = WrenchFactor::new(&m, 1, 0, noise(6));
        let v = DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.5, 0.0, 0.0]);
        let z = DVector::zeros(6);
        assert_eq!(f.evaluate(&[&v, &v, &z], None).amax(), 0.0);
    }

    #[test]
    fn static_link_wrench_matches_gravity_load() {
        // a horizontal rod of mass 1 with its COM 0.5 m out must push up with
        // m g and twist by m g · 0.5 about z, seen in its own frame
        let m = bundled_model("rr_planar").unwrap();
        let f = WrenchFactor::new(&m, 1, 0, noise(6));
        let z = DVector::zeros(6);
        let a = DVector::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 9.81, 0.0]);
        let w = DVector::from_column_slice(&[0.0, 0.0, 9.81 * 0.5, 0.0, 9.81, 0.0]);
        assert!(f.evaluate(&[&z, &a, &w], None).amax() < 1e-12);
    }

    #[test]
    fn torque_is_axis_projection() {
        let m = bundled_model("rr_planar").unwrap();
        let f = TorqueFactor::new(&m, 0, 0, noise(1));
        let w = DVector::from_column_slice((m.joints[0].screw_axis.0 * 3.0).as_slice());
        assert_eq!(f.evaluate(&[&w, &DVector::from_element(1, 3.0)], None)[0], 0.0);
        let r = f.evaluate(&[&DVector::zeros(6), &DVector::from_element(1, 1.5)], None);
        assert_eq!(r[0], 1.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn rnea_values_satisfy_every_factor(seed in proptest::collection::vec(-2.0..2.0f64, 21)) {
            for name in ["rr_planar", "acrobot", "arm3", "arm7"] {
                let m = bundled_model(name).unwrap();
                let n = m.dof();
                let q = DVector::from_column_slice(&seed[..n]);
                let qd = DVector::from_column_slice(&seed[7..7 + n]);
                let qdd = DVector::from_column_slice(&seed[14..14 + n]);
                let vals = values_from_rnea(&m, &q, &qd, &qdd, 0);
                let worst = max_residual(&m, &vals);
                prop_assert!(worst <= 1e-10, "{name}: {worst}");
            }
        }

        #[test]
        fn jacobians_match_finite_differences(seed in proptest::collection::vec(-1.5..1.5f64, 21), pert in proptest::collection::vec(-1.0..1.0f64, 6)) {
            let m = bundled_model("arm7").unwrap();
            let n = m.dof();
            let q = DVector::from_column_slice(&seed[..n]);
            let qd = DVector::from_column_slice(&seed[7..7 + n]);
            let qdd = DVector::from_column_slice(&seed[14..14 + n]);
            let mut vals = values_from_rnea(&m, &q, &qd, &qdd, 0);
            // move off the manifold so the residuals are nonzero
            let bump = DVector::from_column_slice(&pert);
            for j in 0..n {
                for k in [VariableKey::twist(j, 0), VariableKey::accel(j, 0), VariableKey::wrench(j, 0)] {
                    let x = vals.at(&k).unwrap() + &bump;
                    vals.insert(k, x);
                }
            }
            for f in all_factors(&m, 0) {
                assert_jacobians_match(f.as_ref(), &vals, 1e-5);
            }
        }
    }

    #[test]
    fn rnea_state_with_gravity_along_z() {
        let mut m = bundled_model("arm3").unwrap();
        m.gravity = Vector3::new(0.0, 0.0, -9.81);
        let q = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let qd = DVector::from_vec(vec![0.1, 0.4, -0.3]);
        let qdd = DVector::zeros(3);
        let vals = values_from_rnea(&m, &q, &qd, &qdd, 0);
        assert!(max_residual(&m, &vals) <= 1e-10);
        let tau = rnea(&m, &q, &qd, &qdd).unwrap().torques;
        for j in 0..3 {
            assert_eq!(vals.at(&VariableKey::torque(j, 0)).unwrap()[0], tau[j]);
        }
    }
}
