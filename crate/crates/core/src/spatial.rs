//! Screw-theory spatial algebra.
//!
//! Six-vectors are stored angular part first: a twist is `(ω, v)` and a
//! wrench is `(m, f)`. `PoseTransform` keeps an explicit rotation matrix and
//! translation so that adjoint matrices can be written down directly.

use nalgebra::{Matrix3, Matrix6, Rotation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

/// Skew-symmetric matrix `[w]×` such that `[w]× x = w × x`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Spatial velocity of a rigid body, `(ω, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist(pub Vector6<f64>);

/// Spatial force, `(m, f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench(pub Vector6<f64>);

impl Twist {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Twist(stack(&angular, &linear))
    }

    pub fn zero() -> Self {
        Twist(Vector6::zeros())
    }

    pub fn angular(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into()
    }

    pub fn linear(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Wrench {
    pub fn new(moment: Vector3<f64>, force: Vector3<f64>) -> Self {
        Wrench(stack(&moment, &force))
    }

    pub fn zero() -> Self {
        Wrench(Vector6::zeros())
    }

    pub fn moment(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into()
    }

    pub fn force(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into()
    }

    /// Power pairing with a twist.
    pub fn dot(&self, twist: &Twist) -> f64 {
        self.0.dot(&twist.0)
    }
}

fn stack(top: &Vector3<f64>, bottom: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

/// Rigid transform `T = (R, p)` acting as `x ↦ R x + p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for PoseTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseTransform {
    pub fn identity() -> Self {
        PoseTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        PoseTransform { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        PoseTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about a unit axis by `angle` radians, no translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        PoseTransform {
            rotation: rodrigues(&axis.normalize(), angle),
            translation: Vector3::zeros(),
        }
    }

    /// Projects the rotation onto SO(3). Used once when loading models.
    pub fn orthonormalized(&self) -> Self {
        let rot = Rotation3::from_matrix(&self.rotation);
        PoseTransform {
            rotation: *rot.matrix(),
            translation: self.translation,
        }
    }

    /// True when `RᵀR = I` and `det R = +1` within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        err <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|x| x.is_finite())
    }

    pub fn compose(&self, other: &PoseTransform) -> PoseTransform {
        PoseTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> PoseTransform {
        let rt = self.rotation.transpose();
        PoseTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `Ad_T = [[R, 0], [[p]× R, R]]`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        adjoint_map(self)
    }
}

impl Mul for PoseTransform {
    type Output = PoseTransform;
    fn mul(self, rhs: PoseTransform) -> PoseTransform {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a PoseTransform> for &'a PoseTransform {
    type Output = PoseTransform;
    fn mul(self, rhs: &PoseTransform) -> PoseTransform {
        self.compose(rhs)
    }
}

/// Adjoint representation of a transform, angular-first.
pub fn adjoint_map(t: &PoseTransform) -> Matrix6<f64> {
    let r = t.rotation;
    let pr = skew(&t.translation) * r;
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&pr);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    ad
}

/// Lie bracket matrix `ad_V = [[[ω]×, 0], [[v]×, [ω]×]]`.
pub fn ad_operator(v: &Vector6<f64>) -> Matrix6<f64> {
    let w = skew(&Vector3::new(v[0], v[1], v[2]));
    let l = skew(&Vector3::new(v[3], v[4], v[5]));
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&l);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    ad
}

/// Matrix `B(w)` with `ad_Vᵀ w = B(w) V` for every twist `V`.
pub fn coadjoint_jacobian(w: &Vector6<f64>) -> Matrix6<f64> {
    let m = skew(&Vector3::new(w[0], w[1], w[2]));
    let f = skew(&Vector3::new(w[3], w[4], w[5]));
    let mut b = Matrix6::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&m);
    b.fixed_view_mut::<3, 3>(0, 3).copy_from(&f);
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&f);
    b
}

fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(axis);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Joint screw axis expressed in the child link frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrewAxis(pub Vector6<f64>);

impl ScrewAxis {
    pub fn revolute(axis: Vector3<f64>, point: Vector3<f64>) -> Self {
        let w = axis.normalize();
        ScrewAxis(stack(&w, &(-w.cross(&point))))
    }

    pub fn angular(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into()
    }

    pub fn linear(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into()
    }

    pub fn is_revolute(&self) -> bool {
        self.angular().norm() > 0.0
    }

    pub fn as_vector(&self) -> &Vector6<f64> {
        &self.0
    }
}

/// Exponential of a screw motion: rotate/translate along `axis` by `q`.
///
/// Revolute axes need a unit angular part; an axis with zero angular part
/// is treated as a pure translation.
pub fn exp_screw(axis: &ScrewAxis, q: f64) -> PoseTransform {
    let w = axis.angular();
    let v = axis.linear();
    let wn = w.norm();
    if wn < 1e-12 {
        return PoseTransform::from_translation(v * q);
    }
    let k = skew(&w);
    let k2 = k * k;
    let (s, c) = q.sin_cos();
    let rotation = Matrix3::identity() + k * s + k2 * (1.0 - c);
    let g = Matrix3::identity() * q + k * (1.0 - c) + k2 * (q - s);
    PoseTransform {
        rotation,
        translation: g * v,
    }
}

/// Rotation vector of `R` (logarithm on SO(3)).
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let w = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let s = w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if theta < 1e-6 {
        return w * (1.0 + theta * theta / 6.0);
    }
    if std::f64::consts::PI - theta > 1e-4 {
        return w * (theta / s);
    }
    // near pi the skew part vanishes; recover the axis from the symmetric part
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let (i, _) = (0..3).map(|i| (i, b[(i, i)])).fold((0, f64::MIN), |a, x| if x.1 > a.1 { x } else { a });
    let mut axis: Vector3<f64> = b.column(i).into();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Inverse of the right Jacobian of SO(3) at rotation vector `phi`.
pub fn so3_right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-8 {
        return Matrix3::identity() + 0.5 * k + k * k / 12.0;
    }
    let half = 0.5 * theta;
    let coef = (1.0 - half / half.tan()) / (theta * theta);
    Matrix3::identity() + 0.5 * k + coef * k * k
}

/// Rigid-body inertia about a link frame, built from mass, rotational
/// inertia about the centre of mass (link-frame axes) and the centre of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialInertia {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub com: Vector3<f64>,
}

impl SpatialInertia {
    pub fn new(mass: f64, inertia: Matrix3<f64>, com: Vector3<f64>) -> Self {
        SpatialInertia { mass, inertia, com }
    }

    pub fn point_mass(mass: f64, com: Vector3<f64>) -> Self {
        SpatialInertia {
            mass,
            inertia: Matrix3::zeros(),
            com,
        }
    }

    /// 6×6 matrix `G` such that kinetic energy is `½ Vᵀ G V`.
    pub fn matrix(&self) -> Matrix6<f64> {
        let c = skew(&self.com);
        let m = self.mass;
        let mut g = Matrix6::zeros();
        g.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.inertia - m * c * c));
        g.fixed_view_mut::<3, 3>(0, 3).copy_from(&(m * c));
        g.fixed_view_mut::<3, 3>(3, 0).copy_from(&(m * c.transpose()));
        g.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * m));
        g
    }

    /// Positive mass, symmetric positive-definite rotational inertia.
    pub fn is_physical(&self) -> bool {
        if !(self.mass > 0.0) || (self.inertia - self.inertia.transpose()).abs().max() > 1e-9 {
            return false;
        }
        self.inertia.cholesky().is_some()
    }
}
