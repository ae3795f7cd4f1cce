//! Collision factor for one sphere at one step.

use crate::graph::{Factor, FactorKind, NoiseModel, VariableKey};
use crate::robot::{JointSpec, RobotModel};
use crate::sdf::{hinge_cost_sdf, SdfGrid};
use crate::spatial::PoseTransform;
use nalgebra::{DMatrix, DVector, Vector3};
use std::sync::Arc;

/// Hinge residual `max(0, ε − d)` for the signed clearance `d` of one
/// collision sphere. The keys are the angles of the joints that move it.
#[derive(Debug, Clone)]
pub struct ObstacleFactor {
    chain: Vec<JointSpec>,
    offset: Vector3<f64>,
    radius: f64,
    sdf: Arc<SdfGrid>,
    keys: Vec<VariableKey>,
    eps: f64,
    noise: NoiseModel,
}

impl ObstacleFactor {
    pub fn new(model: &RobotModel, link: usize, sphere: usize, sdf: Arc<SdfGrid>, step: usize, eps: f64, sigma: f64) -> crate::Result<Self> {
        let s = model
            .links
            .get(link)
            .and_then(|l| l.spheres.get(sphere))
            .ok_or_else(|| crate::Error::Model(format!("link {link} has no collision sphere {sphere}")))?;
        Ok(ObstacleFactor {
            chain: model.joints[..=link].to_vec(),
            offset: s.offset,
            radius: s.radius,
            sdf,
            keys: (0..=link).map(|j| VariableKey::q(j, step)).collect(),
            eps,
            noise: NoiseModel::isotropic(1, sigma)?,
        })
    }

    /// One factor per collision sphere of `model`, in link order.
    pub fn for_all_spheres(model: &RobotModel, sdf: &Arc<SdfGrid>, step: usize, eps: f64, sigma: f64) -> crate::Result<Vec<Self>> {
        let mut out = Vec::with_capacity(model.sphere_count());
        for (j, link) in model.links.iter().enumerate() {
            for s in 0..link.spheres.len() {
                out.push(Self::new(model, j, s, sdf.clone(), step, eps, sigma)?);
            }
        }
        Ok(out)
    }

    pub fn sdf(&self) -> &Arc<SdfGrid> {
        &self.sdf
    }

    /// Same sphere and step against another field.
    pub fn with_sdf(&self, sdf: Arc<SdfGrid>) -> Self {
        ObstacleFactor { sdf, ..self.clone() }
    }

    /// Signed clearance of the sphere at joint angles `q`.
    pub fn clearance(&self, q: &[f64]) -> f64 {
        let t = self.chain.iter().zip(q).fold(PoseTransform::identity(), |t, (j, &qj)| t.compose(&j.transform(qj)));
        self.sdf.query(&t.transform_point(&self.offset)).distance - self.radius
    }
}

impl Factor for ObstacleFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Obstacle
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let mut t = PoseTransform::identity();
        let mut screws = Vec::with_capacity(self.chain.len());
        for (joint, qj) in self.chain.iter().zip(x) {
            t = t.compose(&joint.transform(qj[0]));
            screws.push(t.adjoint() * joint.screw_axis.0);
        }
        let c = t.transform_point(&self.offset);
        let query = self.sdf.query(&c);
        if query.clamped {
            log::warn!("collision sphere at {c:?} lies outside the signed distance field; query clamped");
        }
        let (cost, dcost) = hinge_cost_sdf(query.distance - self.radius, self.eps);
        if let Some(j) = jacobians {
            for (block, s) in j.iter_mut().zip(&screws) {
                let w = Vector3::new(s[0], s[1], s[2]);
                let v = Vector3::new(s[3], s[4], s[5]);
                block[(0, 0)] = dcost * query.gradient.dot(&(w.cross(&c) + v));
            }
        }
        DVector::from_element(1, cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::testing::assert_jacobians_match;
    use crate::graph::VariableValues;
    use crate::robot::bundled_model;
    use crate::sdf::{build_sdf, obstacle_residual, ObstacleSet, SphereObstacle};

    #[test]
    fn per_sphere_factors_match_stacked_residual() {
        let m = bundled_model("rr_planar").unwrap();
        let obs = ObstacleSet { spheres: vec![SphereObstacle { center: Vector3::new(1.0, 0.6, 0.0), radius: 0.4 }], boxes: vec![] };
        let g = Arc::new(build_sdf(&obs, Vector3::new(-3.0, -3.0, -0.5), 0.05, [121, 121, 21]).unwrap());
        let fs = ObstacleFactor::for_all_spheres(&m, &g, 0, 0.1, 0.05).unwrap();
        assert_eq!(fs.len(), m.sphere_count());
        assert_eq!(fs[0].keys().len(), 1);
        assert_eq!(fs.last().unwrap().keys().len(), 2);
        let q = [0.3, -0.2];
        let mut v = VariableValues::new();
        for (j, &x) in q.iter().enumerate() {
            v.insert_scalar(VariableKey::q(j, 0), x);
        }
        let stacked = obstacle_residual(&m, &g, &DVector::from_column_slice(&q), 0.1).unwrap();
        assert!(stacked.residual.amax() > 0.0);
        for (row, f) in fs.iter().enumerate() {
            let r = f.unwhitened_error(&v).unwrap();
            assert!((r[0] - stacked.residual[row]).abs() < 1e-12);
            assert!((f.clearance(&q) - stacked.clearance[row]).abs() < 1e-12);
            assert_jacobians_match(f, &v, 1e-4);
        }
    }

    #[test]
    fn missing_sphere_is_an_error() {
        let m = bundled_model("rr_planar").unwrap();
        let g = Arc::new(build_sdf(&ObstacleSet::default(), Vector3::zeros(), 1.0, [2, 2, 2]).unwrap());
        assert!(ObstacleFactor::new(&m, 0, 99, g, 0, 0.1, 0.05).is_err());
    }
}
