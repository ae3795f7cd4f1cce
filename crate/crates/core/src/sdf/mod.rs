//! Grid signed distance fields and the sphere-based obstacle cost.

mod io;

pub use io::{load_scene_file, load_sdf, read_sdf_binary, read_sdf_json, save_sdf, write_sdf_binary, write_sdf_json};

use crate::error::{Error, Result};
use crate::robot::{forward_kinematics, RobotModel};
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

/// Value stored in every cell of a field built from an empty scene.
pub const EMPTY_SCENE_DISTANCE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereObstacle {
    pub center: Vector3<f64>,
    pub radius: f64,
}

impl BoxObstacle {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let q = (p - self.center).abs() - self.half_extents;
        let outside = q.sup(&Vector3::zeros()).norm();
        let inside = q.max().min(0.0);
        outside + inside
    }
}

impl SphereObstacle {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// Axis-aligned boxes and spheres.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSet {
    #[serde(default)]
    pub boxes: Vec<BoxObstacle>,
    #[serde(default)]
    pub spheres: Vec<SphereObstacle>,
}

impl ObstacleSet {
    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty() && self.spheres.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.boxes.iter().enumerate() {
            if !b.half_extents.iter().all(|&e| e > 0.0) || !b.center.iter().all(|c| c.is_finite()) {
                return Err(Error::Sdf(format!("boxes[{i}]: half extents must be positive")));
            }
        }
        for (i, s) in self.spheres.iter().enumerate() {
            if !(s.radius > 0.0) || !s.center.iter().all(|c| c.is_finite()) {
                return Err(Error::Sdf(format!("spheres[{i}]: radius must be positive")));
            }
        }
        Ok(())
    }

    /// Exact signed distance to the union of primitives.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let b = self.boxes.iter().map(|b| b.signed_distance(p));
        let s = self.spheres.iter().map(|s| s.signed_distance(p));
        b.chain(s).fold(EMPTY_SCENE_DISTANCE, f64::min)
    }

    pub fn translated(&self, by: &Vector3<f64>) -> ObstacleSet {
        ObstacleSet {
            boxes: self.boxes.iter().map(|b| BoxObstacle { center: b.center + by, ..*b }).collect(),
            spheres: self.spheres.iter().map(|s| SphereObstacle { center: s.center + by, ..*s }).collect(),
        }
    }
}

/// Placement and resolution of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: Vector3<f64>,
    pub cell_size: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::Sdf("cell_size must be positive".into()));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Sdf("grid dims must be positive".into()));
        }
        if !self.origin.iter().all(|o| o.is_finite()) {
            return Err(Error::Sdf("grid origin is not finite".into()));
        }
        Ok(())
    }
}

/// Obstacle primitives plus the grid they are sampled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub grid: GridSpec,
    #[serde(default)]
    pub obstacles: ObstacleSet,
}

impl Scene {
    pub fn build(&self) -> Result<SdfGrid> {
        build_sdf(&self.obstacles, self.grid.origin, self.grid.cell_size, self.grid.dims)
    }
}

/// Signed distances sampled at grid nodes `origin + cell_size · (i, j, k)`,
/// positive outside obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdfGrid {
    pub origin: Vector3<f64>,
    pub cell_size: f64,
    pub dims: [usize; 3],
    /// Row-major: index `(ix · ny + iy) · nz + iz`.
    pub data: Vec<f64>,
}

/// Result of a field lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfQuery {
    pub distance: f64,
    pub gradient: Vector3<f64>,
    /// The point was outside the grid and was moved onto its boundary.
    pub clamped: bool,
}

pub fn build_sdf(obstacles: &ObstacleSet, origin: Vector3<f64>, cell_size: f64, dims: [usize; 3]) -> Result<SdfGrid> {
    let spec = GridSpec { origin, cell_size, dims };
    spec.validate()?;
    obstacles.validate()?;
    let [nx, ny, nz] = dims;
    let mut data = Vec::with_capacity(nx * ny * nz);
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let p = origin + Vector3::new(ix as f64, iy as f64, iz as f64) * cell_size;
                data.push(obstacles.signed_distance(&p));
            }
        }
    }
    Ok(SdfGrid { origin, cell_size, dims, data })
}

impl SdfGrid {
    pub fn new(origin: Vector3<f64>, cell_size: f64, dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        GridSpec { origin, cell_size, dims }.validate()?;
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::Sdf(format!("expected {n} values, found {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Sdf(format!("value {i} is not finite")));
        }
        Ok(SdfGrid { origin, cell_size, dims, data })
    }

    pub fn value(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.data[(ix * self.dims[1] + iy) * self.dims[2] + iz]
    }

    /// Upper corner of the grid.
    pub fn extent(&self) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (self.dims[0] - 1) as f64,
                (self.dims[1] - 1) as f64,
                (self.dims[2] - 1) as f64,
            ) * self.cell_size
    }

    /// Trilinear interpolation and its analytic gradient.
    pub fn query(&self, p: &Vector3<f64>) -> SdfQuery {
        let mut idx = [0usize; 3];
        let mut t = [0.0f64; 3];
        let mut clamped = false;
        for a in 0..3 {
            let n = self.dims[a];
            let u = (p[a] - self.origin[a]) / self.cell_size;
            let hi = (n - 1) as f64;
            let uc = if u.is_nan() { 0.0 } else { u.clamp(0.0, hi) };
            if uc != u {
                clamped = true;
            }
            if n == 1 {
                idx[a] = 0;
                t[a] = 0.0;
            } else {
                let i0 = (uc.floor() as usize).min(n - 2);
                idx[a] = i0;
                t[a] = uc - i0 as f64;
            }
        }
        let step = |a: usize| usize::from(self.dims[a] > 1);
        let c = |dx: usize, dy: usize, dz: usize| {
            self.value(idx[0] + dx * step(0), idx[1] + dy * step(1), idx[2] + dz * step(2))
        };
        let [tx, ty, tz] = t;
        let c00 = c(0, 0, 0) * (1.0 - tx) + c(1, 0, 0) * tx;
        let c10 = c(0, 1, 0) * (1.0 - tx) + c(1, 1, 0) * tx;
        let c01 = c(0, 0, 1) * (1.0 - tx) + c(1, 0, 1) * tx;
        let c11 = c(0, 1, 1) * (1.0 - tx) + c(1, 1, 1) * tx;
        let c0 = c00 * (1.0 - ty) + c10 * ty;
        let c1 = c01 * (1.0 - ty) + c11 * ty;
        let distance = c0 * (1.0 - tz) + c1 * tz;

        let dx0 = (c(1, 0, 0) - c(0, 0, 0)) * (1.0 - ty) + (c(1, 1, 0) - c(0, 1, 0)) * ty;
        let dx1 = (c(1, 0, 1) - c(0, 0, 1)) * (1.0 - ty) + (c(1, 1, 1) - c(0, 1, 1)) * ty;
        let gx = dx0 * (1.0 - tz) + dx1 * tz;
        let gy = (c10 - c00) * (1.0 - tz) + (c11 - c01) * tz;
        let gz = c1 - c0;
        let mut gradient = Vector3::new(gx, gy, gz) / self.cell_size;
        for a in 0..3 {
            if self.dims[a] == 1 {
                gradient[a] = 0.0;
            }
        }
        SdfQuery { distance, gradient, clamped }
    }
}

/// Signed distance at `p`: `(distance, gradient)`.
pub fn query_distance(sdf: &SdfGrid, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let q = sdf.query(p);
    (q.distance, q.gradient)
}

/// `ε − d` inside the safety margin, zero outside; derivative with respect
/// to `d` is −1 below ε and 0 from ε on.
pub fn hinge_cost_sdf(d: f64, eps: f64) -> (f64, f64) {
    if d <= eps {
        (eps - d, if d < eps { -1.0 } else { 0.0 })
    } else {
        (0.0, 0.0)
    }
}

/// Per-sphere obstacle residual and its Jacobian with respect to `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleResidual {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Signed clearance of every sphere surface.
    pub clearance: DVector<f64>,
    pub clamped: bool,
}

/// World-frame centres of all collision spheres with their link index and
/// radius, root to tip.
pub fn sphere_centers(model: &RobotModel, q: &DVector<f64>) -> Result<Vec<(usize, Vector3<f64>, f64)>> {
    let fk = forward_kinematics(model, q)?;
    let mut out = Vec::with_capacity(model.sphere_count());
    for (j, link) in model.links.iter().enumerate() {
        for s in &link.spheres {
            out.push((j, fk.link_poses[j].transform_point(&s.offset), s.radius));
        }
    }
    Ok(out)
}

pub fn obstacle_residual(model: &RobotModel, sdf: &SdfGrid, q: &DVector<f64>, eps: f64) -> Result<ObstacleResidual> {
    let fk = forward_kinematics(model, q)?;
    let n = model.dof();
    // world-frame screw of each joint
    let screws: Vec<_> = model
        .joints
        .iter()
        .enumerate()
        .map(|(k, joint)| fk.link_poses[k].adjoint() * joint.screw_axis.0)
        .collect();
    let m = model.sphere_count();
    let mut residual = DVector::zeros(m);
    let mut clearance = DVector::zeros(m);
    let mut jacobian = DMatrix::zeros(m, n);
    let mut clamped = false;
    let mut row = 0;
    for (j, link) in model.links.iter().enumerate() {
        for s in &link.spheres {
            let c = fk.link_poses[j].transform_point(&s.offset);
            let qr = sdf.query(&c);
            clamped |= qr.clamped;
            let d = qr.distance - s.radius;
            let (cost, dcost) = hinge_cost_sdf(d, eps);
            residual[row] = cost;
            clearance[row] = d;
            if dcost != 0.0 {
                for (k, screw) in screws.iter().enumerate().take(j + 1) {
                    let w = Vector3::new(screw[0], screw[1], screw[2]);
                    let v = Vector3::new(screw[3], screw[4], screw[5]);
                    let dc = w.cross(&c) + v;
                    jacobian[(row, k)] = dcost * qr.gradient.dot(&dc);
                }
            }
            row += 1;
        }
    }
    if clamped {
        log::warn!("collision sphere outside the signed distance field; query clamped to the grid boundary");
    }
    Ok(ObstacleResidual { residual, jacobian, clearance, clamped })
}
