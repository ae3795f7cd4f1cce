//! Hinge penalties that keep joint angles, velocities, accelerations and
//! torques inside their limits.

use crate::error::{Error, Result};
use crate::graph::{Factor, FactorKind, NoiseModel, VariableKey};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Hinge slope `a` and safety margin as a fraction of the corridor width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HingeParams {
    pub slope: f64,
    pub margin_fraction: f64,
}

impl Default for HingeParams {
    fn default() -> Self {
        HingeParams { slope: 10.0, margin_fraction: 0.05 }
    }
}

/// Three-branch hinge and its derivative.
///
/// `a(z_l − z + ε)` when `z − z_l ≤ ε`, `a(z − z_u + ε)` when `z_u − z ≤ ε`,
/// and zero inside the corridor.
pub fn limit_hinge(z: f64, z_l: f64, z_u: f64, eps: f64, a: f64) -> (f64, f64) {
    if z - z_l <= eps {
        (a * (z_l - z + eps), -a)
    } else if z_u - z <= eps {
        (a * (z - z_u + eps), a)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct LimitFactor {
    keys: [VariableKey; 1],
    lower: f64,
    upper: f64,
    eps: f64,
    slope: f64,
    noise: NoiseModel,
}

impl LimitFactor {
    pub fn new(key: VariableKey, lower: f64, upper: f64, eps: f64, slope: f64, noise: NoiseModel) -> Result<Self> {
        if !(lower + eps < upper - eps) || !eps.is_finite() || eps < 0.0 {
            return Err(Error::Config(format!(
                "limit corridor for {key} is degenerate: [{lower}, {upper}] with margin {eps}"
            )));
        }
        Ok(LimitFactor { keys: [key], lower, upper, eps, slope, noise })
    }

    /// Symmetric limit `[-bound, bound]` or an explicit corridor with the
    /// margin taken from `params`.
    pub fn corridor(key: VariableKey, lower: f64, upper: f64, params: HingeParams, noise: NoiseModel) -> Result<Self> {
        let eps = params.margin_fraction * (upper - lower);
        Self::new(key, lower, upper, eps, params.slope, noise)
    }
}

impl Factor for LimitFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        FactorKind::Limit
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let (h, dh) = limit_hinge(x[0][0], self.lower, self.upper, self.eps, self.slope);
        if let Some(j) = jacobians {
            j[0][(0, 0)] = dh;
        }
        DVector::from_element(1, h)
    }
}
