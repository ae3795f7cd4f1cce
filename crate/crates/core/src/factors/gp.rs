//! Gaussian-process smoothness prior between consecutive states.

use crate::error::{Error, Result};
use crate::graph::{Factor, FactorKind, NoiseModel, VariableKey};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpOrder {
    /// State `(q, q̇, q̈)` with a constant-acceleration mean.
    #[default]
    ConstantAcceleration,
    /// State `(q, q̇)` with a constant-velocity mean.
    ConstantVelocity,
}

impl GpOrder {
    pub fn blocks(self) -> usize {
        match self {
            GpOrder::ConstantAcceleration => 3,
            GpOrder::ConstantVelocity => 2,
        }
    }
}

/// Top-left coefficient of the constant-acceleration covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpCovariance {
    /// `½ Δt⁵`.
    #[default]
    Printed,
    /// `Δt⁵ / 20`, white noise on jerk.
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpPriorSpec {
    pub qc: DMatrix<f64>,
    pub order: GpOrder,
    pub covariance: GpCovariance,
}

impl GpPriorSpec {
    pub fn new(qc: DMatrix<f64>, order: GpOrder, covariance: GpCovariance) -> Result<Self> {
        if qc.nrows() != qc.ncols() || (&qc - qc.transpose()).amax() > 1e-12 || qc.clone().cholesky().is_none() {
            return Err(Error::Config("Q_C must be symmetric positive definite".into()));
        }
        Ok(GpPriorSpec { qc, order, covariance })
    }

    pub fn identity(d: usize) -> Self {
        GpPriorSpec { qc: DMatrix::identity(d, d), order: GpOrder::default(), covariance: GpCovariance::default() }
    }

    pub fn dim(&self) -> usize {
        self.qc.nrows()
    }
}

fn scalar_transition(dt: f64, order: GpOrder) -> DMatrix<f64> {
    match order {
        GpOrder::ConstantAcceleration => {
            DMatrix::from_row_slice(3, 3, &[1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt, 0.0, 0.0, 1.0])
        }
        GpOrder::ConstantVelocity => DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]),
    }
}

fn scalar_covariance(dt: f64, order: GpOrder, cov: GpCovariance) -> DMatrix<f64> {
    let (t1, t2, t3, t4, t5) = (dt, dt.powi(2), dt.powi(3), dt.powi(4), dt.powi(5));
    match order {
        GpOrder::ConstantAcceleration => {
            let top = match cov {
                GpCovariance::Printed => 0.5 * t5,
                GpCovariance::Standard => t5 / 20.0,
            };
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    top, t4 / 8.0, t3 / 6.0,
                    t4 / 8.0, t3 / 3.0, t2 / 2.0,
                    t3 / 6.0, t2 / 2.0, t1,
                ],
            )
        }
        GpOrder::ConstantVelocity => DMatrix::from_row_slice(2, 2, &[t3 / 3.0, t2 / 2.0, t2 / 2.0, t1]),
    }
}

/// `Φ(Δt) ⊗ I_d`, acting on states stacked as `(q; q̇; q̈)` blocks of `d`.
pub fn gp_transition(dt: f64, d: usize, order: GpOrder) -> DMatrix<f64> {
    scalar_transition(dt, order).kronecker(&DMatrix::identity(d, d))
}

/// `Σ₅(Δt) = C(Δt) ⊗ Q_C`.
pub fn gp_covariance(dt: f64, spec: &GpPriorSpec) -> DMatrix<f64> {
    scalar_covariance(dt, spec.order, spec.covariance).kronecker(&spec.qc)
}

/// Residual `x_i − Φ x_{i−1}` over the per-joint scalar keys of two
/// consecutive states.
#[derive(Debug, Clone)]
pub struct GpPriorFactor {
    keys: Vec<VariableKey>,
    phi: DMatrix<f64>,
    noise: NoiseModel,
}

impl GpPriorFactor {
    /// `prev` and `next` list the state keys in block order (all q, all
    /// q̇, then all q̈ for constant acceleration).
    pub fn new(prev: Vec<VariableKey>, next: Vec<VariableKey>, dt: f64, spec: &GpPriorSpec) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("GP interval must be positive, got {dt}")));
        }
        let n = spec.order.blocks() * spec.dim();
        if prev.len() != n || next.len() != n {
            return Err(Error::Config(format!("GP prior expects {n} keys per state")));
        }
        let noise = NoiseModel::covariance(&gp_covariance(dt, spec))?;
        let mut keys = prev;
        keys.extend(next);
        Ok(GpPriorFactor { keys, phi: gp_transition(dt, spec.dim(), spec.order), noise })
    }
}

impl Factor for GpPriorFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }

    fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn kind(&self) -> FactorKind {
        FactorKind::Smoothness
    }

    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let n = self.phi.nrows();
        let prev = DVector::from_iterator(n, x[..n].iter().map(|v| v[0]));
        let next = DVector::from_iterator(n, x[n..].iter().map(|v| v[0]));
        if let Some(j) = jacobians {
            for c in 0..n {
                j[c].copy_from(&(-self.phi.column(c)));
                j[n + c].fill(0.0);
                j[n + c][(c, 0)] = 1.0;
            }
        }
        next - &self.phi * prev
    }
}
