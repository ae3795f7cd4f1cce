use crate::error::GraphError;
use nalgebra::{DMatrix, DVector};

/// Gaussian noise on a factor residual.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Independent components with the given standard deviations.
    Diagonal { sigmas: DVector<f64> },
    /// Full covariance, stored as the square-root information matrix `L⁻¹`
    /// where `Σ = L Lᵀ`.
    Gaussian { sqrt_information: DMatrix<f64> },
}

impl NoiseModel {
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self, GraphError> {
        Self::diagonal(DVector::from_element(dim, sigma))
    }

    pub fn diagonal(sigmas: DVector<f64>) -> Result<Self, GraphError> {
        if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(GraphError::InvalidNoise(format!(
                "sigmas must be positive and finite, got {:?}",
                sigmas.as_slice()
            )));
        }
        Ok(NoiseModel::Diagonal { sigmas })
    }

    pub fn covariance(sigma: &DMatrix<f64>) -> Result<Self, GraphError> {
        if !sigma.is_square() || (sigma - sigma.transpose()).amax() > 1e-9 * sigma.amax().max(1.0) {
            return Err(GraphError::InvalidNoise("covariance must be square and symmetric".into()));
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| GraphError::InvalidNoise("covariance is not positive definite".into()))?;
        let l = chol.l();
        let n = l.nrows();
        let inv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| GraphError::InvalidNoise("singular covariance factor".into()))?;
        Ok(NoiseModel::Gaussian { sqrt_information: inv })
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::Diagonal { sigmas } => sigmas.len(),
            NoiseModel::Gaussian { sqrt_information } => sqrt_information.nrows(),
        }
    }

    pub fn whiten(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            NoiseModel::Diagonal { sigmas } => r.component_div(sigmas),
            NoiseModel::Gaussian { sqrt_information } => sqrt_information * r,
        }
    }

    pub fn whiten_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            NoiseModel::Diagonal { sigmas } => {
                let mut out = a.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row /= sigmas[i];
                }
                out
            }
            NoiseModel::Gaussian { sqrt_information } => sqrt_information * a,
        }
    }

    /// Squared Mahalanobis norm of a residual.
    pub fn squared_norm(&self, r: &DVector<f64>) -> f64 {
        self.whiten(r).norm_squared()
    }
}
