use super::factor::{gather, Factor, FactorGraph, FactorId};
use super::key::VariableKey;
use super::values::VariableValues;
use crate::error::GraphError;
use crate::exec::{self, Execution};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Whitened linearization `‖A δ − b‖²` of one factor.
///
/// `A` stacks one column block per key in `keys` order.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianFactor {
    pub keys: Vec<VariableKey>,
    pub dims: Vec<usize>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl JacobianFactor {
    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let off: usize = self.dims[..i].iter().sum();
        self.a.columns(off, self.dims[i]).into_owned()
    }

    /// `‖A δ − b‖²`; keys missing from `delta` count as zero.
    pub fn error(&self, delta: &VariableValues) -> f64 {
        let mut r = -self.b.clone();
        let mut off = 0;
        for (k, &d) in self.keys.iter().zip(&self.dims) {
            if let Some(x) = delta.get(k) {
                r += self.a.columns(off, d) * x;
            }
            off += d;
        }
        r.norm_squared()
    }
}

/// A linearized factor graph.
#[derive(Debug, Clone, Default)]
pub struct GaussianFactorGraph {
    pub factors: Vec<JacobianFactor>,
}

impl GaussianFactorGraph {
    pub fn error(&self, delta: &VariableValues) -> f64 {
        self.factors.iter().map(|f| f.error(delta)).sum()
    }

    /// Error at `δ = 0`, i.e. `Σ ‖b‖²`.
    pub fn error_at_zero(&self) -> f64 {
        self.factors.iter().map(|f| f.b.norm_squared()).sum()
    }
}

/// Linearizes one factor at `values`.
pub fn linearize_factor(factor: &dyn Factor, values: &VariableValues) -> Result<JacobianFactor, GraphError> {
    let x = gather(factor.keys(), values)?;
    let rdim = factor.residual_dim();
    let dims: Vec<usize> = x.iter().map(|v| v.len()).collect();
    let mut blocks: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(rdim, d)).collect();
    let r = factor.evaluate(&x, Some(&mut blocks));
    let noise = factor.noise();
    let total: usize = dims.iter().sum();
    let mut a = DMatrix::zeros(rdim, total);
    let mut off = 0;
    for (blk, &d) in blocks.iter().zip(&dims) {
        a.columns_mut(off, d).copy_from(blk);
        off += d;
    }
    Ok(JacobianFactor {
        keys: factor.keys().to_vec(),
        dims,
        a: noise.whiten_matrix(&a),
        b: -noise.whiten(&r),
    })
}

/// Linearizes every factor of `graph` at `values`.
pub fn linearize(graph: &FactorGraph, values: &VariableValues) -> Result<GaussianFactorGraph, GraphError> {
    linearize_with(graph, values, Execution::default())
}

pub fn linearize_with(
    graph: &FactorGraph,
    values: &VariableValues,
    exec: Execution,
) -> Result<GaussianFactorGraph, GraphError> {
    let live: Vec<(FactorId, &Arc<dyn Factor>)> = graph.iter().collect();
    let lin = exec::map_indexed(&live, exec, |_, (_, f)| linearize_factor(f.as_ref(), values));
    let factors = lin.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(GaussianFactorGraph { factors })
}

/// Total error evaluated factor by factor, optionally in parallel.
pub fn graph_error_with(graph: &FactorGraph, values: &VariableValues, exec: Execution) -> Result<f64, GraphError> {
    let live: Vec<&Arc<dyn Factor>> = graph.iter().map(|(_, f)| f).collect();
    let errs = exec::map_indexed(&live, exec, |_, f| f.error(values));
    let mut sum = 0.0;
    for e in errs {
        sum += e?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NoiseModel, PriorFactor};

    fn key() -> VariableKey {
        VariableKey::new('x', 0, 0)
    }

    fn prior(sigma: f64) -> FactorGraph {
        let mut g = FactorGraph::new();
        g.add(PriorFactor::new(
            key(),
            DVector::from_element(1, 5.0),
            NoiseModel::isotropic(1, sigma).unwrap(),
        ));
        g
    }

    fn at(x: f64) -> VariableValues {
        let mut v = VariableValues::new();
        v.insert_scalar(key(), x);
        v
    }

    #[test]
    fn prior_at_optimum_has_zero_rhs() {
        let lin = linearize(&prior(1.0), &at(5.0)).unwrap();
        assert_eq!(lin.factors[0].a, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(lin.factors[0].b, DVector::from_element(1, 0.0));
    }

    #[test]
    fn prior_away_from_optimum() {
        let lin = linearize(&prior(1.0), &at(7.0)).unwrap();
        assert_eq!(lin.factors[0].b, DVector::from_element(1, -2.0));
    }

    #[test]
    fn smaller_sigma_scales_whitened_jacobian() {
        let a1 = linearize(&prior(1.0), &at(7.0)).unwrap().factors[0].a[(0, 0)];
        let a2 = linearize(&prior(0.5), &at(7.0)).unwrap().factors[0].a[(0, 0)];
        assert_eq!(a2, 2.0 * a1);
    }

    #[test]
    fn quadratic_error_at_zero_matches_nonlinear_error() {
        let g = prior(0.3);
        let v = at(6.1);
        let lin = linearize(&g, &v).unwrap();
        assert!((lin.error_at_zero() - g.error(&v).unwrap()).abs() < 1e-12);
        assert!((lin.error(&VariableValues::new()) - g.error(&v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn missing_key_is_reported() {
        let err = linearize(&prior(1.0), &VariableValues::new()).unwrap_err();
        assert!(matches!(err, GraphError::UnknownVariable(k) if k == key()));
    }
}
