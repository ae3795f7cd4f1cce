//! Batch Levenberg-Marquardt over a nonlinear factor graph.

use super::bayes_tree::{BayesTree, PosFactor};
use super::factor::FactorGraph;
use super::linear::{graph_error_with, linearize_with, GaussianFactorGraph};
use super::ordering::{ordering_for, Ordering, OrderingPolicy};
use super::values::VariableValues;
use crate::error::GraphError;
use crate::exec::Execution;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmParams {
    pub lambda_initial: f64,
    pub lambda_factor: f64,
    pub lambda_max: f64,
    /// Stop when `(e_k − e_{k+1}) / e_k` drops below this.
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    pub ordering: OrderingPolicy,
    pub execution: Execution,
}

impl Default for LmParams {
    fn default() -> Self {
        LmParams {
            lambda_initial: 0.01,
            lambda_factor: 10.0,
            lambda_max: 1e10,
            relative_tolerance: 1e-5,
            max_iterations: 200,
            ordering: OrderingPolicy::Forward,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// Damping exceeded its ceiling without an accepted step.
    Stalled,
}

/// Summary of one solve, serialized as the stats JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Accepted steps (batch) or update rounds (incremental).
    pub iterations: usize,
    pub initial_error: f64,
    pub final_error: f64,
    /// Damping used by every trial step, rejected ones included.
    pub lambda_trace: Vec<f64>,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reeliminated_keys: Option<usize>,
    pub status: SolveStatus,
}

/// Minimizes the total whitened squared error of `graph` starting at `init`.
pub fn optimize_lm(
    graph: &FactorGraph,
    init: &VariableValues,
    params: &LmParams,
) -> Result<(VariableValues, SolveStats), GraphError> {
    let ordering = ordering_for(graph, params.ordering);
    optimize_lm_with_ordering(graph, init, &ordering, params)
}

pub fn optimize_lm_with_ordering(
    graph: &FactorGraph,
    init: &VariableValues,
    ordering: &Ordering,
    params: &LmParams,
) -> Result<(VariableValues, SolveStats), GraphError> {
    let start = Instant::now();
    let exec = params.execution;
    let mut values = init.clone();
    let mut err = graph_error_with(graph, &values, exec)?;
    let initial_error = err;
    let mut lambda = params.lambda_initial;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let dims = ordering
        .keys()
        .iter()
        .map(|k| values.at(k).map(|v| v.len()))
        .collect::<Result<Vec<_>, _>>()?;

    let status = 'outer: loop {
        if err == 0.0 {
            break SolveStatus::Converged;
        }
        if iterations >= params.max_iterations {
            break SolveStatus::MaxIterations;
        }
        let lin = linearize_with(graph, &values, exec)?;
        let base = lin
            .factors
            .iter()
            .map(|f| PosFactor::from_jacobian(f, ordering))
            .collect::<Result<Vec<_>, _>>()?;
        let lin_err0 = lin.error_at_zero();
        loop {
            trace.push(lambda);
            match damped_step(&base, &dims, ordering, lambda) {
                Ok(delta) => {
                    let predicted = lin_err0 - lin.error(&delta);
                    if predicted <= params.relative_tolerance * err {
                        break 'outer SolveStatus::Converged;
                    }
                    let candidate = values.retract(&delta);
                    let new_err = graph_error_with(graph, &candidate, exec)?;
                    if new_err.is_finite() && new_err < err {
                        let rel = (err - new_err) / err;
                        log::debug!("lm iter {iterations}: error {err:.6e} -> {new_err:.6e}, lambda {lambda:.1e}");
                        values = candidate;
                        err = new_err;
                        iterations += 1;
                        lambda = (lambda / params.lambda_factor).max(1e-300);
                        if rel < params.relative_tolerance {
                            break 'outer SolveStatus::Converged;
                        }
                        break;
                    }
                }
                Err(GraphError::Indeterminate(_)) => {}
                Err(e) => return Err(e),
            }
            lambda *= params.lambda_factor;
            if lambda > params.lambda_max {
                break 'outer SolveStatus::Stalled;
            }
        }
    };

    let stats = SolveStats {
        iterations,
        initial_error,
        final_error: err,
        lambda_trace: trace,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        reeliminated_keys: None,
        status,
    };
    Ok((values, stats))
}

fn damped_step(
    base: &[PosFactor],
    dims: &[usize],
    ordering: &Ordering,
    lambda: f64,
) -> Result<VariableValues, GraphError> {
    let mut factors = Vec::with_capacity(base.len() + dims.len());
    factors.extend(base.iter().cloned());
    if lambda > 0.0 {
        factors.extend(dims.iter().enumerate().map(|(p, &d)| PosFactor::damping(p, d, lambda)));
    }
    Ok(BayesTree::from_pos_factors(factors, ordering.clone())?.solve())
}

/// Gauss-Newton step for a graph linearized at `values` (no damping).
pub fn gauss_newton_step(
    lin: &GaussianFactorGraph,
    ordering: &Ordering,
) -> Result<VariableValues, GraphError> {
    super::bayes_tree::eliminate(lin, ordering).map(|bt| bt.solve())
}
