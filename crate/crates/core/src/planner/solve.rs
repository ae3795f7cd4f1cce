//! Batch solve and success assessment.

use super::build::{build_graph, GraphCounts, PlanningGraph};
use super::init::initialize_trajectory;
use super::problem::PlanningProblem;
use super::trajectory::Trajectory;
use super::validate::{validate_trajectory, ValidationReport};
use crate::error::Result;
use crate::error::GraphError;
use crate::graph::{optimize_lm, FactorGraph, SolveStats, VariableValues};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct PlanOutcome {
    pub trajectory: Trajectory,
    #[serde(skip)]
    pub values: VariableValues,
    pub stats: SolveStats,
    pub success: bool,
    /// Largest raw residual entry over start/goal priors and dynamics factors.
    pub max_equality_residual: f64,
    pub report: ValidationReport,
    pub counts: GraphCounts,
}

/// Largest absolute unwhitened residual entry among equality factors.
pub fn max_equality_residual(graph: &FactorGraph, values: &VariableValues) -> Result<f64, GraphError> {
    let mut m: f64 = 0.0;
    for (_, f) in graph.iter() {
        if f.kind().is_equality() {
            m = m.max(f.unwhitened_error(values)?.amax());
        }
    }
    Ok(m)
}

/// Builds the outcome for `values` and applies the success rule: equality
/// residuals below `tol_eq` and a passing validation report.
pub fn assess(
    problem: &PlanningProblem,
    graph: &FactorGraph,
    counts: &GraphCounts,
    values: VariableValues,
    stats: SolveStats,
) -> Result<PlanOutcome> {
    let trajectory = Trajectory::from_values(&values, &problem.times(), problem.dof())?;
    let max_eq = max_equality_residual(graph, &values)?;
    let sdf = if problem.uses_obstacles() { problem.sdf.as_deref() } else { None };
    let report = validate_trajectory(&trajectory, &problem.model, sdf, Some(&problem.goal), &problem.tolerances)?;
    let success = max_eq < problem.tolerances.tol_eq && report.passed;
    Ok(PlanOutcome { trajectory, values, stats, success, max_equality_residual: max_eq, report, counts: counts.clone() })
}

/// LM from `init` over an already built graph.
pub fn plan_from(problem: &PlanningProblem, pg: &PlanningGraph, init: &VariableValues) -> Result<PlanOutcome> {
    let (values, stats) = optimize_lm(&pg.graph, init, &problem.solver)?;
    log::info!(
        "batch solve: {} iterations, error {:.4e} -> {:.4e}, {:?}, {:.1} ms",
        stats.iterations,
        stats.initial_error,
        stats.final_error,
        stats.status,
        stats.wall_time_ms
    );
    assess(problem, &pg.graph, &pg.counts, values, stats)
}

pub fn plan_batch(problem: &PlanningProblem) -> Result<PlanOutcome> {
    let pg = build_graph(problem)?;
    plan_from(problem, &pg, &initialize_trajectory(problem))
}
