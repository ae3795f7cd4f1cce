//! Incremental replanning on a retained Bayes tree.

use super::build::{build_graph, goal_factors, obstacle_factors, PlanningGraph};
use super::problem::{Goal, PlanningProblem};
use super::solve::{assess, plan_from, PlanOutcome};
use super::init::initialize_trajectory;
use crate::error::{Error, Result};
use crate::graph::{
    ordering_for, Factor, FactorChange, FactorId, IncrementalParams, IncrementalSolver, SolveStats, SolveStatus, VariableKey,
};
use crate::sdf::Scene;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

/// What changed since the last solve.
#[derive(Debug, Clone)]
pub enum ReplanChange {
    Goal(Goal),
    /// Replacement obstacle scene; `None` removes every obstacle.
    Scene(Option<Scene>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplanParams {
    pub incremental: IncrementalParams,
    /// Cap on relinearization rounds after the structural update.
    pub max_rounds: usize,
    /// Relinearization rounds take every key whose delta exceeds the
    /// smaller of this and the incremental relinearization threshold. Keys
    /// left below 0.01 keep stale Jacobians that move the answer off the
    /// batch optimum, so the default is much finer. Setting it at or above
    /// the relinearization threshold gives plain thresholded relinearization.
    pub converge_threshold: f64,
}

impl Default for ReplanParams {
    fn default() -> Self {
        ReplanParams { incremental: IncrementalParams::default(), max_rounds: 30, converge_threshold: 1e-5 }
    }
}

/// Bookkeeping of one replan call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplanReport {
    /// Factors removed and re-added because their linearization changed.
    pub changed_factors: usize,
    /// Factors swapped in place with an unchanged linearization.
    pub swapped_factors: usize,
    pub rounds: usize,
    /// Distinct keys re-eliminated over all rounds.
    pub reeliminated_keys: usize,
    pub total_keys: usize,
    pub relinearized_keys: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplanOutcome {
    #[serde(flatten)]
    pub plan: PlanOutcome,
    pub replan: ReplanReport,
}

/// A solved problem that accepts goal and obstacle changes.
#[derive(Debug, Clone)]
pub struct ReplanSession {
    problem: PlanningProblem,
    pg: PlanningGraph,
    solver: IncrementalSolver,
    solution: PlanOutcome,
    params: ReplanParams,
}

pub fn open_session(problem: PlanningProblem) -> Result<ReplanSession> {
    open_session_with(problem, ReplanParams::default())
}

pub fn open_session_with(problem: PlanningProblem, params: ReplanParams) -> Result<ReplanSession> {
    let pg = build_graph(&problem)?;
    let solution = plan_from(&problem, &pg, &initialize_trajectory(&problem))?;
    let ordering = ordering_for(&pg.graph, problem.solver.ordering);
    let solver = IncrementalSolver::new(pg.graph.clone(), solution.values.clone(), ordering, params.incremental)?;
    Ok(ReplanSession { problem, pg, solver, solution, params })
}

impl ReplanSession {
    pub fn problem(&self) -> &PlanningProblem {
        &self.problem
    }

    /// Last accepted solution.
    pub fn solution(&self) -> &PlanOutcome {
        &self.solution
    }

    pub fn solver(&self) -> &IncrementalSolver {
        &self.solver
    }

    pub fn clique_count(&self) -> usize {
        self.solver.tree().clique_count()
    }

    /// Removes `old`, adds `new`, swapping in place where the pairing keeps
    /// the linearization unchanged. Returns the pending change, the number
    /// of swaps and the slots of `new` that still need ids.
    fn stage(&mut self, old: &[FactorId], new: Vec<Arc<dyn Factor>>) -> Result<(FactorChange, usize, Vec<Option<FactorId>>)> {
        let mut change = FactorChange::default();
        let mut ids = vec![None; new.len()];
        let mut swapped = 0;
        if old.len() == new.len() {
            for (k, (&id, f)) in old.iter().zip(new).enumerate() {
                if self.solver.replace_if_linearization_unchanged(id, f.clone())? {
                    ids[k] = Some(id);
                    swapped += 1;
                } else {
                    change.removed.push(id);
                    change.added.push(f);
                }
            }
        } else {
            change.removed.extend_from_slice(old);
            change.added = new;
        }
        Ok((change, swapped, ids))
    }

    pub fn replan(&mut self, change: ReplanChange) -> Result<ReplanOutcome> {
        let mut problem = self.problem.clone();
        let start = Instant::now();
        let (pending, swapped, kind) = match change {
            ReplanChange::Goal(goal) => {
                problem.goal = goal;
                problem.validate()?;
                let new = goal_factors(&problem, &problem.goal)?;
                let old = self.pg.goal_factors.clone();
                let (c, s, ids) = self.stage(&old, new)?;
                (c, s, (true, ids))
            }
            ReplanChange::Scene(scene) => {
                problem.set_scene(scene)?;
                let new: Vec<Arc<dyn Factor>> = match (&problem.sdf, problem.uses_obstacles()) {
                    (Some(sdf), true) => obstacle_factors(&problem, sdf)?.into_iter().map(|(_, f)| Arc::new(f) as Arc<dyn Factor>).collect(),
                    _ => Vec::new(),
                };
                let old: Vec<FactorId> = self.pg.obstacle_factors.iter().map(|&(id, _)| id).collect();
                let (c, s, ids) = self.stage(&old, new)?;
                (c, s, (false, ids))
            }
        };
        let initial_error = self.solver.graph().error(&self.solution.values)?;

        let mut touched: BTreeSet<VariableKey> = BTreeSet::new();
        let mut relinearized = 0;
        let changed = pending.added.len();
        let mut rounds = 0;
        if !pending.is_empty() {
            let (new_ids, rep) = self.solver.update(&pending, &BTreeSet::new())?;
            touched.extend(self.solver.last_reeliminated_keys());
            rounds += 1;
            // hand out the fresh ids in slot order
            let (is_goal, mut slots) = kind;
            let mut fresh = new_ids.into_iter();
            for s in slots.iter_mut().filter(|s| s.is_none()) {
                *s = fresh.next();
            }
            let slots: Vec<FactorId> = slots.into_iter().map(|s| s.expect("every slot assigned")).collect();
            if is_goal {
                self.pg.goal_factors = slots;
            } else {
                let steps = (0..=problem.steps).flat_map(|i| std::iter::repeat_n(i, problem.model.sphere_count()));
                self.pg.obstacle_factors = if slots.is_empty() { Vec::new() } else { slots.into_iter().zip(steps).collect() };
            }
            log::debug!("replan structural update re-eliminated {} of {} keys", rep.reeliminated_keys, rep.total_keys);
        } else {
            let (is_goal, slots) = kind;
            let slots: Vec<FactorId> = slots.into_iter().flatten().collect();
            if !is_goal {
                let steps = (0..=problem.steps).flat_map(|i| std::iter::repeat_n(i, problem.model.sphere_count()));
                self.pg.obstacle_factors = slots.into_iter().zip(steps).collect();
            }
        }

        let mut status = SolveStatus::Converged;
        if rounds > 0 {
            let fine = self.params.converge_threshold.min(self.params.incremental.relinearize_threshold);
            loop {
                let candidates = self.solver.keys_with_delta_above(fine);
                if candidates.is_empty() {
                    break;
                }
                if rounds > self.params.max_rounds {
                    status = SolveStatus::MaxIterations;
                    break;
                }
                relinearized += candidates.len();
                self.solver.update(&FactorChange::default(), &candidates)?;
                touched.extend(self.solver.last_reeliminated_keys());
                rounds += 1;
            }
        }
        let values = if rounds > 0 { self.solver.estimate() } else { self.solution.values.clone() };
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let final_error = self.solver.graph().error(&values)?;
        let stats = SolveStats {
            iterations: rounds,
            initial_error,
            final_error,
            lambda_trace: Vec::new(),
            wall_time_ms,
            reeliminated_keys: Some(touched.len()),
            status,
        };
        self.pg.counts.factors = self.solver.graph().len();
        let outcome = assess(&problem, self.solver.graph(), &self.pg.counts, values, stats)?;
        if !outcome.values.iter().all(|(_, v)| v.iter().all(|x| x.is_finite())) {
            return Err(Error::Config("replanning diverged to non-finite values".into()));
        }
        let report = ReplanReport {
            changed_factors: changed,
            swapped_factors: swapped,
            rounds,
            reeliminated_keys: touched.len(),
            total_keys: self.solver.ordering().len(),
            relinearized_keys: relinearized,
        };
        log::info!(
            "replan: {} rounds, {} of {} keys re-eliminated, {:.1} ms, success {}",
            rounds,
            report.reeliminated_keys,
            report.total_keys,
            wall_time_ms,
            outcome.success
        );
        self.problem = problem;
        self.solution = outcome.clone();
        Ok(ReplanOutcome { plan: outcome, replan: report })
    }
}
