//! Incremental re-elimination of a Bayes tree after factor changes and
//! relinearization, in the style of iSAM2.

use super::bayes_tree::{eliminate_positions, BayesTree, PosFactor};
use super::factor::{Factor, FactorGraph, FactorId};
use super::key::VariableKey;
use super::linear::linearize_factor;
use super::ordering::Ordering;
use super::values::VariableValues;
use crate::error::GraphError;
use crate::exec::{self, Execution};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IncrementalParams {
    /// A key is relinearized once any component of its delta exceeds this.
    pub relinearize_threshold: f64,
    pub execution: Execution,
}

impl Default for IncrementalParams {
    fn default() -> Self {
        IncrementalParams { relinearize_threshold: 0.01, execution: Execution::default() }
    }
}

/// Factors to remove from and add to the session graph.
#[derive(Debug, Clone, Default)]
pub struct FactorChange {
    pub removed: Vec<FactorId>,
    pub added: Vec<Arc<dyn Factor>>,
}

impl FactorChange {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

/// What one incremental update touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffectedReport {
    pub reeliminated_keys: usize,
    pub reeliminated_cliques: usize,
    pub relinearized_keys: usize,
    pub total_keys: usize,
    pub total_cliques: usize,
}

/// Solver session: nonlinear graph, linearization point, cached linear
/// factors and the Bayes tree built from them.
#[derive(Debug, Clone)]
pub struct IncrementalSolver {
    graph: FactorGraph,
    theta: VariableValues,
    ordering: Ordering,
    lin: Vec<Option<PosFactor>>,
    factors_of: Vec<BTreeSet<FactorId>>,
    tree: BayesTree,
    delta: Vec<DVector<f64>>,
    params: IncrementalParams,
    last_reeliminated: Vec<usize>,
}

impl IncrementalSolver {
    /// Linearizes `graph` at `theta` and eliminates it in batch.
    pub fn new(
        graph: FactorGraph,
        theta: VariableValues,
        ordering: Ordering,
        params: IncrementalParams,
    ) -> Result<Self, GraphError> {
        let keys = graph.keys();
        if keys.len() != ordering.len() || keys.iter().any(|k| ordering.position(k).is_none()) {
            return Err(GraphError::BadOrdering("ordering does not match graph keys".into()));
        }
        let n = ordering.len();
        let mut s = IncrementalSolver {
            lin: Vec::new(),
            factors_of: vec![BTreeSet::new(); n],
            tree: BayesTree::from_pos_factors(Vec::new(), Ordering::from_keys(Vec::new())?)?,
            delta: Vec::new(),
            graph,
            theta,
            ordering,
            params,
            last_reeliminated: Vec::new(),
        };
        let ids: Vec<FactorId> = s.graph.iter().map(|(id, _)| id).collect();
        for &id in &ids {
            s.index_factor(id);
        }
        s.relinearize_factors(&ids)?;
        let factors = s.lin.iter().flatten().cloned().collect();
        s.tree = BayesTree::from_pos_factors(factors, s.ordering.clone())?;
        s.delta = s.tree.solve_positions();
        Ok(s)
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn tree(&self) -> &BayesTree {
        &self.tree
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn params(&self) -> &IncrementalParams {
        &self.params
    }

    pub fn linearization_point(&self) -> &VariableValues {
        &self.theta
    }

    /// Current solution of the linear system, keyed.
    pub fn delta(&self) -> VariableValues {
        self.delta
            .iter()
            .enumerate()
            .map(|(p, d)| (self.ordering.key(p), d.clone()))
            .collect()
    }

    /// Linearization point plus delta.
    pub fn estimate(&self) -> VariableValues {
        self.theta.retract(&self.delta())
    }

    /// Keys whose delta has a component above the relinearization threshold.
    pub fn relinearization_candidates(&self) -> BTreeSet<VariableKey> {
        self.keys_with_delta_above(self.params.relinearize_threshold)
    }

    /// Keys whose delta has a component larger than `threshold`.
    pub fn keys_with_delta_above(&self, threshold: f64) -> BTreeSet<VariableKey> {
        self.delta
            .iter()
            .enumerate()
            .filter(|(_, d)| d.amax() > threshold)
            .map(|(p, _)| self.ordering.key(p))
            .collect()
    }

    /// Keys re-eliminated by the most recent update.
    pub fn last_reeliminated_keys(&self) -> Vec<VariableKey> {
        self.last_reeliminated.iter().map(|&p| self.ordering.key(p)).collect()
    }

    /// Swaps factor `id` for `factor` without touching the Bayes tree, but
    /// only if both linearize identically at the current linearization
    /// point. Returns whether the swap happened.
    pub fn replace_if_linearization_unchanged(&mut self, id: FactorId, factor: Arc<dyn Factor>) -> Result<bool, GraphError> {
        let old = self.graph.get(id).ok_or(GraphError::UnknownFactor(id))?;
        if old.keys() != factor.keys() {
            return Ok(false);
        }
        let lin = PosFactor::from_jacobian(&linearize_factor(factor.as_ref(), &self.theta)?, &self.ordering)?;
        let cached = self.lin[id].as_ref().expect("live factor is linearized");
        if lin.a != cached.a || lin.b != cached.b {
            return Ok(false);
        }
        self.graph.replace(id, factor)?;
        Ok(true)
    }

    /// Delta from a fresh batch elimination of the cached linear factors,
    /// with the session ordering.
    pub fn batch_delta(&self) -> Result<VariableValues, GraphError> {
        let factors = self.lin.iter().flatten().cloned().collect();
        Ok(BayesTree::from_pos_factors(factors, self.ordering.clone())?.solve())
    }

    fn index_factor(&mut self, id: FactorId) {
        if self.lin.len() <= id {
            self.lin.resize(id + 1, None);
        }
        let f = self.graph.get(id).expect("live factor");
        for k in f.keys() {
            let p = self.ordering.position(k).expect("key in ordering");
            self.factors_of[p].insert(id);
        }
    }

    fn relinearize_factors(&mut self, ids: &[FactorId]) -> Result<(), GraphError> {
        let graph = &self.graph;
        let theta = &self.theta;
        let ordering = &self.ordering;
        let out = exec::map_indexed(ids, self.params.execution, |_, &id| {
            let f = graph.get(id).expect("live factor");
            linearize_factor(f.as_ref(), theta).and_then(|jf| PosFactor::from_jacobian(&jf, ordering))
        });
        for (&id, r) in ids.iter().zip(out) {
            self.lin[id] = Some(r?);
        }
        Ok(())
    }

    /// Applies `change`, relinearizes `relin_keys` (moving their
    /// linearization point by the current delta), re-eliminates the affected
    /// top of the tree and back-substitutes. Returns the ids assigned to the
    /// added factors.
    pub fn update(
        &mut self,
        change: &FactorChange,
        relin_keys: &BTreeSet<VariableKey>,
    ) -> Result<(Vec<FactorId>, AffectedReport), GraphError> {
        for f in &change.added {
            for k in f.keys() {
                if self.ordering.position(k).is_none() {
                    return Err(GraphError::UnknownVariable(*k));
                }
            }
        }
        for &id in &change.removed {
            if self.graph.get(id).is_none() {
                return Err(GraphError::UnknownFactor(id));
            }
        }
        let mut relin_pos = BTreeSet::new();
        for k in relin_keys {
            relin_pos.insert(self.ordering.position(k).ok_or(GraphError::UnknownVariable(*k))?);
        }

        let mut affected: BTreeSet<usize> = BTreeSet::new();
        for &id in &change.removed {
            let f = self.graph.remove(id).expect("checked above");
            for k in f.keys() {
                let p = self.ordering.position(k).expect("indexed key");
                self.factors_of[p].remove(&id);
                affected.insert(p);
            }
            self.lin[id] = None;
        }
        let mut new_ids = Vec::with_capacity(change.added.len());
        for f in &change.added {
            let id = self.graph.add_shared(f.clone());
            self.index_factor(id);
            for k in f.keys() {
                affected.insert(self.ordering.position(k).expect("checked above"));
            }
            new_ids.push(id);
        }

        for &p in &relin_pos {
            let k = self.ordering.key(p);
            let v = self.theta.get_mut(&k).ok_or(GraphError::UnknownVariable(k))?;
            *v += &self.delta[p];
        }
        let mut relin_factors: BTreeSet<FactorId> = new_ids.iter().copied().collect();
        for &p in &relin_pos {
            relin_factors.extend(self.factors_of[p].iter().copied());
        }
        let relin_factors: Vec<FactorId> = relin_factors.into_iter().collect();
        for &id in &relin_factors {
            for k in self.graph.get(id).expect("live factor").keys() {
                affected.insert(self.ordering.position(k).expect("indexed key"));
            }
        }
        self.relinearize_factors(&relin_factors)?;

        let mut report = AffectedReport { relinearized_keys: relin_pos.len(), ..AffectedReport::default() };
        self.last_reeliminated.clear();
        if !affected.is_empty() {
            let (removed_keys, _, orphans) = self.tree.remove_top(&affected);
            let removed_set: BTreeSet<usize> = removed_keys.iter().copied().collect();
            let mut ids: BTreeSet<FactorId> = BTreeSet::new();
            for &p in &removed_keys {
                for &id in &self.factors_of[p] {
                    let first = self.lin[id].as_ref().expect("linearized").vars[0];
                    if removed_set.contains(&first) {
                        ids.insert(id);
                    }
                }
            }
            let mut factors: Vec<PosFactor> = ids.iter().map(|&id| self.lin[id].clone().unwrap()).collect();
            for &o in &orphans {
                if let Some(c) = self.tree.cached_factor(o) {
                    factors.push(c.clone());
                }
            }
            let elim = eliminate_positions(factors, &self.ordering)?;
            if elim.len() != removed_keys.len() {
                let done: BTreeSet<usize> = elim.iter().map(|e| e.cond.frontal).collect();
                let missing = removed_keys.iter().find(|p| !done.contains(p)).expect("missing key");
                return Err(GraphError::Indeterminate(self.ordering.key(*missing)));
            }
            let before = self.tree.clique_count();
            self.tree.attach(elim, &orphans);
            report.reeliminated_keys = removed_keys.len();
            self.last_reeliminated = removed_keys;
            report.reeliminated_cliques = self.tree.clique_count() - before;
        }
        self.delta = self.tree.solve_positions();
        report.total_keys = self.ordering.len();
        report.total_cliques = self.tree.clique_count();
        Ok((new_ids, report))
    }
}

/// Functional form of [`IncrementalSolver::update`].
pub fn incremental_update(
    session: &mut IncrementalSolver,
    change: &FactorChange,
    relin_keys: &BTreeSet<VariableKey>,
) -> Result<AffectedReport, GraphError> {
    session.update(change, relin_keys).map(|(_, r)| r)
}
