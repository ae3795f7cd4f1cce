//! Variable elimination orderings.

use super::factor::FactorGraph;
use super::key::VariableKey;
use crate::error::GraphError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// A permutation of variables; position `i` is eliminated `i`-th.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ordering {
    keys: Vec<VariableKey>,
    position: HashMap<VariableKey, usize>,
}

impl Ordering {
    pub fn from_keys(keys: Vec<VariableKey>) -> Result<Self, GraphError> {
        let mut position = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if position.insert(*k, i).is_some() {
                return Err(GraphError::BadOrdering(format!("duplicate key {k}")));
            }
        }
        Ok(Ordering { keys, position })
    }

    pub fn keys(&self) -> &[VariableKey] {
        &self.keys
    }

    pub fn position(&self, key: &VariableKey) -> Option<usize> {
        self.position.get(key).copied()
    }

    pub fn key(&self, pos: usize) -> VariableKey {
        self.keys[pos]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderingPolicy {
    /// First state to last state, with a fixed sub-order inside each step.
    #[default]
    Forward,
    /// Greedy minimum degree with ties broken by key order.
    MinDegree,
}

impl std::str::FromStr for OrderingPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(OrderingPolicy::Forward),
            "mindegree" | "min-degree" => Ok(OrderingPolicy::MinDegree),
            other => Err(format!("unknown ordering '{other}' (expected forward|mindegree)")),
        }
    }
}

pub fn ordering_for(graph: &FactorGraph, policy: OrderingPolicy) -> Ordering {
    match policy {
        OrderingPolicy::Forward => default_ordering(graph),
        OrderingPolicy::MinDegree => min_degree_ordering(graph),
    }
}

// Inside a step: torques and wrenches (tip to base), then link accelerations
// and twists (tip to base), then joint accelerations, velocities, angles.
fn within_step_rank(key: &VariableKey) -> (u8, i64, u8) {
    let e = key.entity as i64;
    match key.symbol {
        'T' => (0, -e, 0),
        'F' => (0, -e, 1),
        'A' => (1, -e, 0),
        'V' => (1, -e, 1),
        'a' => (2, e, 0),
        'v' => (3, e, 0),
        'q' => (4, e, 0),
        other => (5, e, other as u8),
    }
}

/// Time-major ordering of every key in `graph`.
pub fn default_ordering(graph: &FactorGraph) -> Ordering {
    forward_ordering(graph.keys())
}

pub fn forward_ordering(keys: impl IntoIterator<Item = VariableKey>) -> Ordering {
    let mut keys: Vec<VariableKey> = keys.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    keys.sort_by_key(|k| (k.time, within_step_rank(k), *k));
    Ordering::from_keys(keys).expect("keys are unique")
}

/// Minimum-degree ordering on the variable adjacency graph.
pub fn min_degree_ordering(graph: &FactorGraph) -> Ordering {
    let mut adj: BTreeMap<VariableKey, BTreeSet<VariableKey>> = BTreeMap::new();
    for (_, f) in graph.iter() {
        let keys = f.keys();
        for k in keys {
            let entry = adj.entry(*k).or_default();
            for j in keys {
                if j != k {
                    entry.insert(*j);
                }
            }
        }
    }
    let mut queue: BTreeSet<(usize, VariableKey)> = adj.iter().map(|(k, n)| (n.len(), *k)).collect();
    let mut order = Vec::with_capacity(adj.len());
    while let Some((_, k)) = queue.pop_first() {
        let nbrs = adj.remove(&k).unwrap_or_default();
        for n in &nbrs {
            let set = adj.get_mut(n).expect("neighbour present");
            queue.remove(&(set.len(), *n));
            set.remove(&k);
            for m in &nbrs {
                if m != n {
                    set.insert(*m);
                }
            }
            queue.insert((set.len(), *n));
        }
        order.push(k);
    }
    Ordering::from_keys(order).expect("keys are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NoiseModel, PriorFactor};
    use nalgebra::DVector;

    fn prior(k: VariableKey) -> PriorFactor {
        PriorFactor::new(k, DVector::zeros(1), NoiseModel::isotropic(1, 1.0).unwrap())
    }

    #[test]
    fn two_steps_of_one_key() {
        let mut g = FactorGraph::new();
        g.add(prior(VariableKey::q(0, 1)));
        g.add(prior(VariableKey::q(0, 0)));
        assert_eq!(default_ordering(&g).keys(), &[VariableKey::q(0, 0), VariableKey::q(0, 1)]);
    }

    #[test]
    fn within_step_sub_order() {
        let keys = vec![
            VariableKey::q(0, 0),
            VariableKey::v(0, 0),
            VariableKey::a(0, 0),
            VariableKey::twist(0, 0),
            VariableKey::accel(0, 0),
            VariableKey::wrench(0, 0),
            VariableKey::torque(0, 0),
            VariableKey::wrench(1, 0),
            VariableKey::torque(1, 0),
        ];
        let o = forward_ordering(keys);
        let syms: String = o.keys().iter().map(|k| format!("{}{}", k.symbol, k.entity)).collect();
        assert_eq!(syms, "T1F1T0F0A0V0a0v0q0");
    }

    #[test]
    fn min_degree_breaks_ties_by_key() {
        use crate::graph::LinearFactor;
        use nalgebra::DMatrix;
        // star: centre x1 connected to x0, x2, x3
        let mut g = FactorGraph::new();
        let c = VariableKey::new('x', 1, 0);
        for e in [0u32, 2, 3] {
            let k = VariableKey::new('x', e, 0);
            g.add(LinearFactor::new(
                vec![c, k],
                vec![DMatrix::identity(1, 1), -DMatrix::identity(1, 1)],
                DVector::zeros(1),
                NoiseModel::isotropic(1, 1.0).unwrap(),
            ));
        }
        let o = min_degree_ordering(&g);
        assert_eq!(o.key(0), VariableKey::new('x', 0, 0));
        assert_eq!(o.len(), 4);
    }
}
