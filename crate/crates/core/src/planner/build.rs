//! Assembly of the planning factor graph.

use super::problem::{Goal, GoalMode, PlanningProblem};
use crate::error::Result;
use crate::factors::{
    unactuated_torque_prior, AccelFactor, EndEffectorPoseFactor, GpPriorFactor, JointStateFactor, LimitFactor,
    MinTorqueFactor, ObstacleFactor, TorqueFactor, TwistFactor, WrenchFactor,
};
use crate::graph::{Factor, FactorGraph, FactorId, FactorKind, NoiseModel, VariableKey};
use crate::sdf::SdfGrid;
use nalgebra::DVector;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Variable and factor counts of a built graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphCounts {
    pub variables: usize,
    pub factors: usize,
    pub variables_per_step: usize,
    pub factors_by_kind: BTreeMap<String, usize>,
}

/// The factor graph plus the ids of factors that replanning swaps.
#[derive(Debug, Clone)]
pub struct PlanningGraph {
    pub graph: FactorGraph,
    pub counts: GraphCounts,
    pub goal_factors: Vec<FactorId>,
    /// `(id, step)` of every obstacle factor.
    pub obstacle_factors: Vec<(FactorId, usize)>,
}

/// `q`, `q̇` and `q̈` keys of one step in GP block order.
pub fn state_keys(dof: usize, step: usize) -> Vec<VariableKey> {
    let mut keys: Vec<_> = (0..dof).map(|j| VariableKey::q(j, step)).collect();
    keys.extend((0..dof).map(|j| VariableKey::v(j, step)));
    keys.extend((0..dof).map(|j| VariableKey::a(j, step)));
    keys
}

fn noise(dim: usize, sigma: f64) -> Result<NoiseModel> {
    Ok(NoiseModel::isotropic(dim, sigma)?)
}

/// Goal prior (joint goal) or goal pose factor (workspace goal) at step N.
pub fn goal_factors(problem: &PlanningProblem, goal: &Goal) -> Result<Vec<Arc<dyn Factor>>> {
    let d = problem.dof();
    let n = problem.steps;
    let sigma = problem.sigmas.prior;
    let f: Arc<dyn Factor> = match (goal, problem.goal_mode) {
        (Goal::Joint(q), GoalMode::FullState) => {
            let mut target = DVector::zeros(3 * d);
            target.rows_mut(0, d).copy_from(q);
            Arc::new(JointStateFactor::new(state_keys(d, n), target, noise(3 * d, sigma)?))
        }
        (Goal::Joint(q), GoalMode::PositionOnly) => {
            let keys = (0..d).map(|j| VariableKey::q(j, n)).collect();
            Arc::new(JointStateFactor::new(keys, q.clone(), noise(d, sigma)?))
        }
        (Goal::Pose(pose), _) => Arc::new(
            EndEffectorPoseFactor::new(problem.model.clone(), n, *pose, noise(6, sigma)?).with_kind(FactorKind::Prior),
        ),
    };
    Ok(vec![f])
}

/// Collision factors of every sphere at every step against `sdf`.
pub fn obstacle_factors(problem: &PlanningProblem, sdf: &Arc<SdfGrid>) -> Result<Vec<(usize, ObstacleFactor)>> {
    let mut out = Vec::new();
    for i in 0..=problem.steps {
        for f in ObstacleFactor::for_all_spheres(&problem.model, sdf, i, problem.obstacle_eps, problem.sigmas.obstacle)? {
            out.push((i, f));
        }
    }
    Ok(out)
}

fn limit_factors(problem: &PlanningProblem, step: usize, graph: &mut FactorGraph) -> Result<()> {
    let n = noise(1, problem.sigmas.limit)?;
    for (j, joint) in problem.model.joints.iter().enumerate() {
        let l = joint.limits;
        let mut add = |key, lo, hi| -> Result<()> {
            graph.add(LimitFactor::corridor(key, lo, hi, problem.hinge, n.clone())?);
            Ok(())
        };
        add(VariableKey::q(j, step), l.q_min, l.q_max)?;
        add(VariableKey::v(j, step), -l.vel_max, l.vel_max)?;
        add(VariableKey::a(j, step), -l.acc_max, l.acc_max)?;
        if joint.actuated {
            add(VariableKey::torque(j, step), -l.torque_max, l.torque_max)?;
        }
    }
    Ok(())
}

pub fn build_graph(problem: &PlanningProblem) -> Result<PlanningGraph> {
    problem.validate()?;
    let model = &problem.model;
    let d = problem.dof();
    let sig = problem.sigmas;
    let dyn6 = noise(6, sig.dynamics)?;
    let dyn1 = noise(1, sig.dynamics)?;
    let mut graph = FactorGraph::new();

    let mut start = DVector::zeros(3 * d);
    start.rows_mut(0, d).copy_from(&problem.start.q);
    start.rows_mut(d, d).copy_from(&problem.start.v);
    start.rows_mut(2 * d, d).copy_from(&problem.start.a);
    graph.add(JointStateFactor::new(state_keys(d, 0), start, noise(3 * d, sig.prior)?));
    let goal_factors: Vec<FactorId> = goal_factors(problem, &problem.goal)?.into_iter().map(|f| graph.add_shared(f)).collect();

    let actuated: Vec<usize> = (0..d).filter(|&j| model.actuated(j)).collect();
    let obstacles = match (&problem.sdf, problem.uses_obstacles()) {
        (Some(sdf), true) => obstacle_factors(problem, sdf)?,
        _ => Vec::new(),
    };
    let mut obstacle_ids = Vec::with_capacity(obstacles.len());
    let mut obstacles = obstacles.into_iter().peekable();
    for i in 0..=problem.steps {
        for j in 0..d {
            graph.add(TwistFactor::new(model, j, i, dyn6.clone()));
            graph.add(AccelFactor::new(model, j, i, dyn6.clone()));
            graph.add(WrenchFactor::new(model, j, i, dyn6.clone()));
            graph.add(TorqueFactor::new(model, j, i, dyn1.clone()));
            if !model.actuated(j) {
                graph.add(unactuated_torque_prior(j, i, sig.unactuated_torque)?);
            }
        }
        if i > 0 {
            graph.add(GpPriorFactor::new(state_keys(d, i - 1), state_keys(d, i), problem.dt(), &problem.gp)?);
        }
        if problem.toggles.limits {
            limit_factors(problem, i, &mut graph)?;
        }
        if problem.toggles.min_torque && !actuated.is_empty() {
            graph.add(MinTorqueFactor::new(actuated.iter().copied(), i, sig.min_torque)?);
        }
        while let Some((_, f)) = obstacles.next_if(|(s, _)| *s == i) {
            obstacle_ids.push((graph.add(f), i));
        }
    }

    let mut by_kind = BTreeMap::new();
    for (_, f) in graph.iter() {
        *by_kind.entry(format!("{:?}", f.kind()).to_lowercase()).or_insert(0) += 1;
    }
    let counts = GraphCounts {
        variables: graph.keys().len(),
        factors: graph.len(),
        variables_per_step: 7 * d,
        factors_by_kind: by_kind,
    };
    Ok(PlanningGraph { graph, counts, goal_factors, obstacle_factors: obstacle_ids })
}
