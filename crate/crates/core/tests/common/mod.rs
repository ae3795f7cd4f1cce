//! Independent oracles shared by the integration test targets.
#![allow(dead_code)]

use dynplan::graph::{
    forward_ordering, Factor, FactorChange, FactorGraph, GaussianFactorGraph, IncrementalParams, IncrementalSolver, LinearFactor,
    NoiseModel, PriorFactor, VariableKey, VariableValues,
};
use dynplan::robot::RobotModel;
use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Random sparse linear graph: every variable gets a weak prior, plus
/// factors coupling 2-3 nearby or random variables.
pub fn random_linear_graph(seed: u64, max_vars: usize) -> (FactorGraph, VariableValues) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_vars);
    let dims: Vec<usize> = (0..n).map(|_| *[1usize, 1, 2, 3, 6].choose(&mut rng).unwrap()).collect();
    let keys: Vec<VariableKey> = (0..n).map(|i| VariableKey::new('x', (i % 7) as u32, (i / 7) as u32)).collect();
    let mut g = FactorGraph::new();
    for (k, &d) in keys.iter().zip(&dims) {
        let sigma = rng.random_range(0.5..2.0);
        g.add(PriorFactor::new(*k, random_vector(&mut rng, d), NoiseModel::isotropic(d, sigma).unwrap()));
    }
    let m = n + n / 2;
    for _ in 0..m {
        let a = rng.random_range(0..n);
        let mut vars = BTreeSet::from([a]);
        let span = rng.random_range(1..=3usize);
        while vars.len() < 1 + span.min(n - 1) {
            let b = if rng.random_bool(0.8) {
                (a + rng.random_range(1..=8)).min(n - 1)
            } else {
                rng.random_range(0..n)
            };
            vars.insert(b);
            if vars.len() == n {
                break;
            }
        }
        let rows = rng.random_range(1..=6);
        let ks: Vec<_> = vars.iter().map(|&i| keys[i]).collect();
        let blocks: Vec<_> = vars.iter().map(|&i| random_matrix(&mut rng, rows, dims[i])).collect();
        let sig = DVector::from_fn(rows, |_, _| rng.random_range(0.2..1.5));
        g.add(LinearFactor::new(ks, blocks, random_vector(&mut rng, rows), NoiseModel::diagonal(sig).unwrap()));
    }
    let zero = keys.iter().zip(&dims).map(|(k, &d)| (*k, DVector::zeros(d))).collect();
    (g, zero)
}

/// Dense normal-equations solve of a Gaussian factor graph.
pub fn dense_solve(lin: &GaussianFactorGraph, keys: &[VariableKey], values: &VariableValues) -> VariableValues {
    let mut off = Vec::new();
    let mut n = 0;
    for k in keys {
        off.push(n);
        n += values.get(k).unwrap().len();
    }
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut g = DVector::<f64>::zeros(n);
    let index: std::collections::HashMap<_, _> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    for f in &lin.factors {
        let mut cols = Vec::new();
        let mut c = 0;
        for (k, &d) in f.keys.iter().zip(&f.dims) {
            cols.push((off[index[k]], c, d));
            c += d;
        }
        for &(oi, ci, di) in &cols {
            let ai = f.a.columns(ci, di);
            let mut gi = g.rows_mut(oi, di);
            gi += ai.transpose() * &f.b;
            for &(oj, cj, dj) in &cols {
                let mut hij = h.view_mut((oi, oj), (di, dj));
                hij += ai.transpose() * f.a.columns(cj, dj);
            }
        }
    }
    let x = h.cholesky().expect("positive definite").solve(&g);
    keys.iter()
        .enumerate()
        .map(|(i, k)| {
            let d = values.get(k).unwrap().len();
            (*k, x.rows(off[i], d).into_owned())
        })
        .collect()
}

/// Gradient of the linearized quadratic at `delta`.
pub fn gradient_norm(lin: &GaussianFactorGraph, delta: &VariableValues) -> f64 {
    let mut grad: std::collections::BTreeMap<VariableKey, DVector<f64>> = Default::default();
    for f in &lin.factors {
        let mut r = -f.b.clone();
        let mut c = 0;
        for (k, &d) in f.keys.iter().zip(&f.dims) {
            r += f.a.columns(c, d) * delta.get(k).unwrap();
            c += d;
        }
        let mut c = 0;
        for (k, &d) in f.keys.iter().zip(&f.dims) {
            let gk = f.a.columns(c, d).transpose() * &r;
            *grad.entry(*k).or_insert_with(|| DVector::zeros(d)) += gk;
            c += d;
        }
    }
    grad.values().map(|g| g.amax()).fold(0.0, f64::max)
}

/// Smooth nonlinear residual `sin(x_a) + x_a x_b − c` coupling two scalars.
#[derive(Debug)]
pub struct Bilinear {
    keys: [VariableKey; 2],
    c: f64,
    noise: NoiseModel,
}

impl Factor for Bilinear {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn evaluate(&self, x: &[&DVector<f64>], jac: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let (a, b) = (x[0][0], x[1][0]);
        if let Some(j) = jac {
            j[0][(0, 0)] = a.cos() + b;
            j[1][(0, 0)] = a;
        }
        DVector::from_element(1, a.sin() + a * b - self.c)
    }
}

pub fn chain_key(t: u32, e: u32) -> VariableKey {
    VariableKey::new('q', e, t)
}

pub fn random_session(rng: &mut ChaCha8Rng) -> IncrementalSolver {
    let steps = rng.random_range(3..=12u32);
    let ents = rng.random_range(1..=3u32);
    let keys: Vec<_> = (0..steps).flat_map(|t| (0..ents).map(move |e| chain_key(t, e))).collect();
    let mut g = FactorGraph::new();
    for k in &keys {
        g.add(PriorFactor::new(*k, DVector::from_element(1, rng.random_range(-1.0..1.0)), NoiseModel::isotropic(1, 1.0).unwrap()));
    }
    for t in 0..steps - 1 {
        for e in 0..ents {
            let e2 = rng.random_range(0..ents);
            g.add(Bilinear {
                keys: [chain_key(t, e), chain_key(t + 1, e2)],
                c: rng.random_range(-0.5..0.5),
                noise: NoiseModel::isotropic(1, 0.5).unwrap(),
            });
        }
    }
    let init = keys.iter().map(|k| (*k, DVector::from_element(1, rng.random_range(-0.3..0.3)))).collect();
    IncrementalSolver::new(g, init, forward_ordering(keys), IncrementalParams::default()).unwrap()
}

pub fn batch_oracle(s: &IncrementalSolver) -> VariableValues {
    IncrementalSolver::new(
        s.graph().clone(),
        s.linearization_point().clone(),
        s.ordering().clone(),
        IncrementalParams::default(),
    )
    .unwrap()
    .delta()
}

pub fn random_change(rng: &mut ChaCha8Rng, s: &IncrementalSolver) -> (FactorChange, BTreeSet<VariableKey>) {
    let keys: Vec<VariableKey> = s.ordering().keys().to_vec();
    let mut change = FactorChange::default();
    let removable: Vec<_> = s.graph().iter().filter(|(_, f)| f.keys().len() == 2).map(|(id, _)| id).collect();
    if !removable.is_empty() && rng.random_bool(0.5) {
        change.removed.push(*removable.choose(rng).unwrap());
    }
    for _ in 0..rng.random_range(0..=2) {
        let a = *keys.choose(rng).unwrap();
        let b = *keys.choose(rng).unwrap();
        if a == b {
            change.added.push(Arc::new(PriorFactor::new(a, DVector::from_element(1, rng.random_range(-1.0..1.0)), NoiseModel::isotropic(1, 0.3).unwrap())));
        } else {
            change.added.push(Arc::new(Bilinear { keys: [a, b], c: rng.random_range(-0.5..0.5), noise: NoiseModel::isotropic(1, 0.7).unwrap() }));
        }
    }
    let relin = if rng.random_bool(0.5) {
        s.relinearization_candidates()
    } else {
        keys.iter().filter(|_| rng.random_bool(0.2)).copied().collect()
    };
    (change, relin)
}

/// Closed-form two-link planar dynamics `M(q)q̈ + C(q,q̇)q̇ + G(q)`.
///
/// Links rotate about z. `theta0` is the direction of the links at q = 0
/// measured from +x, gravity points along −y with magnitude `g`.
pub struct PlanarTwoLink {
    m: [f64; 2],
    l1: f64,
    lc: [f64; 2],
    izz: [f64; 2],
    theta0: f64,
    g: f64,
}

impl PlanarTwoLink {
    pub fn from_model(model: &RobotModel) -> Self {
        let com1 = model.links[0].inertia.com;
        let com2 = model.links[1].inertia.com;
        let l1 = model.joints[1].home.translation.norm();
        PlanarTwoLink {
            m: [model.links[0].inertia.mass, model.links[1].inertia.mass],
            l1,
            lc: [com1.norm(), com2.norm()],
            izz: [model.links[0].inertia.inertia[(2, 2)], model.links[1].inertia.inertia[(2, 2)]],
            theta0: com1.y.atan2(com1.x),
            g: -model.gravity.y,
        }
    }

    pub fn torques(&self, q: [f64; 2], qd: [f64; 2], qdd: [f64; 2]) -> [f64; 2] {
        let [m1, m2] = self.m;
        let [lc1, lc2] = self.lc;
        let [i1, i2] = self.izz;
        let l1 = self.l1;
        let c2 = q[1].cos();
        let s2 = q[1].sin();
        let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = i2 + m2 * lc2 * lc2;
        let h = m2 * l1 * lc2 * s2;
        let c1 = -h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]);
        let c2t = h * qd[0] * qd[0];
        let a1 = q[0] + self.theta0;
        let a12 = a1 + q[1];
        let g1 = self.g * ((m1 * lc1 + m2 * l1) * a1.cos() + m2 * lc2 * a12.cos());
        let g2 = self.g * m2 * lc2 * a12.cos();
        [
            m11 * qdd[0] + m12 * qdd[1] + c1 + g1,
            m12 * qdd[0] + m22 * qdd[1] + c2t + g2,
        ]
    }
}

