//! Sequential QR elimination into a Bayes tree of square-root conditionals.

use super::key::VariableKey;
use super::linear::{GaussianFactorGraph, JacobianFactor};
use super::ordering::Ordering;
use super::values::VariableValues;
use crate::error::GraphError;
use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Jacobian factor addressed by elimination positions, blocks sorted by
/// ascending position.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PosFactor {
    pub vars: Vec<usize>,
    pub dims: Vec<usize>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl PosFactor {
    pub fn from_jacobian(jf: &JacobianFactor, ordering: &Ordering) -> Result<Self, GraphError> {
        let mut offsets = Vec::with_capacity(jf.keys.len());
        let mut off = 0;
        for &d in &jf.dims {
            offsets.push(off);
            off += d;
        }
        let mut idx: Vec<(usize, usize)> = Vec::with_capacity(jf.keys.len());
        for (i, k) in jf.keys.iter().enumerate() {
            let p = ordering.position(k).ok_or(GraphError::UnknownVariable(*k))?;
            idx.push((p, i));
        }
        idx.sort_unstable();
        let mut a = DMatrix::zeros(jf.rows(), off);
        let mut col = 0;
        let mut vars = Vec::with_capacity(idx.len());
        let mut dims = Vec::with_capacity(idx.len());
        for &(p, i) in &idx {
            let d = jf.dims[i];
            a.columns_mut(col, d).copy_from(&jf.a.columns(offsets[i], d));
            col += d;
            vars.push(p);
            dims.push(d);
        }
        Ok(PosFactor { vars, dims, a, b: jf.b.clone() })
    }

    pub fn damping(pos: usize, dim: usize, lambda: f64) -> Self {
        PosFactor {
            vars: vec![pos],
            dims: vec![dim],
            a: DMatrix::identity(dim, dim) * lambda.sqrt(),
            b: DVector::zeros(dim),
        }
    }
}

/// `R x_f + S x_parents = d` for one eliminated variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub(crate) frontal: usize,
    pub(crate) r: DMatrix<f64>,
    pub(crate) s: DMatrix<f64>,
    pub(crate) parents: Vec<usize>,
    pub(crate) d: DVector<f64>,
}

impl Conditional {
    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// Upper-triangular block on the frontal variable.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

pub(crate) struct Eliminated {
    pub cond: Conditional,
    pub produced: Option<PosFactor>,
}

/// Eliminates the variables appearing in `factors` in ascending position.
pub(crate) fn eliminate_positions(factors: Vec<PosFactor>, ordering: &Ordering) -> Result<Vec<Eliminated>, GraphError> {
    let mut buckets: BTreeMap<usize, Vec<PosFactor>> = BTreeMap::new();
    for f in factors {
        if let Some(&first) = f.vars.first() {
            buckets.entry(first).or_default().push(f);
        }
    }
    let mut out = Vec::new();
    while let Some((p, fs)) = buckets.pop_first() {
        let e = eliminate_one(p, fs, ordering)?;
        if let Some(prod) = &e.produced {
            buckets.entry(prod.vars[0]).or_default().push(prod.clone());
        }
        out.push(e);
    }
    Ok(out)
}

fn eliminate_one(p: usize, fs: Vec<PosFactor>, ordering: &Ordering) -> Result<Eliminated, GraphError> {
    let mut var_dims: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rows = 0;
    for f in &fs {
        rows += f.b.len();
        for (&v, &d) in f.vars.iter().zip(&f.dims) {
            var_dims.insert(v, d);
        }
    }
    let vars: Vec<usize> = var_dims.keys().copied().collect();
    let dims: Vec<usize> = var_dims.values().copied().collect();
    let mut col_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut ncols = 0;
    for (&v, &d) in vars.iter().zip(&dims) {
        col_of.insert(v, ncols);
        ncols += d;
    }
    let mut m = DMatrix::zeros(rows, ncols + 1);
    let mut row = 0;
    for f in &fs {
        let nr = f.b.len();
        let mut fc = 0;
        for (&v, &d) in f.vars.iter().zip(&f.dims) {
            let c = col_of[&v];
            m.view_mut((row, c), (nr, d)).copy_from(&f.a.columns(fc, d));
            fc += d;
        }
        m.view_mut((row, ncols), (nr, 1)).copy_from(&f.b);
        row += nr;
    }
    let dp = dims[0];
    let key = ordering.key(p);
    if rows < dp {
        return Err(GraphError::Indeterminate(key));
    }
    let scale = m.amax().max(1.0);
    let r = m.qr().r();
    for i in 0..dp {
        if r[(i, i)].abs() <= 1e-11 * scale {
            return Err(GraphError::Indeterminate(key));
        }
    }
    let cond = Conditional {
        frontal: p,
        r: r.view((0, 0), (dp, dp)).into_owned(),
        s: r.view((0, dp), (dp, ncols - dp)).into_owned(),
        parents: vars[1..].to_vec(),
        d: r.view((0, ncols), (dp, 1)).column(0).into_owned(),
    };
    let sep_rows = r.nrows().min(ncols).saturating_sub(dp);
    let produced = if vars.len() > 1 && sep_rows > 0 {
        Some(PosFactor {
            vars: vars[1..].to_vec(),
            dims: dims[1..].to_vec(),
            a: r.view((dp, dp), (sep_rows, ncols - dp)).into_owned(),
            b: r.view((dp, ncols), (sep_rows, 1)).column(0).into_owned(),
        })
    } else {
        None
    };
    Ok(Eliminated { cond, produced })
}

pub type CliqueId = usize;

/// Node of the Bayes tree.
#[derive(Debug, Clone)]
pub struct Clique {
    pub(crate) frontals: Vec<usize>,
    pub(crate) separator: Vec<usize>,
    pub(crate) conditionals: Vec<Conditional>,
    /// Marginal factor on the separator passed to the parent during
    /// elimination.
    pub(crate) cached: Option<PosFactor>,
    pub(crate) parent: Option<CliqueId>,
    pub(crate) children: Vec<CliqueId>,
}

impl Clique {
    pub fn parent(&self) -> Option<CliqueId> {
        self.parent
    }

    pub fn children(&self) -> &[CliqueId] {
        &self.children
    }

    pub fn conditionals(&self) -> &[Conditional] {
        &self.conditionals
    }
}

/// Eliminated, incrementally updatable form of a Gaussian factor graph.
#[derive(Debug, Clone)]
pub struct BayesTree {
    pub(crate) ordering: Ordering,
    cliques: Vec<Option<Clique>>,
    roots: Vec<CliqueId>,
    clique_of: Vec<Option<CliqueId>>,
}

/// Eliminates `ggraph` with `ordering`, which must be a permutation of the
/// graph's keys.
pub fn eliminate(ggraph: &GaussianFactorGraph, ordering: &Ordering) -> Result<BayesTree, GraphError> {
    let keys: BTreeSet<VariableKey> = ggraph.factors.iter().flat_map(|f| f.keys.iter().copied()).collect();
    if keys.len() != ordering.len() {
        return Err(GraphError::BadOrdering(format!(
            "ordering has {} keys, graph has {}",
            ordering.len(),
            keys.len()
        )));
    }
    let factors = ggraph
        .factors
        .iter()
        .map(|f| PosFactor::from_jacobian(f, ordering))
        .collect::<Result<Vec<_>, _>>()?;
    BayesTree::from_pos_factors(factors, ordering.clone())
}

/// Back-substitution: the delta minimizing the linearized error.
pub fn solve(bt: &BayesTree) -> VariableValues {
    bt.solve()
}

impl BayesTree {
    pub(crate) fn from_pos_factors(factors: Vec<PosFactor>, ordering: Ordering) -> Result<Self, GraphError> {
        let n = ordering.len();
        let elim = eliminate_positions(factors, &ordering)?;
        let mut bt = BayesTree {
            ordering,
            cliques: Vec::new(),
            roots: Vec::new(),
            clique_of: vec![None; n],
        };
        if elim.len() != n {
            let done: BTreeSet<usize> = elim.iter().map(|e| e.cond.frontal).collect();
            let missing = (0..n).find(|p| !done.contains(p)).expect("some key missing");
            return Err(GraphError::Indeterminate(bt.ordering.key(missing)));
        }
        bt.attach(elim, &[]);
        Ok(bt)
    }

    /// Builds cliques from conditionals (in elimination order) and hangs the
    /// `orphans` under the clique holding their first separator variable.
    pub(crate) fn attach(&mut self, elim: Vec<Eliminated>, orphans: &[CliqueId]) {
        for e in elim.into_iter().rev() {
            let Eliminated { cond, produced } = e;
            let p = cond.frontal;
            if cond.parents.is_empty() {
                let id = self.push_clique(Clique {
                    frontals: vec![p],
                    separator: vec![],
                    conditionals: vec![cond],
                    cached: produced,
                    parent: None,
                    children: vec![],
                });
                self.roots.push(id);
                self.clique_of[p] = Some(id);
                continue;
            }
            let parent_id = self.clique_of[cond.parents[0]].expect("parent eliminated later");
            let parent = self.cliques[parent_id].as_mut().expect("live clique");
            let same_vars = parent.frontals.len() + parent.separator.len() == cond.parents.len()
                && parent
                    .frontals
                    .iter()
                    .chain(parent.separator.iter())
                    .zip(cond.parents.iter())
                    .all(|(a, b)| a == b);
            if same_vars {
                parent.frontals.insert(0, p);
                parent.conditionals.insert(0, cond);
                self.clique_of[p] = Some(parent_id);
            } else {
                let separator = cond.parents.clone();
                let id = self.push_clique(Clique {
                    frontals: vec![p],
                    separator,
                    conditionals: vec![cond],
                    cached: produced,
                    parent: Some(parent_id),
                    children: vec![],
                });
                self.cliques[parent_id].as_mut().unwrap().children.push(id);
                self.clique_of[p] = Some(id);
            }
        }
        for &o in orphans {
            let first = self.cliques[o].as_ref().expect("orphan alive").separator[0];
            let parent_id = self.clique_of[first].expect("separator re-eliminated");
            self.cliques[o].as_mut().unwrap().parent = Some(parent_id);
            self.cliques[parent_id].as_mut().unwrap().children.push(o);
        }
    }

    fn push_clique(&mut self, c: Clique) -> CliqueId {
        self.cliques.push(Some(c));
        self.cliques.len() - 1
    }

    /// Detaches every clique with a frontal in `positions` together with all
    /// ancestors. Returns the removed frontal positions (ascending), the
    /// removed cliques and the orphaned subtrees.
    pub(crate) fn remove_top(&mut self, positions: &BTreeSet<usize>) -> (Vec<usize>, Vec<Clique>, Vec<CliqueId>) {
        let mut removed: BTreeSet<CliqueId> = BTreeSet::new();
        for &p in positions {
            let mut cur = self.clique_of[p];
            while let Some(c) = cur {
                if !removed.insert(c) {
                    break;
                }
                cur = self.cliques[c].as_ref().unwrap().parent;
            }
        }
        let mut frontals = Vec::new();
        let mut orphans = Vec::new();
        let mut out = Vec::new();
        for &c in &removed {
            let clique = self.cliques[c].take().expect("live clique");
            for &f in &clique.frontals {
                self.clique_of[f] = None;
                frontals.push(f);
            }
            for &ch in &clique.children {
                if !removed.contains(&ch) {
                    orphans.push(ch);
                    self.cliques[ch].as_mut().unwrap().parent = None;
                }
            }
            out.push(clique);
        }
        self.roots.retain(|r| !removed.contains(r));
        frontals.sort_unstable();
        orphans.sort_unstable();
        (frontals, out, orphans)
    }

    pub(crate) fn cached_factor(&self, id: CliqueId) -> Option<&PosFactor> {
        self.cliques[id].as_ref().and_then(|c| c.cached.as_ref())
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn clique_count(&self) -> usize {
        self.cliques.iter().filter(|c| c.is_some()).count()
    }

    pub fn roots(&self) -> &[CliqueId] {
        &self.roots
    }

    pub fn clique(&self, id: CliqueId) -> Option<&Clique> {
        self.cliques.get(id).and_then(|c| c.as_ref())
    }

    pub fn cliques(&self) -> impl Iterator<Item = (CliqueId, &Clique)> {
        self.cliques.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
    }

    pub fn clique_of_key(&self, key: &VariableKey) -> Option<CliqueId> {
        self.ordering.position(key).and_then(|p| self.clique_of[p])
    }

    pub fn frontal_keys(&self, id: CliqueId) -> Vec<VariableKey> {
        self.clique(id)
            .map(|c| c.frontals.iter().map(|&p| self.ordering.key(p)).collect())
            .unwrap_or_default()
    }

    pub fn separator_keys(&self, id: CliqueId) -> Vec<VariableKey> {
        self.clique(id)
            .map(|c| c.separator.iter().map(|&p| self.ordering.key(p)).collect())
            .unwrap_or_default()
    }

    /// Depth of a clique (roots have depth 0).
    pub fn depth(&self, id: CliqueId) -> usize {
        let mut d = 0;
        let mut cur = self.clique(id).and_then(|c| c.parent);
        while let Some(c) = cur {
            d += 1;
            cur = self.clique(c).and_then(|c| c.parent);
        }
        d
    }

    /// Checks the structural invariants: frontal sets partition the keys
    /// and every separator is contained in the parent's variables.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.ordering.len()];
        for (id, c) in self.cliques() {
            for &f in &c.frontals {
                if seen[f] {
                    return Err(format!("key {} is frontal twice", self.ordering.key(f)));
                }
                seen[f] = true;
                if self.clique_of[f] != Some(id) {
                    return Err(format!("index for {} is stale", self.ordering.key(f)));
                }
            }
            match c.parent {
                None => {
                    if !c.separator.is_empty() {
                        return Err(format!("root clique {id} has a separator"));
                    }
                    if !self.roots.contains(&id) {
                        return Err(format!("clique {id} has no parent but is not a root"));
                    }
                }
                Some(pid) => {
                    let parent = self.clique(pid).ok_or(format!("clique {id} has dead parent"))?;
                    if !parent.children.contains(&id) {
                        return Err(format!("clique {id} missing from its parent's children"));
                    }
                    for s in &c.separator {
                        if !parent.frontals.contains(s) && !parent.separator.contains(s) {
                            return Err(format!(
                                "separator key {} of clique {id} not in parent",
                                self.ordering.key(*s)
                            ));
                        }
                    }
                }
            }
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(format!("key {} is in no clique", self.ordering.key(p)));
        }
        Ok(())
    }

    pub(crate) fn solve_positions(&self) -> Vec<DVector<f64>> {
        let mut x: Vec<DVector<f64>> = vec![DVector::zeros(0); self.ordering.len()];
        let mut queue: VecDeque<CliqueId> = self.roots.iter().copied().collect();
        while let Some(id) = queue.pop_front() {
            let c = self.cliques[id].as_ref().expect("live clique");
            for cond in c.conditionals.iter().rev() {
                let mut rhs = cond.d.clone();
                let mut col = 0;
                for &p in &cond.parents {
                    let xp = &x[p];
                    let d = xp.len();
                    rhs -= cond.s.columns(col, d) * xp;
                    col += d;
                }
                x[cond.frontal] = cond
                    .r
                    .solve_upper_triangular(&rhs)
                    .expect("nonsingular triangular block");
            }
            queue.extend(c.children.iter().copied());
        }
        x
    }

    pub fn solve(&self) -> VariableValues {
        self.solve_positions()
            .into_iter()
            .enumerate()
            .map(|(p, v)| (self.ordering.key(p), v))
            .collect()
    }
}
