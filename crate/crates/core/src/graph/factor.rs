use super::key::VariableKey;
use super::noise::NoiseModel;
use super::values::VariableValues;
use crate::error::GraphError;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Role of a factor in the planning problem, used for success accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FactorKind {
    /// Start/goal state priors and hard priors such as unactuated joints.
    Prior,
    /// Equations of motion.
    Dynamics,
    Smoothness,
    Limit,
    Obstacle,
    /// Workspace pose targets.
    Pose,
    Objective,
    Other,
}

impl FactorKind {
    pub fn is_equality(self) -> bool {
        matches!(self, FactorKind::Prior | FactorKind::Dynamics)
    }
}

/// A residual over an ordered list of variables with Gaussian noise.
///
/// `evaluate` returns the unwhitened residual. When `jacobians` is given it
/// holds one pre-sized block per key (`residual_dim × dim(key)`) which the
/// factor must overwrite.
pub trait Factor: Send + Sync + fmt::Debug {
    fn keys(&self) -> &[VariableKey];

    fn noise(&self) -> &NoiseModel;

    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64>;

    fn kind(&self) -> FactorKind {
        FactorKind::Other
    }

    fn residual_dim(&self) -> usize {
        self.noise().dim()
    }

    /// Unwhitened residual at `values`.
    fn unwhitened_error(&self, values: &VariableValues) -> Result<DVector<f64>, GraphError> {
        let x = gather(self.keys(), values)?;
        Ok(self.evaluate(&x, None))
    }

    /// Squared whitened residual at `values`.
    fn error(&self, values: &VariableValues) -> Result<f64, GraphError> {
        let r = self.unwhitened_error(values)?;
        Ok(self.noise().squared_norm(&r))
    }
}

pub(crate) fn gather<'a>(keys: &[VariableKey], values: &'a VariableValues) -> Result<Vec<&'a DVector<f64>>, GraphError> {
    keys.iter().map(|k| values.at(k)).collect()
}

pub type FactorId = usize;

/// Nonlinear factor graph with stable factor ids; removed factors leave an
/// empty slot so ids of the remaining factors never change.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    factors: Vec<Option<Arc<dyn Factor>>>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<F: Factor + 'static>(&mut self, factor: F) -> FactorId {
        self.add_shared(Arc::new(factor))
    }

    pub fn add_shared(&mut self, factor: Arc<dyn Factor>) -> FactorId {
        self.factors.push(Some(factor));
        self.factors.len() - 1
    }

    pub fn remove(&mut self, id: FactorId) -> Option<Arc<dyn Factor>> {
        self.factors.get_mut(id).and_then(|slot| slot.take())
    }

    pub fn get(&self, id: FactorId) -> Option<&Arc<dyn Factor>> {
        self.factors.get(id).and_then(|f| f.as_ref())
    }

    /// Replaces the factor in slot `id`, keeping the id.
    pub fn replace(&mut self, id: FactorId, factor: Arc<dyn Factor>) -> Result<Arc<dyn Factor>, GraphError> {
        match self.factors.get_mut(id) {
            Some(slot @ Some(_)) => Ok(slot.replace(factor).expect("occupied")),
            _ => Err(GraphError::UnknownFactor(id)),
        }
    }

    /// Number of live factors.
    pub fn len(&self) -> usize {
        self.factors.iter().filter(|f| f.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of the id space (live and removed slots).
    pub fn capacity(&self) -> usize {
        self.factors.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FactorId, &Arc<dyn Factor>)> {
        self.factors
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().map(|f| (i, f)))
    }

    pub fn keys(&self) -> BTreeSet<VariableKey> {
        self.iter().flat_map(|(_, f)| f.keys().iter().copied()).collect()
    }

    /// Total squared whitened error.
    pub fn error(&self, values: &VariableValues) -> Result<f64, GraphError> {
        let mut sum = 0.0;
        for (_, f) in self.iter() {
            sum += f.error(values)?;
        }
        Ok(sum)
    }
}

/// Prior `x − mean` on one vector variable.
#[derive(Debug, Clone)]
pub struct PriorFactor {
    keys: [VariableKey; 1],
    mean: DVector<f64>,
    noise: NoiseModel,
    kind: FactorKind,
}

impl PriorFactor {
    pub fn new(key: VariableKey, mean: DVector<f64>, noise: NoiseModel) -> Self {
        PriorFactor {
            keys: [key],
            mean,
            noise,
            kind: FactorKind::Prior,
        }
    }

    pub fn with_kind(mut self, kind: FactorKind) -> Self {
        self.kind = kind;
        self
    }
}

impl Factor for PriorFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn kind(&self) -> FactorKind {
        self.kind
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        if let Some(j) = jacobians {
            j[0].fill_with_identity();
        }
        x[0] - &self.mean
    }
}

/// Linear factor `Σ_k A_k x_k − b`, useful for tests and as a generic
/// building block.
#[derive(Debug, Clone)]
pub struct LinearFactor {
    keys: Vec<VariableKey>,
    blocks: Vec<DMatrix<f64>>,
    b: DVector<f64>,
    noise: NoiseModel,
}

impl LinearFactor {
    pub fn new(keys: Vec<VariableKey>, blocks: Vec<DMatrix<f64>>, b: DVector<f64>, noise: NoiseModel) -> Self {
        assert_eq!(keys.len(), blocks.len());
        LinearFactor { keys, blocks, b, noise }
    }
}

impl Factor for LinearFactor {
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn evaluate(&self, x: &[&DVector<f64>], jacobians: Option<&mut [DMatrix<f64>]>) -> DVector<f64> {
        let mut r = -self.b.clone();
        for (a, xi) in self.blocks.iter().zip(x) {
            r += a * *xi;
        }
        if let Some(j) = jacobians {
            for (dst, a) in j.iter_mut().zip(&self.blocks) {
                dst.copy_from(a);
            }
        }
        r
    }
}
