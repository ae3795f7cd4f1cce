use super::key::VariableKey;
use crate::error::GraphError;
use nalgebra::DVector;
use std::collections::BTreeMap;

/// Assignment of a real vector to each variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableValues {
    map: BTreeMap<VariableKey, DVector<f64>>,
}

impl VariableValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: VariableKey, value: DVector<f64>) -> Option<DVector<f64>> {
        self.map.insert(key, value)
    }

    pub fn insert_scalar(&mut self, key: VariableKey, value: f64) {
        self.map.insert(key, DVector::from_element(1, value));
    }

    pub fn get(&self, key: &VariableKey) -> Option<&DVector<f64>> {
        self.map.get(key)
    }

    pub fn get_mut(&mut self, key: &VariableKey) -> Option<&mut DVector<f64>> {
        self.map.get_mut(key)
    }

    pub fn at(&self, key: &VariableKey) -> Result<&DVector<f64>, GraphError> {
        self.map.get(key).ok_or(GraphError::UnknownVariable(*key))
    }

    /// First component of a variable; used for scalar joint quantities.
    pub fn scalar(&self, key: &VariableKey) -> Result<f64, GraphError> {
        Ok(self.at(key)?[0])
    }

    pub fn contains(&self, key: &VariableKey) -> bool {
        self.map.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VariableKey> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableKey, &DVector<f64>)> {
        self.map.iter()
    }

    /// Total scalar dimension.
    pub fn dim(&self) -> usize {
        self.map.values().map(|v| v.len()).sum()
    }

    /// `self + delta`, keys absent from `delta` are kept unchanged.
    pub fn retract(&self, delta: &VariableValues) -> VariableValues {
        let mut out = self.clone();
        for (k, d) in delta.iter() {
            if let Some(v) = out.map.get_mut(k) {
                *v += d;
            }
        }
        out
    }

    /// Largest absolute component over all variables.
    pub fn max_abs(&self) -> f64 {
        self.map
            .values()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Largest absolute componentwise difference over the keys of `self`.
    pub fn max_abs_diff(&self, other: &VariableValues) -> f64 {
        self.map
            .iter()
            .filter_map(|(k, v)| other.get(k).map(|o| (v - o).amax()))
            .fold(0.0f64, f64::max)
    }
}

impl FromIterator<(VariableKey, DVector<f64>)> for VariableValues {
    fn from_iter<I: IntoIterator<Item = (VariableKey, DVector<f64>)>>(iter: I) -> Self {
        VariableValues {
            map: iter.into_iter().collect(),
        }
    }
}
