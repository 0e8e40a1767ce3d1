//! Named parameter arrays and their gradients.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub type ParamId = usize;

#[derive(Debug, Clone)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
    trainable: bool,
}

/// All learnable arrays of a model, addressable by name or id. Shapes are
/// fixed at registration; names are unique.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn register(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Invalid(format!("duplicate parameter name {name}")));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        let id = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape,
            data,
            trainable: true,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id].name
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.entries[id].shape
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.entries[id].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id].data
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id].trainable
    }

    /// Freeze or unfreeze every parameter whose name starts with `prefix`.
    /// Frozen parameters receive zero gradients and are skipped by optimizers.
    pub fn set_trainable_by_prefix(&mut self, prefix: &str, trainable: bool) {
        for e in self.entries.iter_mut() {
            if e.name.starts_with(prefix) {
                e.trainable = trainable;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &[usize], &[f64])> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.name.as_str(), e.shape.as_slice(), e.data.as_slice()))
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            data: self.entries.iter().map(|e| vec![0.0; e.data.len()]).collect(),
        }
    }
}

/// Per-parameter gradient arrays, aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Gradients {
    data: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.data[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.data[id]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn clear(&mut self) {
        for g in self.data.iter_mut() {
            g.fill(0.0);
        }
    }

    /// Global L2 norm over all gradient entries.
    pub fn global_norm(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.data.iter_mut() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }
}
