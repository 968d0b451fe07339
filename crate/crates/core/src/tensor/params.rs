use std::collections::HashMap;

use rand::Rng;

use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which entries of a parameter the optimizer may update.
#[derive(Debug, Clone, PartialEq)]
pub enum Trainable {
    All,
    Frozen,
    /// Per-row flags for a `[rows, cols]` table; `true` rows are updated.
    Rows(Vec<bool>),
}

#[derive(Debug, Clone)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub trainable: Trainable,
}

/// Named parameter tensors. Models hold [`ParamId`]s into a store and never
/// own tensors themselves, so one store can host several sub-models.
#[derive(Debug, Clone)]
pub struct ParamStore<T = f32> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, value: Tensor<T>, trainable: Trainable) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name}")));
        }
        if let Trainable::Rows(flags) = &trainable {
            if flags.len() != value.rows() {
                return Err(Error::shape(
                    name,
                    format!("{} row flags for {} rows", flags.len(), value.rows()),
                ));
            }
        }
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            trainable,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Uniform(-scale, scale) initialization.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64(rng.gen_range(-scale..scale)))
            .collect();
        self.add(name, Tensor::new(shape.to_vec(), data)?, Trainable::All)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape), Trainable::All)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: Trainable) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        matches!(self.entries[id.0].trainable, Trainable::Frozen)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<T>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                    trainable: e.trainable.clone(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Grads<T = f32> {
    slots: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Grads<T> {
    pub fn for_store(store: &ParamStore<T>) -> Self {
        Self {
            slots: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.slots.get(id.0).and_then(|s| s.as_ref())
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, shape: &[usize], grad: &[T]) {
        let slot = &mut self.slots[id.0];
        match slot {
            Some(t) => {
                for (a, &b) in t.data_mut().iter_mut().zip(grad) {
                    *a += b;
                }
            }
            None => {
                *slot = Some(Tensor {
                    shape: shape.to_vec(),
                    data: grad.to_vec(),
                })
            }
        }
    }

    pub fn add(&mut self, other: &Grads<T>) {
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g.shape(), g.data());
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.slots.iter_mut().flatten() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn zero(&mut self) {
        for s in &mut self.slots {
            *s = None;
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.slots
            .iter()
            .flatten()
            .flat_map(|t| t.data().iter())
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }
}
