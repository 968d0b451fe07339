use super::params::{Grads, ParamStore, Trainable};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Adagrad: `acc += g²; p -= lr · g / sqrt(acc)`.
#[derive(Debug, Clone)]
pub struct Adagrad<T = f32> {
    lr: f64,
    initial_accumulator: f64,
    accumulators: Vec<Tensor<T>>,
}

impl<T: Real> Adagrad<T> {
    pub fn new(store: &ParamStore<T>, lr: f64, initial_accumulator: f64) -> Result<Self> {
        if initial_accumulator <= 0.0 || lr <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "adagrad needs lr > 0 and initial accumulator > 0 (got {lr}, {initial_accumulator})"
            )));
        }
        let accumulators = store
            .iter()
            .map(|(_, e)| Tensor::full(e.value.shape(), T::from_f64(initial_accumulator)))
            .collect();
        Ok(Self {
            lr,
            initial_accumulator,
            accumulators,
        })
    }

    /// State with no accumulators; `step` refuses to run until rebuilt with [`Adagrad::new`].
    pub fn uninitialized(lr: f64, initial_accumulator: f64) -> Self {
        Self {
            lr,
            initial_accumulator,
            accumulators: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn initial_accumulator(&self) -> f64 {
        self.initial_accumulator
    }

    pub fn accumulators(&self) -> &[Tensor<T>] {
        &self.accumulators
    }

    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>) -> Result<()> {
        if self.accumulators.len() != store.len() || grads.len() != store.len() {
            return Err(Error::OptimizerUninitialized(store.len()));
        }
        let lr = T::from_f64(self.lr);
        for id in store.ids().collect::<Vec<_>>() {
            let Some(grad) = grads.get(id) else { continue };
            let trainable = store.entry(id).trainable.clone();
            if trainable == Trainable::Frozen {
                continue;
            }
            let cols = store.value(id).cols();
            let acc = self.accumulators[id.index()].data_mut();
            let value = store.value_mut(id).data_mut();
            for (k, (&gk, (a, p))) in grad.data().iter().zip(acc.iter_mut().zip(value.iter_mut())).enumerate() {
                if let Trainable::Rows(rows) = &trainable {
                    if !rows[k / cols] {
                        continue;
                    }
                }
                *a += gk * gk;
                *p -= lr * gk / a.sqrt();
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut Grads<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(T::from_f64(max_norm / norm));
    }
    norm
}

/// Learning-rate halving: once an epoch fails to lower validation
/// perplexity, the rate halves after that epoch and every later one.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    lr: f64,
    best: Option<f64>,
    decaying: bool,
}

impl LrSchedule {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            best: None,
            decaying: false,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records an epoch's validation perplexity and returns the rate for the next epoch.
    pub fn observe(&mut self, val_ppl: f64) -> f64 {
        match self.best {
            Some(best) if val_ppl >= best => self.decaying = true,
            _ => {}
        }
        if self.best.is_none_or(|b| val_ppl < b) {
            self.best = Some(val_ppl);
        }
        if self.decaying {
            self.lr *= 0.5;
        }
        self.lr
    }
}
