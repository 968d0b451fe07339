//! Dense tensors, a reverse-mode gradient tape, recurrent building blocks and
//! the optimizer used by every model in the crate.
//!
//! Everything numeric is generic over [`Real`] so the same model code runs in
//! `f32` for training and in `f64` under the finite-difference checker.

mod checkpoint;
mod gradcheck;
mod graph;
mod nn;
mod optim;
mod params;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointData,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use graph::{Graph, Var};
pub use nn::{dropout, lstm_cell_forward, BiLstm, Linear, LstmParams, SequenceStates};
pub use optim::{clip_global_norm, Adagrad, LrSchedule};
pub use params::{Grads, ParamId, ParamStore, Trainable};

use crate::error::{Error, Result};

pub trait Real: Float + NumAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// A `[1, n]` row vector.
    pub fn row(values: Vec<T>) -> Self {
        Self {
            shape: vec![1, values.len()],
            data: values,
        }
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), values.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of the tensor viewed as a matrix; vectors count as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn item(&self) -> Result<T> {
        if self.data.len() != 1 {
            return Err(Error::shape(
                "item",
                format!("expected one element, shape {:?}", self.shape),
            ));
        }
        Ok(self.data[0])
    }

    pub fn row_slice(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?}", self.shape, shape),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable softmax along `axis` of a 1-D or 2-D tensor.
pub fn softmax<T: Real>(logits: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if !logits.is_finite() {
        return Err(Error::NonFiniteLogits);
    }
    let (rows, cols) = match logits.shape().len() {
        1 => (1, logits.len()),
        2 => (logits.shape()[0], logits.shape()[1]),
        _ => return Err(Error::shape("softmax", "only 1-D and 2-D tensors")),
    };
    let rank = logits.shape().len();
    if axis >= rank {
        return Err(Error::InvalidArgument(format!(
            "softmax axis {axis} out of range for rank {rank}"
        )));
    }
    let mut out = logits.clone();
    let along_rows = rank == 1 || axis == 1;
    let (lanes, lane_len, stride, lane_step) = if along_rows {
        (rows, cols, 1, cols)
    } else {
        (cols, rows, cols, 1)
    };
    for lane in 0..lanes {
        let base = lane * lane_step;
        let idx = |k: usize| base + k * stride;
        let max = (0..lane_len)
            .map(|k| logits.data[idx(k)])
            .fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for k in 0..lane_len {
            let e = (logits.data[idx(k)] - max).exp();
            out.data[idx(k)] = e;
            total += e;
        }
        for k in 0..lane_len {
            out.data[idx(k)] /= total;
        }
    }
    Ok(out)
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
