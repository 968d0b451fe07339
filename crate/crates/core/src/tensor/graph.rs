//! Reverse-mode automatic differentiation over a tape of tensor operations.
//!
//! A [`Graph`] records every operation in creation order, which is already a
//! topological order. [`Graph::backward`] walks the tape once in reverse and
//! accumulates parameter gradients into a [`Grads`] buffer.

use std::borrow::Cow;

use super::params::{Grads, ParamId, ParamStore};
use super::{sigmoid, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    /// `[m, n] + [n]` broadcast over rows.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// scalar var times tensor
    ScaleBy(Var, Var),
    /// tensor divided by scalar var
    DivBy(Var, Var),
    /// `scale·x + shift`; only the scale matters for gradients
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Ln(Var),
    Softmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    Row(Var, usize),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    Pick(Var, usize),
    Sum(Var),
    Mean(Var),
    Clamp(Var, f64, f64),
    LstmGates(Var, Var),
}

pub struct Graph<'a, T: Real = f32> {
    params: Option<&'a ParamStore<T>>,
    values: Vec<Cow<'a, Tensor<T>>>,
    ops: Vec<Op>,
    needs_grad: Vec<bool>,
    param_vars: Vec<Option<Var>>,
}

impl<T: Real> Default for Graph<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn dims<T: Real>(t: &Tensor<T>) -> (usize, usize) {
    (t.rows(), t.cols())
}

impl<'a, T: Real> Graph<'a, T> {
    pub fn new() -> Self {
        Self {
            params: None,
            values: Vec::new(),
            ops: Vec::new(),
            needs_grad: Vec::new(),
            param_vars: Vec::new(),
        }
    }

    pub fn with_params(params: &'a ParamStore<T>) -> Self {
        Self {
            params: Some(params),
            param_vars: vec![None; params.len()],
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.values[v.0]
    }

    pub fn scalar(&self, v: Var) -> Result<T> {
        self.values[v.0].item()
    }

    fn push(&mut self, value: Cow<'a, Tensor<T>>, op: Op, needs_grad: bool) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.needs_grad.push(needs_grad);
        Var(self.ops.len() - 1)
    }

    fn node(&mut self, value: Tensor<T>, op: Op, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|v| self.needs_grad[v.0]);
        self.push(Cow::Owned(value), op, needs)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Cow::Owned(value), Op::Constant, false)
    }

    pub fn constant_row(&mut self, values: Vec<T>) -> Var {
        self.constant(Tensor::row(values))
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(id.0).copied().flatten() {
            return v;
        }
        let store = self.params.expect("graph has no parameter store");
        let needs = !store.is_frozen(id);
        let v = self.push(Cow::Borrowed(store.value(id)), Op::Param(id), needs);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims(self.value(a));
        let (k2, n) = dims(self.value(b));
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("[{m}, {k}] x [{k2}, {n}]"),
            ));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let av = ad[i * k + p];
                if av == T::zero() {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        Ok(self.node(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = dims(self.value(a));
        let ad = self.value(a).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = ad[i * n + j];
            }
        }
        Ok(self.node(Tensor::new(vec![n, m], out)?, Op::Transpose(a), &[a]))
    }

    fn same_shape(&self, ctx: &str, a: Var, b: Var) -> Result<()> {
        if self.value(a).len() != self.value(b).len() {
            return Err(Error::shape(
                ctx,
                format!(
                    "{:?} vs {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(T, T) -> T) -> Var {
        let av = self.value(a);
        let data = av
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = av.shape().to_vec();
        self.node(Tensor { shape, data }, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = dims(self.value(a));
        if self.value(bias).len() != n {
            return Err(Error::shape(
                "add_row",
                format!("[{m}, {n}] + {:?}", self.value(bias).shape()),
            ));
        }
        let bd = self.value(bias).data();
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &b) in row.iter_mut().zip(bd) {
                *x += b;
            }
        }
        let shape = self.value(a).shape().to_vec();
        Ok(self.node(Tensor { shape, data }, Op::AddRow(a, bias), &[a, bias]))
    }

    pub fn scale_by(&mut self, s: Var, a: Var) -> Result<Var> {
        let sv = self.value(s).item()?;
        let t = self.value(a);
        let data = t.data().iter().map(|&x| x * sv).collect();
        let shape = t.shape().to_vec();
        Ok(self.node(Tensor { shape, data }, Op::ScaleBy(s, a), &[s, a]))
    }

    pub fn div_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let sv = self.value(s).item()?;
        let t = self.value(a);
        let data = t.data().iter().map(|&x| x / sv).collect();
        let shape = t.shape().to_vec();
        Ok(self.node(Tensor { shape, data }, Op::DivBy(a, s), &[a, s]))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let (sc, sh) = (T::from_f64(scale), T::from_f64(shift));
        let t = self.value(a);
        let data = t.data().iter().map(|&x| sc * x + sh).collect();
        let shape = t.shape().to_vec();
        self.node(Tensor { shape, data }, Op::Affine(a, scale), &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.affine(a, factor, 0.0)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.affine(a, -1.0, 1.0)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(T) -> T) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let shape = t.shape().to_vec();
        self.node(Tensor { shape, data }, op, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a), |x| x.exp())
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, Op::Ln(a), |x| x.ln())
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let (l, h) = (T::from_f64(lo), T::from_f64(hi));
        self.map(a, Op::Clamp(a, lo, hi), |x| x.max(l).min(h))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let out = if t.shape().len() <= 1 {
            super::softmax(t, 0)?
        } else {
            let (m, n) = dims(t);
            super::softmax(&t.clone().reshape(vec![m, n])?, 1)?.reshape(t.shape().to_vec())?
        };
        Ok(self.node(out, Op::Softmax(a), &[a]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = self.value(parts[0]).rows();
        if parts.iter().any(|&p| self.value(p).rows() != m) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let n: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.node(
            Tensor::new(vec![m, n], data)?,
            Op::ConcatCols(parts.to_vec()),
            parts,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.value(parts[0]).cols();
        if parts.iter().any(|&p| self.value(p).cols() != n) {
            return Err(Error::shape("concat_rows", "column counts differ"));
        }
        let mut data = Vec::new();
        let mut m = 0;
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
            m += self.value(p).rows();
        }
        Ok(self.node(
            Tensor::new(vec![m, n], data)?,
            Op::ConcatRows(parts.to_vec()),
            parts,
        ))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = dims(self.value(a));
        if start > end || end > n {
            return Err(Error::shape("slice_cols", format!("{start}..{end} of {n}")));
        }
        let t = self.value(a);
        let mut data = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            data.extend_from_slice(&t.row_slice(r)[start..end]);
        }
        Ok(self.node(
            Tensor::new(vec![m, end - start], data)?,
            Op::SliceCols(a, start, end),
            &[a],
        ))
    }

    /// Row `r` as a `[1, n]` tensor.
    pub fn row(&mut self, a: Var, r: usize) -> Result<Var> {
        let (m, _) = dims(self.value(a));
        if r >= m {
            return Err(Error::shape("row", format!("row {r} of {m}")));
        }
        let data = self.value(a).row_slice(r).to_vec();
        Ok(self.node(Tensor::row(data), Op::Row(a, r), &[a]))
    }

    /// Embedding lookup: rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (m, n) = dims(self.value(table));
        let mut data = Vec::with_capacity(ids.len() * n);
        for &i in ids {
            if i >= m {
                return Err(Error::shape("gather", format!("index {i} of {m} rows")));
            }
            data.extend_from_slice(self.value(table).row_slice(i));
        }
        Ok(self.node(
            Tensor::new(vec![ids.len(), n], data)?,
            Op::Gather(table, ids.to_vec()),
            &[table],
        ))
    }

    /// `out[index[i]] += a[i]` into a `[1, out_len]` row.
    pub fn scatter_add(&mut self, a: Var, index: &[usize], out_len: usize) -> Result<Var> {
        let t = self.value(a);
        if t.len() != index.len() {
            return Err(Error::LengthMismatch {
                context: "scatter_add",
                left: t.len(),
                right: index.len(),
            });
        }
        let mut data = vec![T::zero(); out_len];
        for (&v, &i) in t.data().iter().zip(index) {
            if i >= out_len {
                return Err(Error::shape("scatter_add", format!("index {i} of {out_len}")));
            }
            data[i] += v;
        }
        Ok(self.node(
            Tensor::row(data),
            Op::ScatterAdd(a, index.to_vec()),
            &[a],
        ))
    }

    /// Element at flat index `i`, as a scalar.
    pub fn pick(&mut self, a: Var, i: usize) -> Result<Var> {
        let t = self.value(a);
        if i >= t.len() {
            return Err(Error::shape("pick", format!("index {i} of {}", t.len())));
        }
        let v = t.data()[i];
        Ok(self.node(Tensor::scalar(v), Op::Pick(a, i), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.node(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s: T = t.data().iter().copied().sum();
        let n = T::from_f64(t.len() as f64);
        self.node(Tensor::scalar(s / n), Op::Mean(a), &[a])
    }

    /// Fused LSTM nonlinearity. `gates` holds the `[1, 4h]` pre-activations
    /// in input, forget, candidate, output order; returns `[1, 2h]` = `[h, c]`.
    pub fn lstm_gates(&mut self, gates: Var, c_prev: Var) -> Result<Var> {
        let h = self.value(c_prev).len();
        if self.value(gates).len() != 4 * h {
            return Err(Error::shape(
                "lstm gates",
                format!("{} pre-activations for hidden size {h}", self.value(gates).len()),
            ));
        }
        let z = self.value(gates).data();
        let cp = self.value(c_prev).data();
        let mut out = vec![T::zero(); 2 * h];
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            let c = f * cp[k] + i * g;
            out[h + k] = c;
            out[k] = o * c.tanh();
        }
        Ok(self.node(Tensor::row(out), Op::LstmGates(gates, c_prev), &[gates, c_prev]))
    }

    /// Accumulates d`loss`/d`param` for every trainable parameter reached.
    /// Calling twice without clearing `grads` sums the two results.
    pub fn backward(&self, loss: Var, grads: &mut Grads<T>) -> Result<()> {
        let node_grads = self.node_grads(loss)?;
        for (idx, op) in self.ops.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (op, &node_grads[idx]) {
                if grads.len() <= id.0 {
                    return Err(Error::OptimizerUninitialized(grads.len()));
                }
                grads.accumulate(*id, self.values[idx].shape(), g);
            }
        }
        Ok(())
    }

    fn node_grads(&self, loss: Var) -> Result<Vec<Option<Vec<T>>>> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.ops.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.needs_grad[idx] {
                continue;
            }
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(grads)
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
        if !self.needs_grad[v.0] {
            return None;
        }
        let n = self.values[v.0].len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn backprop_node(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = self.values[idx].data();
        match &self.ops[idx] {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims(self.value(*a));
                let n = self.value(*b).cols();
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let mut s = T::zero();
                            for (&x, &y) in grow.iter().zip(brow) {
                                s += x * y;
                            }
                            ga[i * k + p] += s;
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ad[i * k + p];
                            if av == T::zero() {
                                continue;
                            }
                            let gbrow = &mut gb[p * n..(p + 1) * n];
                            for (o, &x) in gbrow.iter_mut().zip(grow) {
                                *o += av * x;
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let (m, n) = dims(self.value(*a));
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.acc(grads, v) {
                        add_into(gv, g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for (o, &x) in gb.iter_mut().zip(g) {
                        *o -= x;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                if let Some(ga) = self.acc(grads, *a) {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(bd) {
                        *o += x * y;
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for ((o, &x), &y) in gb.iter_mut().zip(g).zip(ad) {
                        *o += x * y;
                    }
                }
            }
            Op::AddRow(a, bias) => {
                if let Some(ga) = self.acc(grads, *a) {
                    add_into(ga, g);
                }
                let n = self.value(*bias).len();
                if let Some(gb) = self.acc(grads, *bias) {
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                }
            }
            Op::ScaleBy(s, a) => {
                let sv = self.value(*s).data()[0];
                let ad = self.value(*a).data();
                if let Some(gs) = self.acc(grads, *s) {
                    let mut d = T::zero();
                    for (&x, &y) in g.iter().zip(ad) {
                        d += x * y;
                    }
                    gs[0] += d;
                }
                if let Some(ga) = self.acc(grads, *a) {
                    for (o, &x) in ga.iter_mut().zip(g) {
                        *o += x * sv;
                    }
                }
            }
            Op::DivBy(a, s) => {
                let sv = self.value(*s).data()[0];
                if let Some(ga) = self.acc(grads, *a) {
                    for (o, &x) in ga.iter_mut().zip(g) {
                        *o += x / sv;
                    }
                }
                if let Some(gs) = self.acc(grads, *s) {
                    // d(a/s)/ds = -a/s^2 = -out/s
                    let mut d = T::zero();
                    for (&x, &y) in g.iter().zip(out) {
                        d += x * y;
                    }
                    gs[0] -= d / sv;
                }
            }
            Op::Affine(a, scale) => {
                let sc = T::from_f64(*scale);
                if let Some(ga) = self.acc(grads, *a) {
                    for (o, &x) in ga.iter_mut().zip(g) {
                        *o += x * sc;
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                        *o += x * y * (T::one() - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                        *o += x * (T::one() - y * y);
                    }
                }
            }
            Op::Exp(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                        *o += x * y;
                    }
                }
            }
            Op::Ln(a) => {
                let ad = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(ad) {
                        *o += x / y;
                    }
                }
            }
            Op::Clamp(a, lo, hi) => {
                let (l, h) = (T::from_f64(*lo), T::from_f64(*hi));
                let ad = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(ad) {
                        if y >= l && y <= h {
                            *o += x;
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                let n = self.value(*a).cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((grow, yrow), orow) in g.chunks(n).zip(out.chunks(n)).zip(ga.chunks_mut(n)) {
                        let mut dot = T::zero();
                        for (&x, &y) in grow.iter().zip(yrow) {
                            dot += x * y;
                        }
                        for ((o, &x), &y) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += y * (x - dot);
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let n_out = self.values[idx].cols();
                let m = self.values[idx].rows();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if let Some(gp) = self.acc(grads, p) {
                        for r in 0..m {
                            add_into(
                                &mut gp[r * w..(r + 1) * w],
                                &g[r * n_out + offset..r * n_out + offset + w],
                            );
                        }
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if let Some(gp) = self.acc(grads, p) {
                        add_into(gp, &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::SliceCols(a, start, end) => {
                let (m, n) = dims(self.value(*a));
                let w = end - start;
                if let Some(ga) = self.acc(grads, *a) {
                    for r in 0..m {
                        add_into(&mut ga[r * n + start..r * n + end], &g[r * w..(r + 1) * w]);
                    }
                }
            }
            Op::Row(a, r) => {
                let n = self.value(*a).cols();
                if let Some(ga) = self.acc(grads, *a) {
                    add_into(&mut ga[r * n..(r + 1) * n], g);
                }
            }
            Op::Gather(table, ids) => {
                let n = self.value(*table).cols();
                if let Some(gt) = self.acc(grads, *table) {
                    for (k, &i) in ids.iter().enumerate() {
                        add_into(&mut gt[i * n..(i + 1) * n], &g[k * n..(k + 1) * n]);
                    }
                }
            }
            Op::ScatterAdd(a, index) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for (o, &i) in ga.iter_mut().zip(index) {
                        *o += g[i];
                    }
                }
            }
            Op::Pick(a, i) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga[*i] += g[0];
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for o in ga.iter_mut() {
                        *o += g[0];
                    }
                }
            }
            Op::Mean(a) => {
                let n = T::from_f64(self.value(*a).len() as f64);
                if let Some(ga) = self.acc(grads, *a) {
                    for o in ga.iter_mut() {
                        *o += g[0] / n;
                    }
                }
            }
            Op::LstmGates(gates, c_prev) => {
                let h = self.value(*c_prev).len();
                let z = self.value(*gates).data();
                let cp = self.value(*c_prev).data();
                let mut dz = vec![T::zero(); 4 * h];
                let mut dcp = vec![T::zero(); h];
                let one = T::one();
                for k in 0..h {
                    let i = sigmoid(z[k]);
                    let f = sigmoid(z[h + k]);
                    let gg = z[2 * h + k].tanh();
                    let o = sigmoid(z[3 * h + k]);
                    let c = out[h + k];
                    let tc = c.tanh();
                    let dh = g[k];
                    let dc = g[h + k] + dh * o * (one - tc * tc);
                    dz[k] = dc * gg * i * (one - i);
                    dz[h + k] = dc * cp[k] * f * (one - f);
                    dz[2 * h + k] = dc * i * (one - gg * gg);
                    dz[3 * h + k] = dh * tc * o * (one - o);
                    dcp[k] = dc * f;
                }
                if let Some(gz) = self.acc(grads, *gates) {
                    add_into(gz, &dz);
                }
                if let Some(gc) = self.acc(grads, *c_prev) {
                    add_into(gc, &dcp);
                }
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Trainable;

    fn store_with(values: &[(&str, Vec<usize>, Vec<f64>)]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        for (name, shape, data) in values {
            s.add(name, Tensor::new(shape.clone(), data.clone()).unwrap(), Trainable::All)
                .unwrap();
        }
        s
    }

    #[test]
    fn sum_has_unit_gradient() {
        let store = store_with(&[("w", vec![2, 3], vec![0.5; 6])]);
        let mut g = Graph::with_params(&store);
        let w = g.param(ParamId(0));
        let loss = g.sum(w);
        let mut grads = Grads::for_store(&store);
        g.backward(loss, &mut grads).unwrap();
        assert_eq!(grads.get(ParamId(0)).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn square_has_gradient_two_w() {
        let data = vec![1.0, -2.0, 3.5];
        let store = store_with(&[("w", vec![3], data.clone())]);
        let mut g = Graph::with_params(&store);
        let w = g.param(ParamId(0));
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum(sq);
        let mut grads = Grads::for_store(&store);
        g.backward(loss, &mut grads).unwrap();
        let expect: Vec<f64> = data.iter().map(|v| 2.0 * v).collect();
        assert_eq!(grads.get(ParamId(0)).unwrap().data(), expect.as_slice());

        // a second call accumulates
        g.backward(loss, &mut grads).unwrap();
        let doubled: Vec<f64> = expect.iter().map(|v| 2.0 * v).collect();
        assert_eq!(grads.get(ParamId(0)).unwrap().data(), doubled.as_slice());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let store = store_with(&[("w", vec![2], vec![1.0, 2.0])]);
        let mut g = Graph::with_params(&store);
        let w = g.param(ParamId(0));
        let mut grads = Grads::for_store(&store);
        assert!(matches!(
            g.backward(w, &mut grads),
            Err(Error::NonScalarLoss(_))
        ));
    }

    #[test]
    fn frozen_parameters_get_no_gradient() {
        let mut store = store_with(&[("w", vec![2], vec![1.0, 2.0])]);
        store.set_trainable(ParamId(0), Trainable::Frozen);
        let mut g = Graph::with_params(&store);
        let w = g.param(ParamId(0));
        let loss = g.sum(w);
        let mut grads = Grads::for_store(&store);
        g.backward(loss, &mut grads).unwrap();
        assert!(grads.get(ParamId(0)).is_none());
    }

    #[test]
    fn matmul_matches_hand_product() {
        let mut g: Graph<f64> = Graph::new();
        let a = g.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = g.constant(Tensor::new(vec![2, 1], vec![5.0, 6.0]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[17.0, 39.0]);
        assert!(g.matmul(b, b).is_err());
    }
}
