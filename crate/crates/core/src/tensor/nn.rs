use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Initialization range for every weight matrix; biases start at zero.
pub(crate) const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_uniform(&format!("{name}.weight"), &[input, output], INIT_SCALE, rng)?;
        let bias = if bias {
            Some(store.add_zeros(&format!("{name}.bias"), &[output])?)
        } else {
            None
        };
        Ok(Self { weight, bias })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// One LSTM direction: `gates = x·W_ih + h·W_hh + b`, gate order i, f, g, o.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            w_ih: store.add_uniform(&format!("{name}.w_ih"), &[input, 4 * hidden], INIT_SCALE, rng)?,
            w_hh: store.add_uniform(&format!("{name}.w_hh"), &[hidden, 4 * hidden], INIT_SCALE, rng)?,
            bias: store.add_zeros(&format!("{name}.bias"), &[4 * hidden])?,
            input,
            hidden,
        })
    }
}

fn check_width<T: Real>(g: &Graph<'_, T>, v: Var, name: &str, width: usize) -> Result<()> {
    let t = g.value(v);
    if t.rows() != 1 || t.cols() != width {
        return Err(Error::shape(
            format!("lstm cell input `{name}`"),
            format!("expected [1, {width}], got {:?}", t.shape()),
        ));
    }
    Ok(())
}

/// Single LSTM step. Returns `(h, c)` as `[1, hidden]` rows.
pub fn lstm_cell_forward<T: Real>(
    g: &mut Graph<'_, T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmParams,
) -> Result<(Var, Var)> {
    check_width(g, x, "x", p.input)?;
    check_width(g, h_prev, "h_prev", p.hidden)?;
    check_width(g, c_prev, "c_prev", p.hidden)?;
    let w_ih = g.param(p.w_ih);
    let w_hh = g.param(p.w_hh);
    let b = g.param(p.bias);
    let xi = g.matmul(x, w_ih)?;
    let hh = g.matmul(h_prev, w_hh)?;
    let z = g.add(xi, hh)?;
    let z = g.add_row(z, b)?;
    split_state(g, z, c_prev, p.hidden)
}

fn split_state<T: Real>(g: &mut Graph<'_, T>, z: Var, c_prev: Var, hidden: usize) -> Result<(Var, Var)> {
    let hc = g.lstm_gates(z, c_prev)?;
    let h = g.slice_cols(hc, 0, hidden)?;
    let c = g.slice_cols(hc, hidden, 2 * hidden)?;
    Ok((h, c))
}

/// Per-position outputs of a recurrent pass plus the final states.
#[derive(Debug, Clone)]
pub struct SequenceStates {
    /// `[n, hidden]` (or `[n, 2*hidden]` for bidirectional passes).
    pub outputs: Var,
    pub final_h: Var,
    pub final_c: Var,
}

impl LstmParams {
    /// Runs over the rows of `inputs` (`[n, input]`), optionally right to left.
    /// Outputs are always returned in source order.
    pub fn run<T: Real>(&self, g: &mut Graph<'_, T>, inputs: Var, reverse: bool) -> Result<SequenceStates> {
        let n = g.value(inputs).rows();
        if g.value(inputs).cols() != self.input {
            return Err(Error::shape(
                "lstm inputs",
                format!("expected width {}, got {:?}", self.input, g.value(inputs).shape()),
            ));
        }
        if n == 0 {
            return Err(Error::EmptyInput("lstm sequence"));
        }
        let w_ih = g.param(self.w_ih);
        let w_hh = g.param(self.w_hh);
        let b = g.param(self.bias);
        let projected = g.matmul(inputs, w_ih)?;
        let projected = g.add_row(projected, b)?;
        let mut h = g.constant(Tensor::zeros(&[1, self.hidden]));
        let mut c = g.constant(Tensor::zeros(&[1, self.hidden]));
        let mut outs = vec![h; n];
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for t in order {
            let xz = g.row(projected, t)?;
            let hz = g.matmul(h, w_hh)?;
            let z = g.add(xz, hz)?;
            let (nh, nc) = split_state(g, z, c, self.hidden)?;
            h = nh;
            c = nc;
            outs[t] = h;
        }
        let outputs = g.concat_rows(&outs)?;
        Ok(SequenceStates {
            outputs,
            final_h: h,
            final_c: c,
        })
    }
}

/// A bidirectional layer; outputs are `[forward, backward]` concatenated per position.
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

pub struct BiStates {
    pub outputs: Var,
    pub forward: SequenceStates,
    pub backward: SequenceStates,
}

impl BiLstm {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            forward: LstmParams::new(store, &format!("{name}.fwd"), input, hidden, rng)?,
            backward: LstmParams::new(store, &format!("{name}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn run<T: Real>(&self, g: &mut Graph<'_, T>, inputs: Var) -> Result<BiStates> {
        let forward = self.forward.run(g, inputs, false)?;
        let backward = self.backward.run(g, inputs, true)?;
        let outputs = g.concat_cols(&[forward.outputs, backward.outputs])?;
        Ok(BiStates {
            outputs,
            forward,
            backward,
        })
    }
}

/// Inverted dropout; the identity when `rate` is zero.
pub fn dropout<T: Real, R: Rng>(g: &mut Graph<'_, T>, x: Var, rate: f64, rng: &mut R) -> Result<Var> {
    if rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - rate;
    let shape = g.value(x).shape().to_vec();
    let mask: Vec<T> = (0..g.value(x).len())
        .map(|_| {
            if rng.gen::<f64>() < keep {
                T::from_f64(1.0 / keep)
            } else {
                T::zero()
            }
        })
        .collect();
    let m = g.constant(Tensor::new(shape, mask)?);
    g.mul(x, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{sigmoid, Trainable};

    fn scalar_cell(store: &mut ParamStore<f64>, w_ih: [f64; 4], w_hh: [f64; 4], b: [f64; 4]) -> LstmParams {
        LstmParams {
            w_ih: store.add("w_ih", Tensor::new(vec![1, 4], w_ih.to_vec()).unwrap(), Trainable::All).unwrap(),
            w_hh: store.add("w_hh", Tensor::new(vec![1, 4], w_hh.to_vec()).unwrap(), Trainable::All).unwrap(),
            bias: store.add("b", Tensor::new(vec![4], b.to_vec()).unwrap(), Trainable::All).unwrap(),
            input: 1,
            hidden: 1,
        }
    }

    fn step(store: &ParamStore<f64>, p: &LstmParams, x: f64, h: f64, c: f64) -> (f64, f64) {
        let mut g = Graph::with_params(store);
        let x = g.constant_row(vec![x]);
        let h = g.constant_row(vec![h]);
        let c = g.constant_row(vec![c]);
        let (h, c) = lstm_cell_forward(&mut g, x, h, c, p).unwrap();
        (g.scalar(h).unwrap(), g.scalar(c).unwrap())
    }

    #[test]
    fn zero_cell_stays_zero() {
        let mut store = ParamStore::new();
        let p = scalar_cell(&mut store, [0.0; 4], [0.0; 4], [0.0; 4]);
        assert_eq!(step(&store, &p, 0.0, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut store = ParamStore::new();
        let p = scalar_cell(&mut store, [0.3, 0.0, 0.7, 0.2], [0.1, 0.0, -0.4, 0.5], [0.0, 50.0, 0.0, 0.0]);
        let (x, h, c) = (0.8, -0.3, 1.7);
        let (_, c_new) = step(&store, &p, x, h, c);
        let i = sigmoid(0.3 * x + 0.1 * h);
        let cand = (0.7 * x - 0.4 * h).tanh();
        assert!((c_new - (c + i * cand)).abs() < 1e-5);
    }

    #[test]
    fn scalar_cell_matches_hand_equations() {
        let mut store = ParamStore::new();
        let p = scalar_cell(&mut store, [0.5, -0.2, 0.9, 0.3], [0.4, 0.6, -0.7, 0.1], [0.1, 0.2, -0.1, 0.05]);
        let (x, h, c) = (1.0, 0.5, -0.25);
        let (h_new, c_new) = step(&store, &p, x, h, c);
        // five LSTM equations, scalar form
        let i = 1.0 / (1.0 + (-(0.5 * x + 0.4 * h + 0.1f64)).exp());
        let f = 1.0 / (1.0 + (-(-0.2 * x + 0.6 * h + 0.2f64)).exp());
        let gg = (0.9 * x - 0.7 * h - 0.1f64).tanh();
        let o = 1.0 / (1.0 + (-(0.3 * x + 0.1 * h + 0.05f64)).exp());
        let c_ref = f * c + i * gg;
        let h_ref = o * c_ref.tanh();
        assert!((c_new - c_ref).abs() < 1e-5);
        assert!((h_new - h_ref).abs() < 1e-5);
    }

    #[test]
    fn shape_error_names_tensor() {
        let mut store = ParamStore::new();
        let p = scalar_cell(&mut store, [0.0; 4], [0.0; 4], [0.0; 4]);
        let mut g = Graph::with_params(&store);
        let x = g.constant_row(vec![1.0, 2.0]);
        let h = g.constant_row(vec![0.0]);
        let c = g.constant_row(vec![0.0]);
        let err = lstm_cell_forward(&mut g, x, h, c, &p).unwrap_err().to_string();
        assert!(err.contains("`x`"), "{err}");
    }

    #[test]
    fn sequence_run_matches_stepwise_cells() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let p = LstmParams::new(&mut store, "l", 3, 2, &mut rng).unwrap();
        let xs = Tensor::new(vec![3, 3], (0..9).map(|v| v as f64 * 0.1 - 0.4).collect()).unwrap();

        let mut g = Graph::with_params(&store);
        let inp = g.constant(xs.clone());
        let seq = p.run(&mut g, inp, false).unwrap();
        let mut h = g.constant(Tensor::zeros(&[1, 2]));
        let mut c = g.constant(Tensor::zeros(&[1, 2]));
        for t in 0..3 {
            let x = g.constant_row(xs.row_slice(t).to_vec());
            (h, c) = lstm_cell_forward(&mut g, x, h, c, &p).unwrap();
        }
        let _ = c;
        let a = g.value(seq.final_h).data().to_vec();
        let b = g.value(h).data().to_vec();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
