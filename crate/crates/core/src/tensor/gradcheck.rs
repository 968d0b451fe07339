use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::{Grads, ParamStore, Trainable};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: (f64, f64),
}

fn evaluate<F>(store: &ParamStore<f64>, f: &F) -> Result<f64>
where
    F: for<'a> Fn(&mut Graph<'a, f64>) -> Result<Var>,
{
    let mut g = Graph::with_params(store);
    let loss = f(&mut g)?;
    g.scalar(loss)
}

/// Compares reverse-mode gradients of the scalar objective built by `f`
/// against the five-point central difference (fourth order in `eps`) on up to
/// `samples_per_param` random coordinates of every trainable parameter.
///
/// The error per coordinate is `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check<F>(
    store: &ParamStore<f64>,
    eps: f64,
    samples_per_param: usize,
    seed: u64,
    f: F,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a, f64>) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut grads = Grads::for_store(store);
    let base = {
        let mut g = Graph::with_params(store);
        let loss = f(&mut g)?;
        g.backward(loss, &mut grads)?;
        g.scalar(loss)?
    };
    let again = evaluate(store, &f)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::NonDeterministic {
            first: base,
            second: again,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        coordinates: 0,
        worst: None,
        worst_values: (0.0, 0.0),
    };
    for (id, entry) in store.iter() {
        let len = entry.value.len();
        let cols = entry.value.cols();
        let candidates: Vec<usize> = match &entry.trainable {
            Trainable::Frozen => continue,
            Trainable::All => (0..len).collect(),
            Trainable::Rows(rows) => (0..len).filter(|k| rows[k / cols]).collect(),
        };
        if candidates.is_empty() {
            continue;
        }
        let picks = sample(&mut rng, candidates.len(), samples_per_param.min(candidates.len()));
        for pick in picks.iter() {
            let k = candidates[pick];
            let original = entry.value.data()[k];
            let mut at = |offset: f64| {
                work.value_mut(id).data_mut()[k] = original + offset;
                evaluate(&work, &f)
            };
            let (p1, m1, p2, m2) = (at(eps)?, at(-eps)?, at(2.0 * eps)?, at(-2.0 * eps)?);
            work.value_mut(id).data_mut()[k] = original;

            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps);
            let analytic = grads.get(id).map_or(0.0, |t| t.data()[k]);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let err = (analytic - numeric).abs() / denom;
            report.coordinates += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((entry.name.clone(), k));
                report.worst_values = (analytic, numeric);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ParamId, Tensor};

    fn scalar_store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(v), Trainable::All).unwrap();
        s
    }

    #[test]
    fn quadratic_is_exact() {
        let store = scalar_store(3.0);
        let r = finite_difference_check(&store, 1e-3, 1, 0, |g| {
            let w = g.param(ParamId(0));
            g.mul(w, w)
        })
        .unwrap();
        assert!(r.max_relative_error <= 1e-5, "{r:?}");
    }

    #[test]
    fn constant_objective() {
        let store = scalar_store(3.0);
        let r = finite_difference_check(&store, 1e-3, 1, 0, |g| {
            let _ = g.param(ParamId(0));
            Ok(g.constant(Tensor::scalar(4.0)))
        })
        .unwrap();
        assert!(r.max_relative_error <= 1e-8);
    }

    #[test]
    fn detects_nondeterminism() {
        use std::cell::Cell;
        let store = scalar_store(1.0);
        let calls = Cell::new(0.0);
        let err = finite_difference_check(&store, 1e-3, 1, 0, |g| {
            calls.set(calls.get() + 1.0);
            let w = g.param(ParamId(0));
            Ok(g.affine(w, 1.0, calls.get()))
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }

    #[test]
    fn catches_a_wrong_gradient() {
        let store = scalar_store(0.5);
        let r = finite_difference_check(&store, 1e-4, 1, 0, |g| {
            let w = g.param(ParamId(0));
            let c = g.clamp(w, 0.0, 0.5);
            g.mul(c, c)
        })
        .unwrap();
        // at the clamp boundary the one-sided derivative disagrees with the central one
        assert!(r.max_relative_error > 1e-2);
    }
}
