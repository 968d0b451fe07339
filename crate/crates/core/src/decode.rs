//! Penalized beam search.
//!
//! Hypotheses are ranked by `log p(y|x) / lp(|y|) − cp(history)`, both while
//! pruning the beam and when choosing among finished outputs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bottom_up::{CopyWeights, MaskConfig};
use crate::corpus::{Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::summarizer::{Encoded, ExtendedVocabExample, Summarizer};
use crate::tensor::{Graph, ParamStore, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub beam: usize,
    pub alpha: f64,
    pub beta: f64,
    pub min_length: usize,
    pub max_length: usize,
    pub block_trigrams: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            beam: 5,
            alpha: 1.0,
            beta: 10.0,
            min_length: 35,
            max_length: 100,
            block_trigrams: true,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam == 0 {
            return Err(Error::InvalidArgument("beam size must be at least 1".into()));
        }
        if self.min_length > self.max_length || self.max_length == 0 {
            return Err(Error::InvalidArgument(format!(
                "need min length ({}) <= max length ({}) and max length >= 1",
                self.min_length, self.max_length
            )));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument("alpha and beta must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `(5 + len)^α / 6^α`
pub fn length_penalty(len: usize, alpha: f64) -> f64 {
    ((5.0 + len as f64) / 6.0).powf(alpha)
}

/// Penalty magnitude `β · (Σ_i max(1, Σ_j a_i^j) − n)`, always ≥ 0.
pub fn coverage_penalty(history: &[Vec<f64>], beta: f64) -> Result<f64> {
    let Some(first) = history.first() else {
        return Ok(0.0);
    };
    let n = first.len();
    let mut columns = vec![0.0; n];
    for a in history {
        if a.len() != n {
            return Err(Error::LengthMismatch {
                context: "attention history",
                left: a.len(),
                right: n,
            });
        }
        for (c, v) in columns.iter_mut().zip(a) {
            *c += v;
        }
    }
    Ok(coverage_from_columns(&columns, beta))
}

fn coverage_from_columns(columns: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    beta * columns.iter().map(|&c| c.max(1.0) - 1.0).sum::<f64>()
}

/// `logprob / lp(len) − cp(history)`
pub fn hypothesis_score(logprob: f64, len: usize, history: &[Vec<f64>], alpha: f64, beta: f64) -> Result<f64> {
    Ok(logprob / length_penalty(len, alpha) - coverage_penalty(history, beta)?)
}

/// False iff appending `candidate` repeats a trigram already in `tokens`.
pub fn trigram_allows(tokens: &[usize], candidate: usize) -> bool {
    let n = tokens.len();
    if n < 2 {
        return true;
    }
    let (a, b) = (tokens[n - 2], tokens[n - 1]);
    !tokens.windows(3).any(|w| w == [a, b, candidate])
}

/// True if some trigram occurs twice.
pub fn has_repeated_trigram(tokens: &[usize]) -> bool {
    let mut seen = std::collections::HashSet::new();
    tokens.windows(3).any(|w| !seen.insert(w))
}

/// A decoder that can be stepped one token at a time.
pub trait StepModel {
    type State: Clone;

    fn initial_state(&self) -> Result<Self::State>;

    /// Log-probabilities over the output vocabulary and the attention over
    /// source positions for the token following `prev`.
    fn step(&self, state: &Self::State, prev: usize) -> Result<(Self::State, Vec<f64>, Vec<f64>)>;
}

#[derive(Debug, Clone)]
struct Hypothesis<S> {
    tokens: Vec<usize>,
    logprob: f64,
    state: S,
    /// running attention column sums
    coverage: Vec<f64>,
    history: Vec<Vec<f64>>,
    score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    /// Emitted tokens without the final EOS.
    pub tokens: Vec<usize>,
    pub score: f64,
    pub logprob: f64,
    pub finished: bool,
    /// One attention vector per decoding step (including the EOS step).
    pub attention: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn rank<S>(a: &Hypothesis<S>, b: &Hypothesis<S>) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

pub fn beam_search<M: StepModel>(model: &M, cfg: &InferenceConfig) -> Result<BeamOutput> {
    cfg.validate()?;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        state: model.initial_state()?,
        coverage: Vec::new(),
        history: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<Hypothesis<M::State>> = Vec::new();
    for _ in 0..cfg.max_length {
        let mut expansions = Vec::with_capacity(live.len());
        let mut candidates: Vec<(usize, usize, f64, f64)> = Vec::new();
        for (h, hyp) in live.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let (state, logprobs, attention) = model.step(&hyp.state, prev)?;
            let mut coverage = if hyp.coverage.is_empty() {
                vec![0.0; attention.len()]
            } else {
                hyp.coverage.clone()
            };
            if coverage.len() != attention.len() {
                return Err(Error::LengthMismatch {
                    context: "attention history",
                    left: attention.len(),
                    right: coverage.len(),
                });
            }
            coverage.iter_mut().zip(&attention).for_each(|(c, a)| *c += a);
            let cp = coverage_from_columns(&coverage, cfg.beta);
            let lp = length_penalty(hyp.tokens.len() + 1, cfg.alpha);
            for (tok, &l) in logprobs.iter().enumerate() {
                if l == f64::NEG_INFINITY || l.is_nan() {
                    continue;
                }
                if tok == EOS && hyp.tokens.len() < cfg.min_length {
                    continue;
                }
                if cfg.block_trigrams && !trigram_allows(&hyp.tokens, tok) {
                    continue;
                }
                let logprob = hyp.logprob + l;
                candidates.push((h, tok, logprob, logprob / lp - cp));
            }
            expansions.push((state, coverage, attention));
        }
        let sequence = |c: &(usize, usize, f64, f64)| live[c.0].tokens.iter().copied().chain(std::iter::once(c.1));
        candidates.sort_by(|a, b| b.3.total_cmp(&a.3).then_with(|| sequence(a).cmp(sequence(b))));
        let mut next = Vec::with_capacity(cfg.beam);
        for &(h, tok, logprob, score) in candidates.iter().take(cfg.beam) {
            let parent = &live[h];
            let (state, coverage, attention) = &expansions[h];
            let mut tokens = parent.tokens.clone();
            tokens.push(tok);
            let mut history = parent.history.clone();
            history.push(attention.clone());
            let hyp = Hypothesis {
                tokens,
                logprob,
                state: state.clone(),
                coverage: coverage.clone(),
                history,
                score,
            };
            if tok == EOS {
                finished.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;
        if live.is_empty() || finished.len() >= cfg.beam {
            break;
        }
    }
    let mut warnings = Vec::new();
    let (best, done) = if let Some(best) = finished.into_iter().min_by(rank) {
        (best, true)
    } else if let Some(best) = live.into_iter().min_by(rank) {
        let w = "no hypothesis finished before the length limit; returning the best unfinished one".to_string();
        log::warn!("{w}");
        warnings.push(w);
        (best, false)
    } else {
        return Err(Error::InvalidArgument("every expansion was pruned".into()));
    };
    let mut tokens = best.tokens;
    if done {
        tokens.pop();
    }
    Ok(BeamOutput {
        tokens,
        score: best.score,
        logprob: best.logprob,
        finished: done,
        attention: best.history,
        warnings,
    })
}

/// Steps a trained pointer-generator for one source document.
pub struct PointerGeneratorStepper<'a> {
    model: &'a Summarizer,
    store: &'a ParamStore<f32>,
    ex: &'a ExtendedVocabExample,
    weights: CopyWeights,
    states: Tensor<f32>,
    keys: Tensor<f32>,
    h0: Tensor<f32>,
    c0: Tensor<f32>,
}

impl<'a> PointerGeneratorStepper<'a> {
    pub fn new(
        model: &'a Summarizer,
        store: &'a ParamStore<f32>,
        ex: &'a ExtendedVocabExample,
        weights: CopyWeights,
    ) -> Result<Self> {
        let mut g = Graph::with_params(store);
        let enc = model.pg.encode(&mut g, ex)?;
        Ok(Self {
            model,
            store,
            ex,
            weights,
            states: g.value(enc.states).clone(),
            keys: g.value(enc.keys()).clone(),
            h0: g.value(enc.h0).clone(),
            c0: g.value(enc.c0).clone(),
        })
    }
}

impl StepModel for PointerGeneratorStepper<'_> {
    type State = (Tensor<f32>, Tensor<f32>);

    fn initial_state(&self) -> Result<Self::State> {
        Ok((self.h0.clone(), self.c0.clone()))
    }

    fn step(&self, state: &Self::State, prev: usize) -> Result<(Self::State, Vec<f64>, Vec<f64>)> {
        let mut g = Graph::with_params(self.store);
        let enc = Encoded::from_parts(
            g.constant(self.states.clone()),
            g.constant(self.keys.clone()),
            g.constant(state.0.clone()),
            g.constant(state.1.clone()),
        );
        let step = self.model.pg.decode_step(&mut g, &enc, self.ex, prev, enc.h0, enc.c0, &self.weights)?;
        let logprobs = g.value(step.joint).data().iter().map(|&p| (p as f64).ln()).collect();
        let attention = g.value(step.attention).to_f64_vec();
        Ok(((g.value(step.h).clone(), g.value(step.c).clone()), logprobs, attention))
    }
}

/// One decoded document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub id: String,
    pub summary: String,
    pub tokens: Vec<usize>,
    pub score: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub words: Vec<String>,
}

/// Decodes `source` with optional bottom-up masking.
pub fn summarize(
    model: &Summarizer,
    store: &ParamStore<f32>,
    vocab: &Vocabulary,
    id: &str,
    source: &[crate::corpus::Token],
    cfg: &InferenceConfig,
    mask: Option<&MaskConfig>,
    q: Option<&[f64]>,
) -> Result<Decoded> {
    let ex = ExtendedVocabExample::new(vocab, source, &[])?;
    let (weights, mut warnings) = model.inference_weights(store, &ex, mask, q)?;
    let stepper = PointerGeneratorStepper::new(model, store, &ex, weights)?;
    let out = beam_search(&stepper, cfg)?;
    warnings.extend(out.warnings);
    let words: Vec<String> = out.tokens.iter().map(|&t| ex.token(vocab, t).to_string()).collect();
    Ok(Decoded {
        id: id.to_string(),
        summary: words.join(" "),
        tokens: out.tokens,
        score: out.score,
        warnings,
        words,
    })
}

/// Exhaustive search over every sequence of up to `max_length` steps, using
/// the same constraints and ranking as [`beam_search`]. Exponential; only for
/// checking the beam on toy models.
pub fn exhaustive_search<M: StepModel>(model: &M, cfg: &InferenceConfig) -> Result<BeamOutput> {
    struct Best {
        tokens: Vec<usize>,
        score: f64,
        logprob: f64,
        history: Vec<Vec<f64>>,
    }
    fn better(score: f64, tokens: &[usize], best: &Option<Best>) -> bool {
        match best {
            None => true,
            Some(b) => score > b.score || (score == b.score && tokens < b.tokens.as_slice()),
        }
    }
    #[allow(clippy::too_many_arguments)]
    fn walk<M: StepModel>(
        model: &M,
        cfg: &InferenceConfig,
        state: &M::State,
        tokens: &mut Vec<usize>,
        logprob: f64,
        history: &mut Vec<Vec<f64>>,
        finished: &mut Option<Best>,
        unfinished: &mut Option<Best>,
    ) -> Result<()> {
        let prev = tokens.last().copied().unwrap_or(BOS);
        let (next, logprobs, attention) = model.step(state, prev)?;
        history.push(attention);
        for (tok, &l) in logprobs.iter().enumerate() {
            if l == f64::NEG_INFINITY
                || (tok == EOS && tokens.len() < cfg.min_length)
                || (cfg.block_trigrams && !trigram_allows(tokens, tok))
            {
                continue;
            }
            tokens.push(tok);
            let lp = logprob + l;
            let score = hypothesis_score(lp, tokens.len(), history, cfg.alpha, cfg.beta)?;
            if tok == EOS {
                if better(score, tokens, finished) {
                    *finished = Some(Best {
                        tokens: tokens.clone(),
                        score,
                        logprob: lp,
                        history: history.clone(),
                    });
                }
            } else if tokens.len() == cfg.max_length {
                if better(score, tokens, unfinished) {
                    *unfinished = Some(Best {
                        tokens: tokens.clone(),
                        score,
                        logprob: lp,
                        history: history.clone(),
                    });
                }
            } else {
                walk(model, cfg, &next, tokens, lp, history, finished, unfinished)?;
            }
            tokens.pop();
        }
        history.pop();
        Ok(())
    }
    cfg.validate()?;
    let (mut finished, mut unfinished) = (None, None);
    let state = model.initial_state()?;
    walk(model, cfg, &state, &mut Vec::new(), 0.0, &mut Vec::new(), &mut finished, &mut unfinished)?;
    let (best, done) = match (finished, unfinished) {
        (Some(b), _) => (b, true),
        (None, Some(b)) => (b, false),
        (None, None) => return Err(Error::InvalidArgument("every expansion was pruned".into())),
    };
    let mut tokens = best.tokens;
    if done {
        tokens.pop();
    }
    Ok(BeamOutput {
        tokens,
        score: best.score,
        logprob: best.logprob,
        finished: done,
        attention: best.history,
        warnings: Vec::new(),
    })
}

/// A hand-set decoder: distributions depend only on the emitted prefix.
/// Attention is over `source_len` positions and also depends on the prefix.
#[derive(Debug, Clone)]
pub struct TableModel {
    pub vocab: usize,
    pub source_len: usize,
    pub seed: u64,
}

impl TableModel {
    fn hash(&self, prefix: &[usize], salt: u64) -> u64 {
        let mut h = self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for &t in prefix {
            h ^= (t as u64).wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
            h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        }
        h ^ (h >> 31)
    }

    fn weights(&self, prefix: &[usize], n: usize, salt: u64) -> Vec<f64> {
        let raw: Vec<f64> = (0..n)
            .map(|i| {
                let h = self.hash(prefix, salt.wrapping_add(i as u64 * 7919));
                0.05 + (h % 1000) as f64 / 1000.0
            })
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

impl StepModel for TableModel {
    /// Emitted prefix, `None` before the first step.
    type State = Option<Vec<usize>>;

    fn initial_state(&self) -> Result<Self::State> {
        Ok(None)
    }

    fn step(&self, state: &Self::State, prev: usize) -> Result<(Self::State, Vec<f64>, Vec<f64>)> {
        let prefix = match state {
            None => Vec::new(),
            Some(p) => {
                let mut p = p.clone();
                p.push(prev);
                p
            }
        };
        let probs = self.weights(&prefix, self.vocab, 1);
        let attention = self.weights(&prefix, self.source_len, 2);
        // sharpen attention so columns can exceed 1 within a few steps
        let attention = crate::bottom_up::normalize(&attention.iter().map(|a| a.powi(4)).collect::<Vec<_>>());
        Ok((Some(prefix), probs.iter().map(|p| p.ln()).collect(), attention))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_penalty_examples() {
        assert_eq!(length_penalty(1, 0.7), 1.0);
        assert_eq!(length_penalty(40, 0.0), 1.0);
        assert!((length_penalty(7, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_examples() {
        let under = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 0.0]];
        assert_eq!(coverage_penalty(&under, 10.0).unwrap(), 0.0);
        let over = vec![vec![0.9, 0.1], vec![0.6, 0.2]];
        assert!((coverage_penalty(&over, 10.0).unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(coverage_penalty(&over, 0.0).unwrap(), 0.0);
        assert!(coverage_penalty(&[vec![1.0], vec![0.5, 0.5]], 1.0).is_err());
    }

    #[test]
    fn score_examples() {
        let h = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(hypothesis_score(-4.2, 3, &h, 0.0, 0.0).unwrap(), -4.2);
        assert!((hypothesis_score(-6.0, 7, &[], 1.0, 0.0).unwrap() + 3.0).abs() < 1e-12);
        assert!(hypothesis_score(-6.0, 2, &h, 0.0, 10.0).unwrap() < -6.0);
    }

    #[test]
    fn trigram_examples() {
        let (a, b, c, d) = (10, 11, 12, 13);
        assert!(!trigram_allows(&[a, b, c, a, b], c));
        assert!(trigram_allows(&[a, b, c, a, b], d));
        assert!(trigram_allows(&[a], a));
        assert!(trigram_allows(&[], a));
    }

    fn toy(vocab: usize, seed: u64) -> TableModel {
        TableModel {
            vocab,
            source_len: 3,
            seed,
        }
    }

    #[test]
    fn beam_one_is_greedy() {
        let m = toy(6, 4);
        let cfg = InferenceConfig {
            beam: 1,
            alpha: 0.0,
            beta: 0.0,
            min_length: 0,
            max_length: 6,
            block_trigrams: false,
        };
        let out = beam_search(&m, &cfg).unwrap();
        let mut state = m.initial_state().unwrap();
        let mut prev = BOS;
        let mut greedy = Vec::new();
        for _ in 0..6 {
            let (next, lp, _) = m.step(&state, prev).unwrap();
            let best = (0..lp.len()).max_by(|&a, &b| lp[a].total_cmp(&lp[b]).then(b.cmp(&a))).unwrap();
            if best == EOS {
                break;
            }
            greedy.push(best);
            state = next;
            prev = best;
        }
        assert_eq!(out.tokens, greedy);
    }

    #[test]
    fn min_length_is_respected() {
        for seed in 0..20 {
            let cfg = InferenceConfig {
                beam: 3,
                alpha: 1.0,
                beta: 0.0,
                min_length: 4,
                max_length: 8,
                block_trigrams: true,
            };
            let out = beam_search(&toy(5, seed), &cfg).unwrap();
            assert!(out.tokens.len() >= 4);
        }
    }

    #[test]
    fn unfinished_fallback_warns() {
        // EOS never allowed within the horizon
        let cfg = InferenceConfig {
            beam: 2,
            alpha: 0.0,
            beta: 0.0,
            min_length: 3,
            max_length: 3,
            block_trigrams: false,
        };
        let out = beam_search(&toy(5, 1), &cfg).unwrap();
        assert!(!out.finished);
        assert_eq!(out.tokens.len(), 3);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn beam_matches_exhaustive_on_small_toys() {
        for seed in 0..30 {
            for (alpha, beta) in [(0.0, 0.0), (1.0, 0.0), (0.0, 10.0), (1.0, 10.0)] {
                let cfg = InferenceConfig {
                    beam: 64,
                    alpha,
                    beta,
                    min_length: 0,
                    max_length: 3,
                    block_trigrams: true,
                };
                let m = toy(4, seed);
                let a = beam_search(&m, &cfg).unwrap();
                let b = exhaustive_search(&m, &cfg).unwrap();
                assert_eq!(a.tokens, b.tokens, "seed {seed} alpha {alpha} beta {beta}");
                assert!((a.score - b.score).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = InferenceConfig {
            beam: 4,
            min_length: 2,
            max_length: 10,
            ..Default::default()
        };
        let m = toy(7, 9);
        assert_eq!(beam_search(&m, &cfg).unwrap(), beam_search(&m, &cfg).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn blocking_never_repeats(seed in 0u64..500, beam in 1usize..5) {
            let cfg = InferenceConfig { beam, alpha: 1.0, beta: 0.0, min_length: 8, max_length: 14, block_trigrams: true };
            let out = beam_search(&toy(5, seed), &cfg).unwrap();
            proptest::prop_assert!(!has_repeated_trigram(&out.tokens));
        }

        #[test]
        fn coverage_never_decreases(
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 1..8),
            beta in 0.0f64..20.0,
        ) {
            let mut prev = 0.0;
            for k in 1..=rows.len() {
                let cp = coverage_penalty(&rows[..k], beta).unwrap();
                proptest::prop_assert!(cp >= prev - 1e-12);
                prev = cp;
            }
        }
    }
}
