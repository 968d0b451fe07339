//! Constraining the copy distribution with content-selection probabilities.
//!
//! Copy weights are adjusted per source position and pushed through the
//! pointer-generator mixture
//! `P(w) = p(copy)·Σ_{i: x_i = w} ã_i + (1 − p(copy))·P_gen(w)`.
//! Whenever the copy weights were altered by a mask, the joint distribution
//! over the extended vocabulary is renormalized, so λ re-weights copying
//! against generation instead of cancelling out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Token;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Real, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub epsilon: f64,
    pub lambda: f64,
}

impl MaskConfig {
    pub fn new(epsilon: f64, lambda: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { epsilon, lambda })
    }

    /// Like [`MaskConfig::new`] but accepts the degenerate `ε = 0`, under which
    /// every position with `q > 0` survives.
    pub fn with_zero_threshold(lambda: f64) -> Result<Self> {
        let mut cfg = Self::new(0.5, lambda)?;
        cfg.epsilon = 0.0;
        Ok(cfg)
    }

    pub fn is_eligible(&self, q: f64) -> bool {
        q > self.epsilon
    }
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.15,
            lambda: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    #[default]
    Baseline,
    /// Auxiliary loss pinning copy attention to aligned source positions.
    MaskOnly,
    /// Selector head on the shared encoder, trained jointly.
    MultiTask,
    /// Copy attention multiplied by a jointly trained selector's q.
    #[serde(rename = "diffmask")]
    DiffMask,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [Self::Baseline, Self::MaskOnly, Self::MultiTask, Self::DiffMask];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::MaskOnly => "mask-only",
            Self::MultiTask => "multi-task",
            Self::DiffMask => "diffmask",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown train mode {s:?} (baseline, mask-only, multi-task, diffmask)")))
    }
}

/// How copy attention is adjusted before entering the mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum CopyWeights {
    /// Raw attention; the mixture is already normalized.
    Identity,
    /// Fixed per-position multipliers (`λ` or `0` for a hard mask).
    Scale(Vec<f64>),
    /// Per-position multipliers living on the graph (`q` for the soft mask), shape `[1, n]`.
    Soft(Var),
}

/// Resolves a hard mask into per-position multipliers. When no position
/// clears the threshold the mask is disabled and a warning is returned.
pub fn resolve_hard_mask(q: &[f64], cfg: &MaskConfig) -> (CopyWeights, Option<String>) {
    if !q.iter().any(|&v| cfg.is_eligible(v)) {
        let warning = format!("no selection probability exceeds epsilon {}; mask disabled", cfg.epsilon);
        log::warn!("{warning}");
        return (CopyWeights::Identity, Some(warning));
    }
    let scale = q.iter().map(|&v| if cfg.is_eligible(v) { cfg.lambda } else { 0.0 }).collect();
    (CopyWeights::Scale(scale), None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCopy {
    /// `λ·a_i` where `q_i > ε`, else 0 (or `a` unchanged when the mask fell back).
    pub weights: Vec<f64>,
    pub fallback: bool,
}

fn check_lengths(context: &'static str, a: usize, q: usize) -> Result<()> {
    if a != q {
        return Err(Error::LengthMismatch { context, left: a, right: q });
    }
    Ok(())
}

pub fn hard_mask(a: &[f64], q: &[f64], cfg: &MaskConfig) -> Result<MaskedCopy> {
    check_lengths("hard mask", a.len(), q.len())?;
    Ok(match resolve_hard_mask(q, cfg) {
        (CopyWeights::Scale(s), _) => MaskedCopy {
            weights: a.iter().zip(&s).map(|(a, s)| a * s).collect(),
            fallback: false,
        },
        _ => MaskedCopy {
            weights: a.to_vec(),
            fallback: true,
        },
    })
}

pub fn soft_mask(a: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    check_lengths("soft mask", a.len(), q.len())?;
    Ok(a.iter().zip(q).map(|(a, q)| a * q).collect())
}

/// Rescales to unit sum; all-zero input is returned unchanged.
pub fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        v.to_vec()
    }
}

/// Plain-value mixture over the extended vocabulary of size `ext_size`.
pub fn mix_distribution(
    copy: &[f64],
    switch: f64,
    generation: &[f64],
    ext_ids: &[usize],
    ext_size: usize,
    renormalize: bool,
) -> Result<Vec<f64>> {
    check_lengths("occurrence map", copy.len(), ext_ids.len())?;
    if generation.len() > ext_size || ext_ids.iter().any(|&i| i >= ext_size) {
        return Err(Error::InvalidArgument("extended vocabulary smaller than its ids".into()));
    }
    let mut joint = vec![0.0; ext_size];
    for (w, p) in joint.iter_mut().zip(generation) {
        *w = (1.0 - switch) * p;
    }
    for (&id, &a) in ext_ids.iter().zip(copy) {
        joint[id] += switch * a;
    }
    Ok(if renormalize { normalize(&joint) } else { joint })
}

/// Graph form of the mixture: `attention` is `[1, n]`, `switch` a single
/// value, `generation` `[1, V]`; returns `[1, ext_size]`.
pub fn joint_distribution<T: Real>(
    g: &mut Graph<'_, T>,
    attention: Var,
    switch: Var,
    generation: Var,
    ext_ids: &[usize],
    ext_size: usize,
    weights: &CopyWeights,
) -> Result<Var> {
    let n = g.value(attention).len();
    if ext_ids.len() != n {
        return Err(Error::LengthMismatch {
            context: "occurrence map",
            left: ext_ids.len(),
            right: n,
        });
    }
    let copy = match weights {
        CopyWeights::Identity => attention,
        CopyWeights::Scale(s) => {
            check_lengths("hard mask", n, s.len())?;
            let m = g.constant(Tensor::from_f64(&[1, n], s)?);
            g.mul(attention, m)?
        }
        CopyWeights::Soft(q) => {
            check_lengths("soft mask", n, g.value(*q).len())?;
            g.mul(attention, *q)?
        }
    };
    let copy = g.scatter_add(copy, ext_ids, ext_size)?;
    let v = g.value(generation).len();
    let generation = if ext_size > v {
        let pad = g.constant(Tensor::zeros(&[1, ext_size - v]));
        g.concat_cols(&[generation, pad])?
    } else {
        generation
    };
    let copy = g.scale_by(switch, copy)?;
    let gen_weight = g.one_minus(switch);
    let generation = g.scale_by(gen_weight, generation)?;
    let joint = g.add(copy, generation)?;
    if matches!(weights, CopyWeights::Identity) {
        return Ok(joint);
    }
    let total = g.sum(joint);
    g.div_by(joint, total)
}

/// Source positions a copied target token should attend to. `None` marks a
/// step whose token does not occur in the source.
pub fn gold_alignment(source: &[Token], target: &[Token], labels: &[u8]) -> Result<Vec<Option<Vec<usize>>>> {
    check_lengths("copy labels", source.len(), labels.len())?;
    Ok(target
        .iter()
        .map(|y| {
            if !source.contains(y) {
                return None;
            }
            Some(
                source
                    .iter()
                    .zip(labels)
                    .enumerate()
                    .filter(|(_, (x, &t))| *x == y && t == 1)
                    .map(|(i, _)| i)
                    .collect(),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct CopySupervision {
    /// Summed auxiliary loss, absent when no step contributed.
    pub loss: Option<Var>,
    pub supervised_steps: usize,
    /// Copied steps skipped because their gold set was empty.
    pub skipped_steps: usize,
}

/// `−ln Σ_{i ∈ gold(j)} a_j^i` summed over copied steps.
pub fn copy_supervision_loss<T: Real>(
    g: &mut Graph<'_, T>,
    attention: &[Var],
    gold: &[Option<Vec<usize>>],
) -> Result<CopySupervision> {
    check_lengths("copy supervision", attention.len(), gold.len())?;
    let mut total: Option<Var> = None;
    let mut supervised_steps = 0;
    let mut skipped_steps = 0;
    for (&a, set) in attention.iter().zip(gold) {
        let Some(set) = set else { continue };
        if set.is_empty() {
            skipped_steps += 1;
            continue;
        }
        let mut mass: Option<Var> = None;
        for &i in set {
            let p = g.pick(a, i)?;
            mass = Some(match mass {
                Some(m) => g.add(m, p)?,
                None => p,
            });
        }
        let mass = g.clamp(mass.expect("nonempty gold set"), 1e-12, 1.0);
        let lm = g.ln(mass);
        let term = g.scale(lm, -1.0);
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
        supervised_steps += 1;
    }
    Ok(CopySupervision {
        loss: total,
        supervised_steps,
        skipped_steps,
    })
}

/// Plain-value form of [`copy_supervision_loss`]: `(loss, skipped steps)`.
pub fn copy_supervision_value(attention: &[Vec<f64>], gold: &[Option<Vec<usize>>]) -> Result<(f64, usize)> {
    let mut g = Graph::<f64>::new();
    let vars: Vec<Var> = attention.iter().map(|a| g.constant(Tensor::row(a.clone()))).collect();
    let sup = copy_supervision_loss(&mut g, &vars, gold)?;
    let loss = match sup.loss {
        Some(l) => g.scalar(l)?,
        None => 0.0,
    };
    Ok((loss, sup.skipped_steps))
}

/// `summarization NLL + w · tagging loss`.
pub fn multitask_loss<T: Real>(g: &mut Graph<'_, T>, nll: Var, tagging: Var, weight: f64) -> Result<Var> {
    let scaled = g.scale(tagging, weight);
    g.add(nll, scaled)
}
