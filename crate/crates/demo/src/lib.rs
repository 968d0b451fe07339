//! Browser demo: copy-label alignment, the hard copy mask under a moving
//! attention focus, length-penalty curves and summary scoring. Every export
//! returns a JSON string; the page in `www/` renders it.

use bottomup::bottom_up::{hard_mask, MaskConfig};
use bottomup::corpus::{align_copy_labels, tokenize, Token};
use bottomup::decode::length_penalty;
use bottomup::metrics::{
    copied_word_precision, copy_phrase_histogram, novel_word_rate, rouge_l, rouge_n, CopyHistogram, HISTOGRAM_BUCKETS,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const MAX_PENALTY_LENGTH: usize = 400;

#[derive(Debug, Serialize)]
pub struct LabeledToken {
    pub word: String,
    pub label: u8,
}

#[derive(Debug, Serialize)]
pub struct Alignment {
    pub tokens: Vec<LabeledToken>,
    pub selected: usize,
}

#[derive(Debug, Serialize)]
pub struct MaskedToken {
    pub word: String,
    pub q: f64,
    pub attention: f64,
    pub eligible: bool,
    /// Copy weight after masking and scaling.
    pub weight: f64,
}

#[derive(Debug, Serialize)]
pub struct MaskView {
    pub tokens: Vec<MaskedToken>,
    pub fallback: bool,
    /// Total copy weight before and after the mask; the joint distribution is
    /// renormalized against the generation mass afterwards.
    pub mass_before: f64,
    pub mass_after: f64,
}

#[derive(Debug, Serialize)]
pub struct PenaltyCurve {
    pub alpha: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PenaltyView {
    pub lengths: Vec<usize>,
    pub curves: Vec<PenaltyCurve>,
}

#[derive(Debug, Serialize)]
pub struct Bucket {
    pub label: String,
    pub tokens: usize,
}

#[derive(Debug, Serialize)]
pub struct ScoreView {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub copied_word_precision: Option<f64>,
    pub novel_word_rate: Option<f64>,
    pub histogram: Vec<Bucket>,
    pub long_share: f64,
}

fn words(tokens: &[Token]) -> impl Iterator<Item = String> + '_ {
    tokens.iter().map(|t| t.to_string())
}

/// Numbers separated by whitespace or commas.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

/// Copy labels of each source token against the summary.
pub fn alignment(source: &str, summary: &str) -> Alignment {
    let src = tokenize(source);
    let labels = align_copy_labels(&src, &tokenize(summary));
    Alignment {
        selected: labels.iter().filter(|&&l| l == 1).count(),
        tokens: words(&src).zip(labels).map(|(word, label)| LabeledToken { word, label }).collect(),
    }
}

/// Attention peaked at `focus`: a softmax of `-sharpness * distance`.
pub fn focused_attention(len: usize, focus: f64, sharpness: f64) -> Vec<f64> {
    let logits: Vec<f64> = (0..len).map(|i| -sharpness * (i as f64 - focus).abs()).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

pub fn mask_view(
    source: &str,
    q: &str,
    focus: f64,
    sharpness: f64,
    epsilon: f64,
    lambda: f64,
) -> Result<MaskView, String> {
    let src = tokenize(source);
    if src.is_empty() {
        return Err("the source is empty".into());
    }
    let q = parse_numbers(q)?;
    if q.len() != src.len() {
        return Err(format!("{} selection probabilities for {} source tokens", q.len(), src.len()));
    }
    if let Some(bad) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(format!("selection probabilities lie in [0, 1], got {bad}"));
    }
    if !sharpness.is_finite() || sharpness < 0.0 {
        return Err(format!("sharpness must be nonnegative, got {sharpness}"));
    }
    let cfg = MaskConfig::new(epsilon, lambda).map_err(|e| e.to_string())?;
    let attention = focused_attention(src.len(), focus, sharpness);
    let masked = hard_mask(&attention, &q, &cfg).map_err(|e| e.to_string())?;
    let tokens = words(&src)
        .zip(&q)
        .zip(attention.iter().zip(&masked.weights))
        .map(|((word, &q), (&attention, &weight))| MaskedToken {
            word,
            q,
            attention,
            eligible: cfg.is_eligible(q),
            weight,
        })
        .collect();
    Ok(MaskView {
        tokens,
        fallback: masked.fallback,
        mass_before: attention.iter().sum(),
        mass_after: masked.weights.iter().sum(),
    })
}

pub fn penalty_view(max_length: usize, alphas: &str) -> Result<PenaltyView, String> {
    if !(1..=MAX_PENALTY_LENGTH).contains(&max_length) {
        return Err(format!("length must lie in 1..={MAX_PENALTY_LENGTH}, got {max_length}"));
    }
    let alphas = parse_numbers(alphas)?;
    if alphas.is_empty() {
        return Err("give at least one alpha".into());
    }
    let lengths: Vec<usize> = (1..=max_length).collect();
    Ok(PenaltyView {
        curves: alphas
            .into_iter()
            .map(|alpha| PenaltyCurve {
                alpha,
                values: lengths.iter().map(|&l| length_penalty(l, alpha)).collect(),
            })
            .collect(),
        lengths,
    })
}

pub fn score_view(candidate: &str, reference: &str, source: &str) -> ScoreView {
    let (cand, refr, src) = (tokenize(candidate), tokenize(reference), tokenize(source));
    let hist = copy_phrase_histogram(&cand, &src);
    ScoreView {
        rouge1: 100.0 * rouge_n(&cand, &refr, 1).f1,
        rouge2: 100.0 * rouge_n(&cand, &refr, 2).f1,
        rouge_l: 100.0 * rouge_l(&cand, &refr).f1,
        copied_word_precision: copied_word_precision(&cand, &src, &refr),
        novel_word_rate: novel_word_rate(&cand, &src).ok(),
        histogram: (0..HISTOGRAM_BUCKETS)
            .map(|b| Bucket {
                label: CopyHistogram::label(b),
                tokens: hist.0[b],
            })
            .collect(),
        long_share: hist.long_share(),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("views serialize")
}

#[wasm_bindgen]
pub fn align(source: &str, summary: &str) -> String {
    to_json(&alignment(source, summary))
}

#[wasm_bindgen]
pub fn mask(source: &str, q: &str, focus: f64, sharpness: f64, epsilon: f64, lambda: f64) -> Result<String, JsError> {
    mask_view(source, q, focus, sharpness, epsilon, lambda)
        .map(|v| to_json(&v))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn penalties(max_length: usize, alphas: &str) -> Result<String, JsError> {
    penalty_view(max_length, alphas).map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn score(candidate: &str, reference: &str, source: &str) -> String {
    to_json(&score_view(candidate, reference, source))
}
