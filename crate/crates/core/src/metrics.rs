//! ROUGE, extractive baselines and copy analyses.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::Serialize;

use crate::corpus::{ExamplePair, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. `n = 0` yields an all-zero score.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(overlap, cand.values().sum(), refs.values().sum())
}

pub fn lcs_length<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_length(candidate, reference), candidate.len(), reference.len())
}

/// First `min(k, #sentences)` source sentences.
pub fn lead_k(document: &ExamplePair, k: usize) -> Vec<Token> {
    document.source_sentences.iter().take(k).flatten().cloned().collect()
}

/// Top `k` sentences by mean `q`, emitted in document order; ties favour
/// earlier sentences.
pub fn select_top_sentences(document: &ExamplePair, q: &[f64], k: usize) -> Result<Vec<Token>> {
    if q.len() != document.source_len() {
        return Err(Error::LengthMismatch {
            context: "selection probabilities",
            left: q.len(),
            right: document.source_len(),
        });
    }
    let mut offset = 0;
    let mut means: Vec<(usize, f64)> = Vec::new();
    for (i, s) in document.source_sentences.iter().enumerate() {
        let part = &q[offset..offset + s.len()];
        means.push((i, part.iter().sum::<f64>() / s.len() as f64));
        offset += s.len();
    }
    means.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = means.into_iter().take(k).map(|(i, _)| i).collect();
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .flat_map(|i| document.source_sentences[i].iter().cloned())
        .collect())
}

/// Tokens whose `q` clears the threshold whose selection size is closest to
/// `target_len` (larger selection on ties), in document order.
pub fn extract_words_threshold(source: &[Token], q: &[f64], target_len: usize) -> Result<Vec<Token>> {
    if q.len() != source.len() {
        return Err(Error::LengthMismatch {
            context: "selection probabilities",
            left: q.len(),
            right: source.len(),
        });
    }
    if source.is_empty() {
        return Ok(Vec::new());
    }
    let mut levels: Vec<f64> = q.to_vec();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let count = |t: f64| q.iter().filter(|&&v| v >= t).count();
    // counts grow as the threshold walks down the sorted levels
    let k = levels.partition_point(|&t| count(t) < target_len);
    let threshold = if k == levels.len() {
        levels[k - 1]
    } else if k > 0 && target_len - count(levels[k - 1]) < count(levels[k]) - target_len {
        levels[k - 1]
    } else {
        levels[k]
    };
    Ok(source
        .iter()
        .zip(q)
        .filter(|(_, &v)| v >= threshold)
        .map(|(t, _)| t.clone())
        .collect())
}

/// Percentage of generated tokens found in the source that also appear in
/// the reference; `None` when nothing was copied.
pub fn copied_word_precision<T: Eq + Hash>(generated: &[T], source: &[T], reference: &[T]) -> Option<f64> {
    let source: HashSet<&T> = source.iter().collect();
    let reference: HashSet<&T> = reference.iter().collect();
    let copied: Vec<&T> = generated.iter().filter(|t| source.contains(t)).collect();
    if copied.is_empty() {
        return None;
    }
    let hits = copied.iter().filter(|t| reference.contains(*t)).count();
    Some(100.0 * hits as f64 / copied.len() as f64)
}

/// Percentage of summary positions holding a word absent from the source.
pub fn novel_word_rate<T: Eq + Hash>(generated: &[T], source: &[T]) -> Result<f64> {
    if generated.is_empty() {
        return Err(Error::EmptyInput("summary"));
    }
    let source: HashSet<&T> = source.iter().collect();
    let novel = generated.iter().filter(|t| !source.contains(t)).count();
    Ok(100.0 * novel as f64 / generated.len() as f64)
}

pub const HISTOGRAM_BUCKETS: usize = 11;

/// Copied-token counts by phrase length: buckets 1..=10 and 11+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CopyHistogram(pub [usize; HISTOGRAM_BUCKETS]);

impl CopyHistogram {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&mut self, other: &CopyHistogram) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }

    /// Share of copied tokens in the 11+ bucket, in percent.
    pub fn long_share(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.0[HISTOGRAM_BUCKETS - 1] as f64 / total as f64
        }
    }

    pub fn label(bucket: usize) -> String {
        if bucket + 1 == HISTOGRAM_BUCKETS {
            format!("{}+", HISTOGRAM_BUCKETS)
        } else {
            (bucket + 1).to_string()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket,count\n");
        for (i, c) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{},{c}", Self::label(i));
        }
        out
    }
}

fn occurs_in<T: Eq>(span: &[T], source: &[T]) -> bool {
    source.windows(span.len()).any(|w| w == span)
}

/// Greedy left-to-right segmentation into maximal runs that occur
/// contiguously in the source.
pub fn copy_phrase_histogram<T: Eq>(generated: &[T], source: &[T]) -> CopyHistogram {
    let mut hist = CopyHistogram::default();
    let mut i = 0;
    while i < generated.len() {
        let mut len = 0;
        while i + len < generated.len() && occurs_in(&generated[i..=i + len], source) {
            len += 1;
        }
        if len == 0 {
            i += 1;
            continue;
        }
        hist.0[len.min(HISTOGRAM_BUCKETS) - 1] += len;
        i += len;
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CopyStats {
    /// `None` when no generated token was found in its source.
    pub copied_word_precision: Option<f64>,
    pub novel_word_rate: f64,
    pub histogram: CopyHistogram,
}

/// One system output with its source and reference.
pub struct Triple<'a> {
    pub generated: &'a [Token],
    pub source: &'a [Token],
    pub reference: &'a [Token],
}

/// Corpus-level copy statistics: precision and novelty pooled over tokens,
/// histogram summed.
pub fn copy_stats(items: &[Triple<'_>]) -> CopyStats {
    let mut copied = 0usize;
    let mut hits = 0usize;
    let mut novel = 0usize;
    let mut total = 0usize;
    let mut histogram = CopyHistogram::default();
    for t in items {
        let source: HashSet<&Token> = t.source.iter().collect();
        let reference: HashSet<&Token> = t.reference.iter().collect();
        for w in t.generated {
            if source.contains(w) {
                copied += 1;
                hits += usize::from(reference.contains(w));
            } else {
                novel += 1;
            }
        }
        total += t.generated.len();
        histogram.add(&copy_phrase_histogram(t.generated, t.source));
    }
    CopyStats {
        copied_word_precision: (copied > 0).then(|| 100.0 * hits as f64 / copied as f64),
        novel_word_rate: if total == 0 { 0.0 } else { 100.0 * novel as f64 / total as f64 },
        histogram,
    }
}

/// Mean ROUGE-1/2/L over candidate/reference pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RougeSummary {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
    pub count: usize,
}

pub fn corpus_rouge<T: Eq + Hash>(pairs: &[(&[T], &[T])]) -> RougeSummary {
    let mut out = RougeSummary {
        count: pairs.len(),
        ..Default::default()
    };
    if pairs.is_empty() {
        return out;
    }
    let add = |acc: &mut RougeScore, s: RougeScore| {
        acc.precision += s.precision;
        acc.recall += s.recall;
        acc.f1 += s.f1;
    };
    for (c, r) in pairs {
        add(&mut out.rouge1, rouge_n(c, r, 1));
        add(&mut out.rouge2, rouge_n(c, r, 2));
        add(&mut out.rouge_l, rouge_l(c, r));
    }
    let n = pairs.len() as f64;
    for s in [&mut out.rouge1, &mut out.rouge2, &mut out.rouge_l] {
        s.precision /= n;
        s.recall /= n;
        s.f1 /= n;
    }
    out
}

/// Named values rendered ×100 with two decimals where they are fractions.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<(String, Option<f64>)>,
}

impl Report {
    pub fn push(&mut self, name: impl Into<String>, value: Option<f64>) {
        self.rows.push((name.into(), value));
    }

    /// Adds `F1`, `P` and `R` rows for a ROUGE score scaled ×100.
    pub fn push_rouge(&mut self, name: &str, s: &RougeScore) {
        self.push(format!("{name}-F"), Some(100.0 * s.f1));
        self.push(format!("{name}-P"), Some(100.0 * s.precision));
        self.push(format!("{name}-R"), Some(100.0 * s.recall));
    }

    pub fn from_rouge(summary: &RougeSummary) -> Self {
        let mut r = Self::default();
        r.push_rouge("ROUGE-1", &summary.rouge1);
        r.push_rouge("ROUGE-2", &summary.rouge2);
        r.push_rouge("ROUGE-L", &summary.rouge_l);
        r
    }

    fn cell(v: Option<f64>) -> String {
        v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}"))
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<width$}  value\n", "metric");
        for (name, v) in &self.rows {
            let _ = writeln!(out, "{name:<width$}  {}", Self::cell(*v));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in &self.rows {
            let _ = writeln!(out, "{name},{}", Self::cell(*v));
        }
        out
    }
}
