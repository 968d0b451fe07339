//! Exhaustive and randomized oracles for alignment, masking, beam search,
//! the inference penalties and ROUGE.

use bottomup::bottom_up::{hard_mask, joint_distribution, mix_distribution, resolve_hard_mask, soft_mask, MaskConfig};
use bottomup::corpus::Aligner;
use bottomup::decode::{
    beam_search, coverage_penalty, exhaustive_search, has_repeated_trigram, hypothesis_score, length_penalty,
    InferenceConfig, TableModel,
};
use bottomup::metrics::{lcs_length, rouge_l, rouge_n};
use bottomup::tensor::Graph;
use bottomup::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- alignment

pub const ALIGN_ALPHABET: u8 = 3;
pub const ALIGN_MAX_SOURCE: usize = 12;
pub const ALIGN_MAX_TARGET: usize = 6;

/// Base-4 code with a leading sentinel digit, unique per (length, content).
fn span_code(span: &[u8]) -> usize {
    span.iter().fold(1, |acc, &s| acc * 4 + s as usize)
}

const CODE_SPACE: usize = 1 << (2 * (ALIGN_MAX_TARGET + 1));

/// Every contiguous span of a target, as a bitset over span codes.
struct TargetSpans(Vec<u64>);

impl TargetSpans {
    fn new(target: &[u8]) -> Self {
        let mut bits = vec![0u64; CODE_SPACE / 64];
        for s in 0..target.len() {
            for e in s + 1..=target.len() {
                let c = span_code(&target[s..e]);
                bits[c / 64] |= 1 << (c % 64);
            }
        }
        Self(bits)
    }

    fn contains(&self, code: usize) -> bool {
        self.0[code / 64] >> (code % 64) & 1 == 1
    }
}

/// The source spans that could occur in some target (length at most
/// `ALIGN_MAX_TARGET`), indexed by bit position. A 12-token source has 57.
struct SourceSpans {
    n: usize,
    codes: Vec<usize>,
    /// Spans that are the first occurrence of their content in the source.
    first: u64,
    /// `covering[i][len]`: spans of length `len` that contain position `i`.
    covering: Vec<[u64; ALIGN_MAX_TARGET + 1]>,
}

impl SourceSpans {
    fn new(source: &[u8]) -> Self {
        let n = source.len();
        let mut spans = Self {
            n,
            codes: Vec::new(),
            first: 0,
            covering: vec![[0; ALIGN_MAX_TARGET + 1]; n],
        };
        for start in 0..n {
            for len in 1..=ALIGN_MAX_TARGET.min(n - start) {
                let bit = 1u64 << spans.codes.len();
                let span = &source[start..start + len];
                spans.codes.push(span_code(span));
                if !(0..start).any(|t| &source[t..t + len] == span) {
                    spans.first |= bit;
                }
                for cover in &mut spans.covering[start..start + len] {
                    cover[len] |= bit;
                }
            }
        }
        assert!(spans.codes.len() <= 64);
        spans
    }

    /// Applies the three labeling rules: a position is tagged when some
    /// longest target-occurring span covering it is the first occurrence of
    /// that span in the source.
    fn labels_into(&self, target: &TargetSpans, out: &mut Vec<u8>) {
        let present = self
            .codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| target.contains(c))
            .fold(0u64, |acc, (bit, _)| acc | 1 << bit);
        out.clear();
        out.extend(self.covering.iter().map(|cover| {
            cover
                .iter()
                .rev()
                .map(|&spans| spans & present)
                .find(|&longest| longest != 0)
                .map_or(0, |longest| u8::from(longest & self.first != 0))
        }));
        debug_assert_eq!(out.len(), self.n);
    }
}

/// Reference labels for one pair, for use outside the sweep.
pub fn brute_force_labels(source: &[u8], target: &[u8]) -> Vec<u8> {
    assert!(target.len() <= ALIGN_MAX_TARGET && source.iter().chain(target).all(|&s| s < 4));
    let mut out = Vec::new();
    SourceSpans::new(source).labels_into(&TargetSpans::new(target), &mut out);
    out
}

/// Sequences of length `len` whose symbols first appear in the order 0, 1, 2.
fn canonical_sequences(len: usize, alphabet: u8) -> Vec<Vec<u8>> {
    fn grow(seq: &mut Vec<u8>, len: usize, alphabet: u8, used: u8, out: &mut Vec<Vec<u8>>) {
        if seq.len() == len {
            out.push(seq.clone());
            return;
        }
        for s in 0..(used + 1).min(alphabet) {
            seq.push(s);
            grow(seq, len, alphabet, used.max(s + 1), out);
            seq.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), len, alphabet, 0, &mut out);
    out
}

/// Every sequence of length `len` over `alphabet` symbols.
fn all_sequences(len: usize, alphabet: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..alphabet).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct AlignmentSweep {
    pub pairs: u64,
    pub mismatches: u64,
    pub first_mismatch: Option<(Vec<u8>, Vec<u8>)>,
}

/// Compares the aligner with the brute-force rules on every target of length
/// `0..=max_target` against every source of length `1..=max_source`.
///
/// Sources are enumerated up to renaming of symbols (first appearances in
/// order 0, 1, 2): both labelings only compare tokens for equality, so a
/// renamed pair gets the same tags and the canonical sources cover every
/// source/target pair.
pub fn alignment_sweep(max_source: usize, max_target: usize) -> AlignmentSweep {
    assert!(max_target <= ALIGN_MAX_TARGET);
    let targets: Vec<(Vec<u8>, TargetSpans)> = (0..=max_target)
        .flat_map(|m| all_sequences(m, ALIGN_ALPHABET))
        .map(|t| {
            let spans = TargetSpans::new(&t);
            (t, spans)
        })
        .collect();
    let mut aligner = Aligner::new();
    let (mut fast, mut slow) = (Vec::new(), Vec::new());
    let mut sweep = AlignmentSweep::default();
    for n in 1..=max_source {
        for source in canonical_sequences(n, ALIGN_ALPHABET) {
            let spans = SourceSpans::new(&source);
            for (target, target_spans) in &targets {
                aligner.align_into(&source, target, &mut fast);
                spans.labels_into(target_spans, &mut slow);
                sweep.pairs += 1;
                if fast != slow {
                    sweep.mismatches += 1;
                    sweep.first_mismatch.get_or_insert_with(|| (source.clone(), target.clone()));
                }
            }
        }
    }
    sweep
}

// ---------------------------------------------------------------- masking

pub const MASK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct MaskSweep {
    pub instances: usize,
    /// Positions with `q ≤ ε` that kept nonzero copy weight.
    pub leaked_positions: usize,
    /// Joint distributions (masked, unmasked, soft) off unit mass.
    pub unnormalized: usize,
    /// Raising ε kept a position that the lower ε had dropped.
    pub monotonicity_violations: usize,
    /// Largest deviation of the identity configuration from the unmasked joint.
    pub identity_max_error: f64,
    /// Largest deviation of the model's graph mixture from the plain mixture.
    pub graph_max_error: f64,
    pub fallbacks: usize,
}

impl MaskSweep {
    pub fn passed(&self) -> bool {
        self.leaked_positions == 0
            && self.unnormalized == 0
            && self.monotonicity_violations == 0
            && self.identity_max_error <= MASK_TOLERANCE
            && self.graph_max_error <= MASK_TOLERANCE
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| (rng.gen_range(-3.0..3.0f64)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn kept(weights: &[f64]) -> Vec<bool> {
    weights.iter().map(|&w| w != 0.0).collect()
}

fn graph_joint(a: &[f64], switch: f64, p: &[f64], ext_ids: &[usize], ext: usize, q: &[f64], cfg: &MaskConfig) -> Result<Vec<f64>> {
    let mut g = Graph::<f64>::new();
    let av = g.constant_row(a.to_vec());
    let sv = g.constant_row(vec![switch]);
    let pv = g.constant_row(p.to_vec());
    let (weights, _) = resolve_hard_mask(q, cfg);
    let joint = joint_distribution(&mut g, av, sv, pv, ext_ids, ext, &weights)?;
    Ok(g.value(joint).to_f64_vec())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn off_unit_mass(v: &[f64]) -> bool {
    (v.iter().sum::<f64>() - 1.0).abs() > MASK_TOLERANCE
}

/// Random attention `a`, selection probabilities `q`, threshold `ε` and
/// scale `λ`, pushed through the hard mask and the copy/generate mixture.
pub fn mask_sweep(instances: usize, seed: u64) -> Result<MaskSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep = MaskSweep::default();
    for _ in 0..instances {
        let n = rng.gen_range(1..=12);
        let v = rng.gen_range(1..=6);
        let ext = v + rng.gen_range(0..=3);
        let ext_ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..ext)).collect();
        let a = random_distribution(&mut rng, n);
        let p = random_distribution(&mut rng, v);
        let switch = rng.gen_range(0.01..0.99);
        let epsilon = rng.gen_range(0.01..0.99);
        let lambda = rng.gen_range(0.25..4.0);
        let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        if rng.gen_bool(0.2) {
            // exact ties with the threshold must be masked
            let i = rng.gen_range(0..n);
            q[i] = epsilon;
        }
        let cfg = MaskConfig::new(epsilon, lambda)?;
        sweep.instances += 1;

        let masked = hard_mask(&a, &q, &cfg)?;
        if masked.fallback {
            sweep.fallbacks += 1;
        } else {
            sweep.leaked_positions += q
                .iter()
                .zip(&masked.weights)
                .filter(|(&qi, &w)| qi <= epsilon && w != 0.0)
                .count();
        }
        let joint = mix_distribution(&masked.weights, switch, &p, &ext_ids, ext, !masked.fallback)?;
        let unmasked = mix_distribution(&a, switch, &p, &ext_ids, ext, false)?;
        let soft = mix_distribution(&soft_mask(&a, &q)?, switch, &p, &ext_ids, ext, true)?;
        sweep.unnormalized += [&joint, &unmasked, &soft].iter().filter(|d| off_unit_mass(d)).count();
        let via_graph = graph_joint(&a, switch, &p, &ext_ids, ext, &q, &cfg)?;
        sweep.graph_max_error = sweep.graph_max_error.max(max_abs_diff(&joint, &via_graph));

        let higher = MaskConfig::new(rng.gen_range(epsilon..1.0).max(epsilon), lambda)?;
        let raised = hard_mask(&a, &q, &higher)?;
        if !masked.fallback && !raised.fallback {
            let (lo, hi) = (kept(&masked.weights), kept(&raised.weights));
            if lo.iter().zip(&hi).any(|(&l, &h)| h && !l) {
                sweep.monotonicity_violations += 1;
            }
        }

        let identity = MaskConfig::new(epsilon, 1.0)?;
        let q_all: Vec<f64> = (0..n).map(|_| epsilon + (1.0 - epsilon) * rng.gen_range(0.01..=1.0)).collect();
        let same = hard_mask(&a, &q_all, &identity)?;
        let renormalized = mix_distribution(&same.weights, switch, &p, &ext_ids, ext, true)?;
        let via_graph = graph_joint(&a, switch, &p, &ext_ids, ext, &q_all, &identity)?;
        sweep.identity_max_error = sweep
            .identity_max_error
            .max(max_abs_diff(&renormalized, &unmasked))
            .max(max_abs_diff(&via_graph, &unmasked));
    }
    Ok(sweep)
}

// ---------------------------------------------------------------- beam search

#[derive(Debug, Clone, Default)]
pub struct BeamSweep {
    pub instances: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<String>,
    /// Long blocked decodes checked for repeated trigrams.
    pub blocked_decodes: usize,
    pub blocked_repeats: usize,
    /// The same decodes without blocking, to show the check is not vacuous.
    pub unblocked_repeats: usize,
}

impl BeamSweep {
    pub fn passed(&self) -> bool {
        self.instances > 0 && self.mismatches == 0 && self.blocked_repeats == 0
    }
}

pub const ORACLE_BEAM: usize = 64;

/// Beam search with a beam of 64 against exhaustive enumeration over every
/// vocabulary size up to 4, horizon up to 3, minimum length, α ∈ {0, 1},
/// β ∈ {0, 10}, blocking on and off, and `seeds` hand-set tables each.
pub fn beam_sweep(seeds: u64) -> Result<BeamSweep> {
    let mut sweep = BeamSweep::default();
    for vocab in 1..=4 {
        for horizon in 1..=3 {
            for min_length in 0..=horizon {
                for (alpha, beta) in [(0.0, 0.0), (1.0, 0.0), (0.0, 10.0), (1.0, 10.0)] {
                    for block_trigrams in [false, true] {
                        for source_len in 1..=3 {
                            for seed in 0..seeds {
                                let model = TableModel { vocab, source_len, seed };
                                let cfg = InferenceConfig {
                                    beam: ORACLE_BEAM,
                                    alpha,
                                    beta,
                                    min_length,
                                    max_length: horizon,
                                    block_trigrams,
                                };
                                sweep.instances += 1;
                                let beam = beam_search(&model, &cfg);
                                let best = exhaustive_search(&model, &cfg);
                                let agree = match (&beam, &best) {
                                    (Ok(b), Ok(e)) => {
                                        b.tokens == e.tokens && b.finished == e.finished && (b.score - e.score).abs() <= 1e-12
                                    }
                                    (Err(_), Err(_)) => true,
                                    _ => false,
                                };
                                if !agree {
                                    sweep.mismatches += 1;
                                    sweep.first_mismatch.get_or_insert_with(|| {
                                        format!("vocab {vocab} horizon {horizon} {cfg:?} seed {seed}: {beam:?} vs {best:?}")
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    for seed in 0..200 {
        for beam in 1..=5 {
            let model = TableModel {
                vocab: 4 + (seed % 3) as usize,
                source_len: 3,
                seed,
            };
            let mut cfg = InferenceConfig {
                beam,
                alpha: 1.0,
                beta: 0.0,
                min_length: 10,
                max_length: 14,
                block_trigrams: true,
            };
            sweep.blocked_decodes += 1;
            if has_repeated_trigram(&beam_search(&model, &cfg)?.tokens) {
                sweep.blocked_repeats += 1;
            }
            cfg.block_trigrams = false;
            if has_repeated_trigram(&beam_search(&model, &cfg)?.tokens) {
                sweep.unblocked_repeats += 1;
            }
        }
    }
    Ok(sweep)
}

// ---------------------------------------------------------------- penalties

pub const PENALTY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct PenaltyCheck {
    pub fixtures: usize,
    pub failures: Vec<String>,
    /// Random histories with every column sum ≤ 1.
    pub bounded_histories: usize,
    pub nonzero_bounded: usize,
}

impl PenaltyCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.nonzero_bounded == 0 && self.bounded_histories > 0
    }
}

/// Hand-evaluated length and coverage penalties, then random attention
/// histories whose column sums stay within 1.
pub fn penalty_check(histories: usize, seed: u64) -> Result<PenaltyCheck> {
    let mut check = PenaltyCheck::default();
    let mut expect = |name: String, got: f64, want: f64| {
        check.fixtures += 1;
        if (got - want).abs() > PENALTY_TOLERANCE {
            check.failures.push(format!("{name}: got {got}, want {want}"));
        }
    };
    for alpha in [0.0, 0.5, 0.7, 1.0, 2.0] {
        expect(format!("lp(1, {alpha})"), length_penalty(1, alpha), 1.0);
    }
    for len in [1, 2, 7, 35, 100] {
        expect(format!("lp({len}, 0)"), length_penalty(len, 0.0), 1.0);
    }
    expect("lp(7, 1)".into(), length_penalty(7, 1.0), 2.0);
    expect("lp(3, 2)".into(), length_penalty(3, 2.0), 16.0 / 9.0);
    expect("lp(13, 0.5)".into(), length_penalty(13, 0.5), 3f64.sqrt());
    expect("lp(19, 1)".into(), length_penalty(19, 1.0), 4.0);

    let over = vec![vec![0.9, 0.1], vec![0.6, 0.2]];
    expect("cp column sums [1.5, 0.3], beta 10".into(), coverage_penalty(&over, 10.0)?, 5.0);
    expect("cp beta 0".into(), coverage_penalty(&over, 0.0)?, 0.0);
    let three = vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.25, 0.25], vec![0.5, 0.25, 0.25]];
    expect("cp column sums [1.5, 1.0, 0.5], beta 2".into(), coverage_penalty(&three, 2.0)?, 1.0);
    let under = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    expect("cp column sums [1, 1]".into(), coverage_penalty(&under, 10.0)?, 0.0);
    expect("cp empty history".into(), coverage_penalty(&[], 10.0)?, 0.0);
    expect("score -6 / lp(7, 1)".into(), hypothesis_score(-6.0, 7, &[], 1.0, 0.0)?, -3.0);
    expect("score penalties off".into(), hypothesis_score(-4.2, 3, &over, 0.0, 0.0)?, -4.2);
    expect("score -6 / lp(7, 1) - cp 5".into(), hypothesis_score(-6.0, 7, &over, 1.0, 10.0)?, -8.0);

    // Each row mixes injective step-to-column maps, so rows sum to 1 and no
    // column collects more than 1.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..histories {
        let steps = rng.gen_range(1..=8);
        let n = rng.gen_range(steps..=steps + 4);
        let maps: Vec<Vec<usize>> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let mut cols: Vec<usize> = (0..n).collect();
                cols.shuffle(&mut rng);
                cols
            })
            .collect();
        // dyadic weights sum to exactly 1, so column sums are exact too
        let mut cuts: Vec<u32> = (1..maps.len()).map(|_| rng.gen_range(0..=64)).collect();
        cuts.extend([0, 64]);
        cuts.sort_unstable();
        let w: Vec<f64> = cuts.windows(2).map(|c| f64::from(c[1] - c[0]) / 64.0).collect();
        let history: Vec<Vec<f64>> = (0..steps)
            .map(|j| {
                let mut row = vec![0.0; n];
                for (map, wk) in maps.iter().zip(&w) {
                    row[map[j]] += wk;
                }
                row
            })
            .collect();
        check.bounded_histories += 1;
        let beta = rng.gen_range(0.0..20.0);
        if coverage_penalty(&history, beta)? != 0.0 {
            check.nonzero_bounded += 1;
        }
    }
    Ok(check)
}

// ---------------------------------------------------------------- ROUGE

/// Codes of every distinct subsequence of `seq` (base 4, leading sentinel),
/// so a longer subsequence always has a larger code.
fn subsequence_bits(seq: &[u8], words: usize) -> Vec<u64> {
    let mut bits = vec![0u64; words];
    for mask in 0u32..(1 << seq.len()) {
        let code = seq
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .fold(1usize, |acc, (_, &s)| acc * 4 + s as usize);
        bits[code / 64] |= 1 << (code % 64);
    }
    bits
}

/// Length of the longest common subsequence, found as the largest code in
/// the intersection of both subsequence sets.
fn brute_force_lcs(a: &[u64], b: &[u64]) -> usize {
    let Some((word, both)) = a.iter().zip(b).map(|(x, y)| x & y).enumerate().rev().find(|(_, w)| *w != 0) else {
        return 0;
    };
    let code = word * 64 + 63 - both.leading_zeros() as usize;
    // the sentinel digit sits at 4^len
    (usize::BITS - 1 - code.leading_zeros()) as usize / 2
}

#[derive(Debug, Clone, Default)]
pub struct RougeCheck {
    pub lcs_pairs: u64,
    pub lcs_mismatches: u64,
    pub first_lcs_mismatch: Option<(Vec<u8>, Vec<u8>)>,
    pub fixtures: usize,
    pub fixture_failures: Vec<String>,
}

impl RougeCheck {
    pub fn passed(&self) -> bool {
        self.lcs_pairs > 0 && self.lcs_mismatches == 0 && self.fixture_failures.is_empty() && self.fixtures >= 10
    }
}

fn lcs_sweep(check: &mut RougeCheck, max_len: usize, alphabet: u8) {
    let seqs: Vec<Vec<u8>> = (0..=max_len).flat_map(|n| all_sequences(n, alphabet)).collect();
    let words = (1usize << (2 * (max_len + 1))).div_ceil(64);
    let subs: Vec<Vec<u64>> = seqs.iter().map(|s| subsequence_bits(s, words)).collect();
    for (a, sa) in seqs.iter().zip(&subs) {
        for (b, sb) in seqs.iter().zip(&subs) {
            let lcs = brute_force_lcs(sa, sb);
            let got = rouge_l(a, b);
            let ratio = |x: usize, y: usize| if y == 0 { 0.0 } else { x as f64 / y as f64 };
            let f = if lcs == 0 { 0.0 } else { 2.0 * lcs as f64 / (a.len() + b.len()) as f64 };
            check.lcs_pairs += 1;
            if lcs_length(a, b) != lcs
                || got.precision != ratio(lcs, a.len())
                || got.recall != ratio(lcs, b.len())
                || (got.f1 - f).abs() > 1e-12
            {
                check.lcs_mismatches += 1;
                check.first_lcs_mismatch.get_or_insert_with(|| (a.clone(), b.clone()));
            }
        }
    }
}

/// `(candidate, reference, n, overlap, candidate n-grams, reference n-grams)`
const ROUGE_N_FIXTURES: [(&str, &str, usize, usize, usize, usize); 13] = [
    ("the cat", "the cat sat", 1, 2, 2, 3),
    ("a b c d", "a b c d", 2, 3, 3, 3),
    ("a b", "c d", 1, 0, 2, 2),
    ("the the the", "the cat the", 1, 2, 3, 3),
    ("the cat sat on the mat", "the cat lay on the mat", 2, 3, 5, 5),
    ("the cat sat on the mat", "the cat lay on the mat", 3, 1, 4, 4),
    ("a", "a b", 2, 0, 0, 1),
    ("", "a b", 1, 0, 0, 2),
    ("a b a b a b", "a b a b", 2, 3, 5, 3),
    ("c b a", "a b c", 1, 3, 3, 3),
    ("c b a", "a b c", 2, 0, 2, 2),
    ("a a b", "a b b", 1, 2, 3, 3),
    ("w x y z", "w x y z q", 4, 1, 1, 2),
];

/// ROUGE-L against brute-force LCS on every pair of binary sequences up to
/// length 8 and ternary sequences up to length 6, then ROUGE-N fixtures.
pub fn rouge_check() -> RougeCheck {
    let mut check = RougeCheck::default();
    lcs_sweep(&mut check, 8, 2);
    lcs_sweep(&mut check, 6, 3);
    for (cand, reference, n, overlap, c, r) in ROUGE_N_FIXTURES {
        let cand: Vec<&str> = cand.split_whitespace().collect();
        let reference: Vec<&str> = reference.split_whitespace().collect();
        let got = rouge_n(&cand, &reference, n);
        let ratio = |x: usize, y: usize| if y == 0 { 0.0 } else { x as f64 / y as f64 };
        let f = if overlap == 0 { 0.0 } else { 2.0 * overlap as f64 / (c + r) as f64 };
        check.fixtures += 1;
        if got.precision != ratio(overlap, c) || got.recall != ratio(overlap, r) || (got.f1 - f).abs() > 1e-12 {
            check.fixture_failures.push(format!("{cand:?} vs {reference:?}, n = {n}: {got:?}"));
        }
    }
    check
}
