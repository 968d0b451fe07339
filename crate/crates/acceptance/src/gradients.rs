//! Finite-difference checks of every differentiable model at f64.

use bottomup::bottom_up::{joint_distribution, CopyWeights, TrainMode};
use bottomup::corpus::{ExamplePair, Token, Vocabulary};
use bottomup::selector::{selector_loss, Selector, SelectorConfig};
use bottomup::summarizer::{AttentionScore, PreparedExample, Summarizer, SummarizerConfig};
use bottomup::tensor::{finite_difference_check, GradCheckReport, ParamStore, Tensor, Trainable};
use bottomup::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-4;
/// Step of the five-point stencil; smaller steps are dominated by round-off.
const EPS: f64 = 1e-2;

fn vocab() -> Vocabulary {
    Vocabulary::from_words(["a", "b", "c", "d", "."])
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<Token> {
    // "x" and "y" fall outside the vocabulary
    const POOL: [&str; 7] = ["a", "b", "c", "d", ".", "x", "y"];
    (0..n)
        .map(|_| Token::new(POOL[rng.gen_range(0..POOL.len())]).expect("pool words are valid tokens"))
        .collect()
}

fn example(rng: &mut ChaCha8Rng) -> Result<PreparedExample> {
    let n = rng.gen_range(2..6);
    let m = rng.gen_range(1..4);
    let pair = ExamplePair::new("g", vec![words(rng, n)], vec![words(rng, m)])?;
    PreparedExample::new(&vocab(), &pair.with_labels())
}

fn summarizer_config(i: u64) -> SummarizerConfig {
    let attention = [AttentionScore::Bilinear, AttentionScore::Dot, AttentionScore::Additive][i as usize % 3];
    SummarizerConfig {
        emb_dim: 3,
        enc_hidden: 2,
        dec_hidden: 4,
        attention,
    }
}

fn selector_config() -> SelectorConfig {
    SelectorConfig {
        static_dim: 2,
        context_dim: 4,
        tagger_hidden: 2,
        tagger_layers: 2,
        dropout: 0.0,
    }
}

fn summarizer_report(mode: TrainMode, i: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(100 + i);
    let mut store = ParamStore::<f64>::new();
    let model = Summarizer::new(summarizer_config(i), selector_config(), mode, &vocab(), &mut store, &mut rng)?;
    let ex = example(&mut rng)?;
    finite_difference_check(&store, EPS, 2, i, |g| Ok(model.loss(g, &ex, 0.7)?.0))
}

/// Random tiny instances per family.
pub const INSTANCES: u64 = 20;

fn selector_reports() -> Result<Vec<GradCheckReport>> {
    (0..INSTANCES)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let mut store = ParamStore::<f64>::new();
            let sel = Selector::new(selector_config(), &vocab(), None, &mut store, "", &mut rng)?;
            let n = rng.gen_range(1..6);
            let ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..vocab().len())).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            finite_difference_check(&store, EPS, 2, i, |g| {
                let q = sel.forward::<f64, ChaCha8Rng>(g, &ids, None)?;
                selector_loss(g, q, &labels)
            })
        })
        .collect()
}

fn summarizer_reports(mode: TrainMode) -> Result<Vec<GradCheckReport>> {
    (0..INSTANCES).map(|i| summarizer_report(mode, i)).collect()
}

fn soft_mask_reports() -> Result<Vec<GradCheckReport>> {
    (0..INSTANCES)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + i);
            let n = rng.gen_range(2..6);
            let v = 4;
            let ext_ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..v + 2)).collect();
            let target = rng.gen_range(0..v + 2);
            let mut store = ParamStore::<f64>::new();
            let mut add = |name: &str, len: usize, lo: f64, hi: f64| {
                let data = (0..len).map(|_| rng.gen_range(lo..hi)).collect();
                store.add(name, Tensor::new(vec![1, len], data)?, Trainable::All)
            };
            let att = add("attention_logits", n, -1.0, 1.0)?;
            let q = add("q", n, 0.05, 0.95)?;
            let gen = add("generation_logits", v, -1.0, 1.0)?;
            let sw = add("switch_logit", 1, -1.0, 1.0)?;
            finite_difference_check(&store, EPS, 4, i, |g| {
                let a = g.param(att);
                let a = g.softmax(a)?;
                let p = g.param(gen);
                let p = g.softmax(p)?;
                let s = g.param(sw);
                let s = g.sigmoid(s);
                let q = g.param(q);
                let joint = joint_distribution(g, a, s, p, &ext_ids, v + 2, &CopyWeights::Soft(q))?;
                let pick = g.pick(joint, target)?;
                let ln = g.ln(pick);
                Ok(g.scale(ln, -1.0))
            })
        })
        .collect()
}

/// Worst relative error and instance count of one family.
#[derive(Debug, Clone)]
pub struct FamilyResult {
    pub name: &'static str,
    pub instances: usize,
    pub worst_relative_error: f64,
}

impl FamilyResult {
    pub fn passed(&self) -> bool {
        self.instances as u64 >= INSTANCES && self.worst_relative_error < TOLERANCE
    }
}

fn summarize(name: &'static str, reports: Result<Vec<GradCheckReport>>) -> Result<FamilyResult> {
    let reports = reports?;
    Ok(FamilyResult {
        name,
        instances: reports.iter().filter(|r| r.coordinates > 0).count(),
        worst_relative_error: reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max),
    })
}

pub fn selector_family() -> Result<FamilyResult> {
    summarize("selector", selector_reports())
}

pub fn pointer_generator_family() -> Result<FamilyResult> {
    summarize("pointer-generator", summarizer_reports(TrainMode::Baseline))
}

pub fn mask_only_family() -> Result<FamilyResult> {
    summarize("mask-only", summarizer_reports(TrainMode::MaskOnly))
}

pub fn multitask_family() -> Result<FamilyResult> {
    summarize("multi-task", summarizer_reports(TrainMode::MultiTask))
}

pub fn diffmask_family() -> Result<FamilyResult> {
    summarize("diffmask", summarizer_reports(TrainMode::DiffMask))
}

pub fn soft_mask_family() -> Result<FamilyResult> {
    summarize("soft mask", soft_mask_reports())
}

/// Every family, in a fixed order.
pub fn all_families() -> Result<Vec<FamilyResult>> {
    Ok(vec![
        selector_family()?,
        pointer_generator_family()?,
        mask_only_family()?,
        multitask_family()?,
        diffmask_family()?,
        soft_mask_family()?,
    ])
}
