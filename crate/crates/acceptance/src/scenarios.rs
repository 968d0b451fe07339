//! End-to-end runs on the synthetic corpus: overfitting, selector data
//! efficiency, oracle masking, the inference-penalty ablation and persistence.

use std::path::Path;
use std::time::{Duration, Instant};

use bottomup::bottom_up::MaskConfig;
use bottomup::config::RunConfig;
use bottomup::corpus::{build_vocab, tokenize, write_dataset, ExamplePair, Token, Vocabulary};
use bottomup::decode::{has_repeated_trigram, summarize, Decoded, InferenceConfig};
use bottomup::metrics::{copy_stats, corpus_rouge, CopyStats, Triple};
use bottomup::persist::SummarizerBundle;
use bottomup::selector::{evaluate_auc, tagged_sentences, train_selector, Selector, TaggedSequence};
use bottomup::summarizer::{train_summarizer, PreparedExample, Summarizer};
use bottomup::synthetic::{generate, SyntheticConfig};
use bottomup::tensor::ParamStore;
use bottomup::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Documents in the end-to-end corpus and how they are split.
pub const CORPUS_DOCUMENTS: usize = 500;
pub const CORPUS_SEED: u64 = 7;
pub const TRAIN_DOCUMENTS: usize = 420;
pub const VALID_DOCUMENTS: usize = 30;
pub const OVERFIT_DOCUMENTS: usize = 50;
pub const OVERFIT_EPOCHS: usize = 150;
pub const BASELINE_EPOCHS: usize = 8;
/// Oracle-mask threshold: gold labels are 0 or 1.
pub const ORACLE_EPSILON: f64 = 0.5;

/// Selector training sizes (sentences) and the shared epoch budget: each
/// size gets `ceil(SELECTOR_BUDGET / n)` epochs.
pub const SELECTOR_SMALL: usize = 1_000;
pub const SELECTOR_LARGE: usize = 10_000;
pub const SELECTOR_BUDGET: usize = 12_000;
/// The selector needs more sentences than the end-to-end corpus holds, so
/// its sentences come from a larger corpus drawn from the same generator.
pub const SELECTOR_DOCUMENTS: usize = 3_200;
pub const SELECTOR_SEED: u64 = 11;

pub const ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn corpus(documents: usize, seed: u64) -> Result<Vec<ExamplePair>> {
    generate(&SyntheticConfig {
        documents,
        seed,
        ..SyntheticConfig::default()
    })
}

/// The 500-document corpus split into train, validation and held-out parts.
pub struct Split {
    pub train: Vec<ExamplePair>,
    pub valid: Vec<ExamplePair>,
    pub held_out: Vec<ExamplePair>,
}

pub fn end_to_end_split() -> Result<Split> {
    let mut docs = corpus(CORPUS_DOCUMENTS, CORPUS_SEED)?;
    let held_out = docs.split_off(TRAIN_DOCUMENTS + VALID_DOCUMENTS);
    let valid = docs.split_off(TRAIN_DOCUMENTS);
    Ok(Split {
        train: docs,
        valid,
        held_out,
    })
}

/// A trained summarizer with everything needed to decode.
pub struct Trained {
    pub bundle: SummarizerBundle,
    pub elapsed: Duration,
}

fn prepare(pairs: &[ExamplePair], vocab: &Vocabulary) -> Result<Vec<PreparedExample>> {
    pairs.iter().map(|p| PreparedExample::new(vocab, p)).collect()
}

/// Trains a summarizer the way `train-summarizer` does.
pub fn train(cfg: &RunConfig, train: &[ExamplePair], valid: &[ExamplePair]) -> Result<Trained> {
    let start = Instant::now();
    let vocab = build_vocab(train, cfg.vocab_size)?;
    let train_set = prepare(train, &vocab)?;
    let valid_set = prepare(valid, &vocab)?;
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Summarizer::new(cfg.summarizer(), cfg.selector(), cfg.mode, &vocab, &mut store, &mut rng)?;
    train_summarizer(&model, &mut store, &train_set, &valid_set, &cfg.summarizer_training(), |_| {})?;
    Ok(Trained {
        bundle: SummarizerBundle {
            model,
            params: store,
            vocab,
            config: cfg.clone(),
        },
        elapsed: start.elapsed(),
    })
}

/// Gold copy labels as selection probabilities.
fn oracle_q(doc: &ExamplePair) -> Vec<f64> {
    let labels = doc.copy_labels.clone().or_else(|| doc.clone().with_labels().copy_labels);
    labels.unwrap_or_default().into_iter().map(f64::from).collect()
}

pub fn decode_all(
    bundle: &SummarizerBundle,
    docs: &[ExamplePair],
    cfg: &InferenceConfig,
    mask: Option<&MaskConfig>,
) -> Result<Vec<Decoded>> {
    docs.iter()
        .map(|d| {
            let q = mask.map(|_| oracle_q(d));
            summarize(&bundle.model, &bundle.params, &bundle.vocab, &d.id, &d.source(), cfg, mask, q.as_deref())
        })
        .collect()
}

fn tokens(decoded: &[Decoded]) -> Vec<Vec<Token>> {
    decoded.iter().map(|d| tokenize(&d.summary)).collect()
}

/// Mean ROUGE-1 F (×100) against the documents' summaries.
pub fn rouge1(decoded: &[Decoded], docs: &[ExamplePair]) -> f64 {
    let cands = tokens(decoded);
    let refs: Vec<Vec<Token>> = docs.iter().map(ExamplePair::target).collect();
    let pairs: Vec<(&[Token], &[Token])> = cands.iter().zip(&refs).map(|(c, r)| (c.as_slice(), r.as_slice())).collect();
    100.0 * corpus_rouge(&pairs).rouge1.f1
}

pub fn stats(decoded: &[Decoded], docs: &[ExamplePair]) -> CopyStats {
    let cands = tokens(decoded);
    let sources: Vec<Vec<Token>> = docs.iter().map(ExamplePair::source).collect();
    let refs: Vec<Vec<Token>> = docs.iter().map(ExamplePair::target).collect();
    let triples: Vec<Triple<'_>> = cands
        .iter()
        .zip(sources.iter().zip(&refs))
        .map(|(g, (s, r))| Triple {
            generated: g,
            source: s,
            reference: r,
        })
        .collect();
    copy_stats(&triples)
}

/// The desk profile with the given overrides.
pub fn desk(overrides: &[(&str, &str)]) -> Result<RunConfig> {
    RunConfig::profile("desk")?.apply(overrides)
}

// ---------------------------------------------------------------- overfitting

#[derive(Debug, Clone)]
pub struct Overfit {
    pub documents: usize,
    pub rouge1: f64,
    pub elapsed: Duration,
}

/// Trains on a 50-document subset with a constant learning rate and decodes
/// the same documents.
pub fn overfit(split: &Split) -> Result<Overfit> {
    let start = Instant::now();
    let docs = &split.train[..OVERFIT_DOCUMENTS];
    let cfg = desk(&[("epochs", &OVERFIT_EPOCHS.to_string()), ("lr_halving", "false")])?;
    let trained = train(&cfg, docs, &[])?;
    let decoded = decode_all(&trained.bundle, docs, &cfg.inference(false), None)?;
    Ok(Overfit {
        documents: docs.len(),
        rouge1: rouge1(&decoded, docs),
        elapsed: start.elapsed(),
    })
}

// ---------------------------------------------------------------- selector

#[derive(Debug, Clone)]
pub struct SelectorRun {
    pub sentences: usize,
    pub epochs: usize,
    pub validation_auc: Option<f64>,
    pub test_auc: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SelectorEfficiency {
    pub small: SelectorRun,
    pub large: SelectorRun,
}

pub fn selector_epochs(sentences: usize) -> usize {
    SELECTOR_BUDGET.div_ceil(sentences)
}

fn sentences(vocab: &Vocabulary, documents: usize, seed: u64) -> Result<Vec<TaggedSequence>> {
    Ok(tagged_sentences(vocab, &corpus(documents, seed)?))
}

fn selector_run(
    cfg: &RunConfig,
    vocab: &Vocabulary,
    train: &[TaggedSequence],
    valid: &[TaggedSequence],
    test: &[TaggedSequence],
) -> Result<SelectorRun> {
    let start = Instant::now();
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let selector = Selector::new(cfg.selector(), vocab, None, &mut store, "", &mut rng)?;
    let mut training = cfg.selector_training();
    training.epochs = selector_epochs(train.len());
    let report = train_selector(&selector, &mut store, train, Some(valid), &training)?;
    Ok(SelectorRun {
        sentences: train.len(),
        epochs: training.epochs,
        validation_auc: report.best_auc,
        test_auc: evaluate_auc(&selector, &store, test)?,
        elapsed: start.elapsed(),
    })
}

/// Trains the selector on the first 1,000 and the first 10,000 sentences of
/// one shuffled pool and scores both on separate test documents.
pub fn selector_efficiency() -> Result<SelectorEfficiency> {
    let pool_docs = corpus(SELECTOR_DOCUMENTS, SELECTOR_SEED)?;
    let cfg = desk(&[])?;
    let vocab = build_vocab(&pool_docs, cfg.vocab_size)?;
    let pool = tagged_sentences(&vocab, &pool_docs);
    if pool.len() < SELECTOR_LARGE {
        return Err(Error::InvalidArgument(format!(
            "selector pool holds {} sentences, need {SELECTOR_LARGE}",
            pool.len()
        )));
    }
    let valid = sentences(&vocab, 100, SELECTOR_SEED + 1)?;
    let test = sentences(&vocab, 300, SELECTOR_SEED + 2)?;
    Ok(SelectorEfficiency {
        small: selector_run(&cfg, &vocab, &pool[..SELECTOR_SMALL], &valid, &test)?,
        large: selector_run(&cfg, &vocab, &pool[..SELECTOR_LARGE], &valid, &test)?,
    })
}

// ---------------------------------------------------------------- oracle mask

#[derive(Debug, Clone)]
pub struct MaskEffect {
    pub plain: CopyStats,
    pub masked: CopyStats,
    pub plain_rouge1: f64,
    pub masked_rouge1: f64,
    pub masked_beam: usize,
}

/// The baseline trained on the train part, validated on the validation part.
pub fn baseline(split: &Split) -> Result<Trained> {
    let cfg = desk(&[("epochs", &BASELINE_EPOCHS.to_string())])?;
    train(&cfg, &split.train, &split.valid)
}

/// Held-out decoding without and with the oracle mask.
pub fn mask_effect(model: &Trained, held_out: &[ExamplePair]) -> Result<MaskEffect> {
    let cfg = &model.bundle.config;
    let plain = decode_all(&model.bundle, held_out, &cfg.inference(false), None)?;
    let mask = MaskConfig::new(ORACLE_EPSILON, cfg.lambda)?;
    let masked = decode_all(&model.bundle, held_out, &cfg.inference(true), Some(&mask))?;
    Ok(MaskEffect {
        plain: stats(&plain, held_out),
        masked: stats(&masked, held_out),
        plain_rouge1: rouge1(&plain, held_out),
        masked_rouge1: rouge1(&masked, held_out),
        masked_beam: cfg.mask_beam,
    })
}

// ---------------------------------------------------------------- ablation

#[derive(Debug, Clone)]
pub struct Ablation {
    /// `(α, mean output length)`
    pub lengths: Vec<(f64, f64)>,
    pub blocked_rouge1: f64,
    pub unblocked_rouge1: f64,
    pub blocked_repeats: usize,
    pub unblocked_repeats: usize,
}

impl Ablation {
    pub fn monotone_lengths(&self) -> bool {
        let diffs: Vec<f64> = self.lengths.windows(2).map(|w| w[1].1 - w[0].1).collect();
        let changed = self.lengths.first().map(|f| f.1) != self.lengths.last().map(|l| l.1);
        changed && (diffs.iter().all(|&d| d >= 0.0) || diffs.iter().all(|&d| d <= 0.0))
    }
}

fn mean_length(decoded: &[Decoded]) -> f64 {
    decoded.iter().map(|d| d.tokens.len() as f64).sum::<f64>() / decoded.len().max(1) as f64
}

/// Sweeps the length penalty exponent, then toggles trigram blocking.
pub fn ablation(model: &Trained, held_out: &[ExamplePair]) -> Result<Ablation> {
    let base = model.bundle.config.inference(false);
    let mut lengths = Vec::new();
    for alpha in ALPHAS {
        let cfg = InferenceConfig { alpha, ..base.clone() };
        lengths.push((alpha, mean_length(&decode_all(&model.bundle, held_out, &cfg, None)?)));
    }
    let blocked = decode_all(&model.bundle, held_out, &InferenceConfig { block_trigrams: true, ..base.clone() }, None)?;
    let unblocked = decode_all(&model.bundle, held_out, &InferenceConfig { block_trigrams: false, ..base }, None)?;
    let repeats = |ds: &[Decoded]| ds.iter().filter(|d| has_repeated_trigram(&d.tokens)).count();
    Ok(Ablation {
        lengths,
        blocked_rouge1: rouge1(&blocked, held_out),
        unblocked_rouge1: rouge1(&unblocked, held_out),
        blocked_repeats: repeats(&blocked),
        unblocked_repeats: repeats(&unblocked),
    })
}

// ---------------------------------------------------------------- persistence

#[derive(Debug, Clone)]
pub struct Persistence {
    /// Decoding from a saved and reloaded checkpoint equals decoding from the
    /// in-memory model, scores compared bit for bit.
    pub round_trip_identical: bool,
    /// Re-running training from the echoed `config.txt` reproduces the
    /// checkpoint, the training log and the decode output byte for byte.
    pub rerun_identical: bool,
    pub detail: String,
}

fn same_decodes(a: &[Decoded], b: &[Decoded]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.id == y.id && x.summary == y.summary && x.tokens == y.tokens && x.score.to_bits() == y.score.to_bits()
        })
}

fn cli(args: &[&str]) -> Result<String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = bottomup_cli::run_with(std::iter::once("bottomup").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(Error::InvalidArgument(format!(
            "bottomup {} exited with {code}: {}",
            args.join(" "),
            String::from_utf8_lossy(&err).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Round-trips `model` through checkpoint bytes, then trains and decodes
/// through the command line twice: once from flags and once from the run
/// directory's echoed config.
pub fn persistence(model: &Trained, split: &Split, workdir: &Path) -> Result<Persistence> {
    let docs = &split.held_out;
    let cfg = model.bundle.config.inference(false);
    let direct = decode_all(&model.bundle, docs, &cfg, None)?;
    let path = workdir.join("roundtrip.busm");
    model.bundle.save(&path)?;
    let loaded = SummarizerBundle::load(&path)?;
    let reloaded = decode_all(&loaded, docs, &cfg, None)?;
    let round_trip_identical = same_decodes(&direct, &reloaded) && read(&path)? == loaded.to_bytes()?;

    let train_path = workdir.join("train.jsonl");
    let test_path = workdir.join("test.jsonl");
    write_dataset(&split.train[..40], &train_path)?;
    write_dataset(&split.held_out[..10], &test_path)?;
    let (first, second) = (workdir.join("first"), workdir.join("second"));
    let s = |p: &Path| p.display().to_string();
    cli(&[
        "train-summarizer",
        "--train",
        &s(&train_path),
        "--valid",
        &s(&test_path),
        "--epochs",
        "2",
        "--run-dir",
        &s(&first),
        "--set",
        "emb_dim=16",
        "--set",
        "dec_hidden=32",
        "--set",
        "enc_hidden=16",
        "--seed",
        "5",
    ])?;
    cli(&["train-summarizer", "--config", &s(&first.join("config.txt")), "--run-dir", &s(&second)])?;
    for run in [&first, &second] {
        cli(&[
            "decode",
            "--model",
            &s(&run.join("checkpoints/summarizer.busm")),
            "--input",
            &s(&test_path),
            "--run-dir",
            &s(run),
        ])?;
    }
    let mut differing = Vec::new();
    for file in ["config.txt", "logs/train.jsonl", "checkpoints/summarizer.busm", "outputs/decoded.jsonl"] {
        if read(&first.join(file))? != read(&second.join(file))? {
            differing.push(file);
        }
    }
    Ok(Persistence {
        round_trip_identical,
        rerun_identical: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} held-out decodes identical after reload; rerun reproduced 4 files", docs.len())
        } else {
            format!("rerun differs in {}", differing.join(", "))
        },
    })
}
