use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use bottomup::bottom_up::TrainMode;
use bottomup::config::RunConfig;
use bottomup::corpus::{build_vocab, tokenize, truncate_example, write_dataset, ExamplePair, Token};
use bottomup::decode::summarize;
use bottomup::metrics::{
    copy_stats, corpus_rouge, extract_words_threshold, lead_k, select_top_sentences, Report, Triple,
};
use bottomup::persist::{SelectorBundle, SummarizerBundle};
use bottomup::selector::{load_word_vectors, parse_q_jsonl, q_json_line, tagged_sentences, train_selector, Selector};
use bottomup::summarizer::{train_summarizer, PreparedExample, Summarizer};
use bottomup::synthetic::{generate, SyntheticConfig};
use bottomup::tensor::ParamStore;
use bottomup::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::run::{flag, io_error, load_prepared, path_flag, read_text, required_path, resolve_config, write_text, RunDir};
use crate::{AnalyzeArgs, Command, DecodeArgs, EvaluateArgs, PreprocessArgs, TrainSelectorArgs, TrainSummarizerArgs};

pub(crate) fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(a, out),
        Command::TrainSelector(a) => train_selector_cmd(a, out),
        Command::TrainSummarizer(a) => train_summarizer_cmd(a, out),
        Command::Decode(a) => decode(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Analyze(a) => analyze(a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn preprocess(a: PreprocessArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(&a.common, None, Vec::new())?;
    let raw = match (&a.input, a.synthetic) {
        (Some(path), _) => bottomup::corpus::load_dataset(path)?,
        (None, Some(n)) => generate(&SyntheticConfig {
            documents: n,
            seed: cfg.seed,
            ..SyntheticConfig::default()
        })?,
        (None, None) => return Err(Error::InvalidArgument("pass --input or --synthetic".into())),
    };
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pairs = raw
        .iter()
        .map(|p| Ok(truncate_example(p, cfg.max_src_len, cfg.max_tgt_len)?.with_labels()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    write_dataset(&pairs, &a.output)?;
    say(out, &format!("wrote {} examples to {}\n", pairs.len(), a.output.display()))
}

fn train_selector_cmd(a: TrainSelectorArgs, out: &mut dyn Write) -> Result<()> {
    let mut flags = Vec::new();
    path_flag(&mut flags, "train_path", &a.train);
    path_flag(&mut flags, "valid_path", &a.valid);
    path_flag(&mut flags, "word_vectors", &a.word_vectors);
    flag(&mut flags, "sel_max_examples", a.max_examples);
    flag(&mut flags, "sel_epochs", a.epochs);
    let cfg = resolve_config(&a.common, None, flags)?;

    let train = load_prepared(&required_path(&cfg.train_path, "--train")?, &cfg)?;
    let vocab = build_vocab(&train, cfg.vocab_size)?;
    let vectors = if cfg.word_vectors.is_empty() {
        None
    } else {
        Some(load_word_vectors(Path::new(&cfg.word_vectors), cfg.sel_static_dim)?)
    };
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let selector = Selector::new(cfg.selector(), &vocab, vectors.as_ref(), &mut store, "", &mut rng)?;
    let data = tagged_sentences(&vocab, &train);
    let valid = if cfg.valid_path.is_empty() {
        None
    } else {
        Some(tagged_sentences(&vocab, &load_prepared(Path::new(&cfg.valid_path), &cfg)?))
    };

    let run = RunDir::create(&a.run_dir, &cfg)?;
    let report = train_selector(&selector, &mut store, &data, valid.as_deref(), &cfg.selector_training())?;
    let mut log = String::new();
    for (epoch, loss, auc) in &report.epochs {
        let line = serde_json::json!({ "epoch": epoch, "loss": loss, "auc": auc });
        let _ = writeln!(log, "{line}");
    }
    write_text(&run.logs("selector.jsonl"), &log)?;

    let bundle = SelectorBundle {
        selector,
        params: store,
        vocab,
        config: cfg.clone(),
    };
    bundle.save(&run.checkpoint("selector.busm"))?;

    if let Some(path) = &a.predict {
        let docs = load_prepared(path, &cfg)?;
        let mut text = String::new();
        for d in &docs {
            let q = bundle.selector.predict_sentences(&bundle.params, &bundle.vocab, &d.source_sentences)?;
            text.push_str(&q_json_line(&d.id, &q)?);
            text.push('\n');
        }
        write_text(&run.output("q.jsonl"), &text)?;
    }

    let auc = report
        .best_auc
        .map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    say(
        out,
        &format!(
            "selector trained on {} sentences; best validation AUC {auc}; checkpoint {}\n",
            report.examples_used,
            run.checkpoint("selector.busm").display()
        ),
    )
}

fn prepare(pairs: &[ExamplePair], vocab: &bottomup::corpus::Vocabulary) -> Result<Vec<PreparedExample>> {
    pairs.iter().map(|p| PreparedExample::new(vocab, p)).collect()
}

fn train_summarizer_cmd(a: TrainSummarizerArgs, out: &mut dyn Write) -> Result<()> {
    let mut flags = Vec::new();
    path_flag(&mut flags, "train_path", &a.train);
    path_flag(&mut flags, "valid_path", &a.valid);
    flag(&mut flags, "mode", a.mode.as_deref());
    flag(&mut flags, "epochs", a.epochs);
    let cfg = resolve_config(&a.common, None, flags)?;

    let train = load_prepared(&required_path(&cfg.train_path, "--train")?, &cfg)?;
    let vocab = build_vocab(&train, cfg.vocab_size)?;
    let train = prepare(&train, &vocab)?;
    let valid = if cfg.valid_path.is_empty() {
        Vec::new()
    } else {
        prepare(&load_prepared(Path::new(&cfg.valid_path), &cfg)?, &vocab)?
    };

    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Summarizer::new(cfg.summarizer(), cfg.selector(), cfg.mode, &vocab, &mut store, &mut rng)?;
    let run = RunDir::create(&a.run_dir, &cfg)?;
    let mut log = String::new();
    let logs = train_summarizer(&model, &mut store, &train, &valid, &cfg.summarizer_training(), |e| {
        if let Ok(line) = serde_json::to_string(e) {
            let _ = writeln!(log, "{line}");
        }
    })?;
    write_text(&run.logs("train.jsonl"), &log)?;

    let bundle = SummarizerBundle {
        model,
        params: store,
        vocab,
        config: cfg.clone(),
    };
    bundle.save(&run.checkpoint("summarizer.busm"))?;
    let ppl = logs
        .last()
        .map_or_else(|| "n/a".to_string(), |l| format!("{:.4}", l.val_ppl));
    say(
        out,
        &format!(
            "trained {} summarizer for {} epochs; final validation perplexity {ppl}; checkpoint {}\n",
            cfg.mode,
            logs.len(),
            run.checkpoint("summarizer.busm").display()
        ),
    )
}

enum QSource {
    None,
    File(HashMap<String, Vec<f64>>),
    Selector(Box<SelectorBundle>),
    Oracle,
}

impl QSource {
    fn open(q: &Option<std::path::PathBuf>, selector: &Option<std::path::PathBuf>, oracle: bool) -> Result<Self> {
        Ok(match (q, selector) {
            (Some(path), _) => QSource::File(parse_q_jsonl(&read_text(path)?)?),
            (None, Some(path)) => QSource::Selector(Box::new(SelectorBundle::load(path)?)),
            (None, None) if oracle => QSource::Oracle,
            (None, None) => QSource::None,
        })
    }

    fn for_document(&self, doc: &ExamplePair) -> Result<Option<Vec<f64>>> {
        Ok(match self {
            QSource::None => None,
            QSource::File(map) => Some(
                map.get(&doc.id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no q for document {:?}", doc.id)))?,
            ),
            QSource::Selector(b) => Some(b.selector.predict_sentences(&b.params, &b.vocab, &doc.source_sentences)?),
            QSource::Oracle => {
                let labels = doc
                    .copy_labels
                    .clone()
                    .unwrap_or_else(|| doc.clone().with_labels().copy_labels.unwrap_or_default());
                Some(labels.into_iter().map(f64::from).collect())
            }
        })
    }
}

fn decode(a: DecodeArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = SummarizerBundle::load(&a.model)?;
    let mut flags = Vec::new();
    path_flag(&mut flags, "test_path", &a.input);
    flag(&mut flags, "epsilon", a.epsilon);
    flag(&mut flags, "lambda", a.lambda);
    flag(&mut flags, if a.mask { "mask_beam" } else { "beam" }, a.beam);
    flag(&mut flags, "alpha", a.alpha);
    flag(&mut flags, "beta", a.beta);
    flag(&mut flags, "min_length", a.min_length);
    flag(&mut flags, "max_length", a.max_length);
    if a.no_trigram_block {
        flags.push(("block_trigrams".to_string(), "false".to_string()));
    }
    let cfg = resolve_config(&a.common, Some(&bundle.config.to_key_value()), flags)?;
    let docs = load_prepared(&required_path(&cfg.test_path, "--input")?, &cfg)?;
    let mask = if a.mask { Some(cfg.mask()?) } else { None };
    let q_source = QSource::open(&a.q, &a.selector, a.oracle)?;
    let own_q = matches!(bundle.model.mode, TrainMode::MultiTask | TrainMode::DiffMask);
    if a.mask && matches!(q_source, QSource::None) && !own_q {
        return Err(Error::InvalidArgument(format!(
            "--mask with a {} model needs --selector, --q or --oracle",
            bundle.model.mode
        )));
    }
    let inference = cfg.inference(a.mask);

    let run = a.run_dir.as_deref().map(|d| RunDir::create(d, &cfg)).transpose()?;
    let mut text = String::new();
    for doc in &docs {
        let q = q_source.for_document(doc)?;
        let d = summarize(
            &bundle.model,
            &bundle.params,
            &bundle.vocab,
            &doc.id,
            &doc.source(),
            &inference,
            mask.as_ref(),
            q.as_deref(),
        )?;
        for w in &d.warnings {
            log::warn!("{}: {w}", d.id);
        }
        text.push_str(&serde_json::to_string(&d)?);
        text.push('\n');
    }
    let target = a.output.clone().or_else(|| run.as_ref().map(|r| r.output("decoded.jsonl")));
    match target {
        Some(path) => {
            write_text(&path, &text)?;
            say(out, &format!("decoded {} documents to {}\n", docs.len(), path.display()))
        }
        None => say(out, &text),
    }
}

#[derive(Deserialize)]
struct Candidate {
    id: String,
    summary: String,
}

fn load_candidates(path: &Path) -> Result<Vec<(String, Vec<Token>)>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let c: Candidate = serde_json::from_str(l).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            Ok((c.id, tokenize(&c.summary)))
        })
        .collect()
}

/// Candidates paired with their reference documents, in candidate order.
fn pair_up<'a>(
    candidates: &'a [(String, Vec<Token>)],
    references: &'a [ExamplePair],
) -> Result<Vec<(&'a [Token], &'a ExamplePair)>> {
    let by_id: HashMap<&str, &ExamplePair> = references.iter().map(|r| (r.id.as_str(), r)).collect();
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate summaries"));
    }
    candidates
        .iter()
        .map(|(id, toks)| {
            by_id
                .get(id.as_str())
                .map(|r| (toks.as_slice(), *r))
                .ok_or_else(|| Error::InvalidArgument(format!("no reference for candidate {id:?}")))
        })
        .collect()
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let candidates = load_candidates(&a.candidates)?;
    let references = bottomup::corpus::load_dataset(&a.references)?;
    let pairs = pair_up(&candidates, &references)?;
    let targets: Vec<Vec<Token>> = pairs.iter().map(|(_, r)| r.target()).collect();
    let scored: Vec<(&[Token], &[Token])> = pairs.iter().zip(&targets).map(|((c, _), t)| (*c, t.as_slice())).collect();
    let report = Report::from_rouge(&corpus_rouge(&scored));
    if let Some(path) = &a.csv {
        write_text(path, &report.to_csv())?;
    }
    say(out, &report.to_table())
}

fn rouge_rows(report: &mut Report, name: &str, pairs: &[(&[Token], &[Token])]) {
    let s = corpus_rouge(pairs);
    report.push(format!("{name} ROUGE-1-F"), Some(100.0 * s.rouge1.f1));
    report.push(format!("{name} ROUGE-2-F"), Some(100.0 * s.rouge2.f1));
    report.push(format!("{name} ROUGE-L-F"), Some(100.0 * s.rouge_l.f1));
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg: RunConfig = resolve_config(&a.common, None, Vec::new())?;
    let candidates = load_candidates(&a.candidates)?;
    let references = load_prepared(&a.references, &cfg)?;
    let pairs = pair_up(&candidates, &references)?;
    let sources: Vec<Vec<Token>> = pairs.iter().map(|(_, r)| r.source()).collect();
    let targets: Vec<Vec<Token>> = pairs.iter().map(|(_, r)| r.target()).collect();

    let triples: Vec<Triple<'_>> = pairs
        .iter()
        .zip(sources.iter().zip(&targets))
        .map(|((c, _), (s, t))| Triple {
            generated: c,
            source: s,
            reference: t,
        })
        .collect();
    let stats = copy_stats(&triples);
    let mut report = Report::default();
    report.push("copied-word precision", stats.copied_word_precision);
    report.push("novel-word rate", Some(stats.novel_word_rate));
    report.push("copied tokens in 11+ phrases (%)", Some(stats.histogram.long_share()));
    let system: Vec<(&[Token], &[Token])> = pairs.iter().zip(&targets).map(|((c, _), t)| (*c, t.as_slice())).collect();
    rouge_rows(&mut report, "system", &system);

    let lead: Vec<Vec<Token>> = pairs.iter().map(|(_, r)| lead_k(r, 3)).collect();
    let lead_pairs: Vec<(&[Token], &[Token])> = lead.iter().zip(&targets).map(|(c, t)| (c.as_slice(), t.as_slice())).collect();
    rouge_rows(&mut report, "LEAD-3", &lead_pairs);

    let q_source = QSource::open(&a.q, &None, a.oracle)?;
    if !matches!(q_source, QSource::None) {
        let mut top = Vec::new();
        let mut threshold = Vec::new();
        for ((_, r), t) in pairs.iter().zip(&targets) {
            let q = q_source.for_document(r)?.unwrap_or_default();
            top.push(select_top_sentences(r, &q, 3)?);
            threshold.push(extract_words_threshold(&r.source(), &q, t.len())?);
        }
        let top_pairs: Vec<(&[Token], &[Token])> = top.iter().zip(&targets).map(|(c, t)| (c.as_slice(), t.as_slice())).collect();
        rouge_rows(&mut report, "Top-3 sentences", &top_pairs);
        let th_pairs: Vec<(&[Token], &[Token])> =
            threshold.iter().zip(&targets).map(|(c, t)| (c.as_slice(), t.as_slice())).collect();
        rouge_rows(&mut report, "threshold words", &th_pairs);
    }

    if let Some(dir) = &a.output_dir {
        write_text(&dir.join("report.csv"), &report.to_csv())?;
        write_text(&dir.join("histogram.csv"), &stats.histogram.to_csv())?;
    }
    say(out, &report.to_table())
}
