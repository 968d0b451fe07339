//! Command-line pipeline: preprocess, train-selector, train-summarizer,
//! decode, evaluate and analyze.

mod commands;
mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use run::{resolve_config, RunDir};

#[derive(Debug, Parser)]
#[command(
    name = "bottomup",
    version,
    about = "Bottom-up abstractive summarization: content selection plus a masked pointer-generator",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Configuration options shared by the subcommands that read a config.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Parameter profile: cnn-dm, nyt or desk.
    #[arg(long)]
    pub profile: Option<String>,
    /// Random seed; falls back to BUSM_SEED, then the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker cap. Execution is sequential, so this is recorded but unused.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize, truncate and label a dataset, or generate a synthetic one.
    Preprocess(PreprocessArgs),
    /// Train the content selector on sentence-level copy labels.
    TrainSelector(TrainSelectorArgs),
    /// Train the pointer-generator in one of the four training modes.
    TrainSummarizer(TrainSummarizerArgs),
    /// Beam-search decode a dataset, optionally with a bottom-up mask.
    Decode(DecodeArgs),
    /// ROUGE of candidate summaries against references.
    Evaluate(EvaluateArgs),
    /// Copy statistics and extractive baselines.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// JSON-lines dataset with id, src_sents and tgt_sents.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate this many synthetic documents instead of reading --input.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainSelectorArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Whitespace-separated word vectors for the static embeddings.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// Cap on training sentences.
    #[arg(long)]
    pub max_examples: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Also write selection probabilities for this dataset to outputs/q.jsonl.
    #[arg(long, value_name = "DATASET")]
    pub predict: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainSummarizerArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// baseline, mask-only, multi-task or diffmask.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub run_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Summarizer checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset to summarize (defaults to the config's test_path).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON-lines output; defaults to RUN_DIR/outputs/decoded.jsonl, else stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Restrict copying to positions the selector keeps.
    #[arg(long)]
    pub mask: bool,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Beam size (with --mask this sets mask_beam).
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub min_length: Option<usize>,
    #[arg(long)]
    pub max_length: Option<usize>,
    #[arg(long)]
    pub no_trigram_block: bool,
    /// Selector checkpoint that supplies q.
    #[arg(long, conflicts_with_all = ["q", "oracle"])]
    pub selector: Option<PathBuf>,
    /// Precomputed q as {"id", "q"} JSON lines.
    #[arg(long, conflicts_with = "oracle")]
    pub q: Option<PathBuf>,
    /// Use the gold copy labels as q.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Decoded summaries as {"id", "summary"} JSON lines.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Dataset holding the reference summaries.
    #[arg(long)]
    pub references: PathBuf,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    /// Dataset holding sources and reference summaries.
    #[arg(long)]
    pub references: PathBuf,
    /// q for the Top-3 and threshold baselines, as {"id", "q"} JSON lines.
    #[arg(long, conflicts_with = "oracle")]
    pub q: Option<PathBuf>,
    /// Use the gold copy labels as q for the baselines.
    #[arg(long)]
    pub oracle: bool,
    /// Directory for report.csv and histogram.csv.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Runs one invocation against the given streams and returns the exit status:
/// 0 on success, 1 on failure, 2 on a usage error.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match commands::execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().lines().collect::<Vec<_>>().join("; ");
            let _ = writeln!(err, "error: {message}");
            1
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(argv, &mut out, &mut err)
}
