//! Config resolution, run directories and file helpers.

use std::path::{Path, PathBuf};

use bottomup::config::RunConfig;
use bottomup::corpus::{load_dataset, truncate_example, ExamplePair};
use bottomup::{Error, Result};

use crate::Common;

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var("BUSM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("BUSM_SEED must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Layers, lowest first: profile defaults, `base` (a checkpoint's config),
/// the BUSM_SEED fallback, `--config`, then command flags and `--set`.
pub fn resolve_config(common: &Common, base: Option<&str>, flags: Vec<(String, String)>) -> Result<RunConfig> {
    let mut text = base.unwrap_or_default().to_string();
    if let Some(seed) = seed_from_env()? {
        text.push_str(&format!("\nseed = {seed}\n"));
    }
    if let Some(path) = &common.config {
        text.push('\n');
        text.push_str(&read_text(path)?);
    }
    let mut overrides = Vec::new();
    if let Some(p) = &common.profile {
        overrides.push(("profile".to_string(), p.clone()));
    }
    if let Some(s) = common.seed {
        overrides.push(("seed".to_string(), s.to_string()));
    }
    if let Some(t) = common.threads {
        overrides.push(("threads".to_string(), t.to_string()));
    }
    overrides.extend(flags);
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        overrides.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    let cfg = RunConfig::resolve((!text.trim().is_empty()).then_some(text.as_str()), &overrides)?;
    if cfg.threads > 1 {
        log::debug!("threads = {} requested; execution is sequential", cfg.threads);
    }
    Ok(cfg)
}

/// Pushes `key = value` when the flag was given.
pub(crate) fn flag<V: ToString>(flags: &mut Vec<(String, String)>, key: &str, value: Option<V>) {
    if let Some(v) = value {
        flags.push((key.to_string(), v.to_string()));
    }
}

pub(crate) fn path_flag(flags: &mut Vec<(String, String)>, key: &str, value: &Option<PathBuf>) {
    flag(flags, key, value.as_ref().map(|p| p.display()));
}

/// A configured dataset path, or an error naming the flag that sets it.
pub(crate) fn required_path(value: &str, flag: &str) -> Result<PathBuf> {
    if value.is_empty() {
        return Err(Error::Config(format!("no dataset given; pass {flag}")));
    }
    Ok(PathBuf::from(value))
}

/// Loads a dataset, truncates it to the configured lengths and recomputes
/// copy labels on the truncated pairs.
pub fn load_prepared(path: &Path, cfg: &RunConfig) -> Result<Vec<ExamplePair>> {
    let pairs = load_dataset(path)?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    pairs
        .iter()
        .map(|p| Ok(truncate_example(p, cfg.max_src_len, cfg.max_tgt_len)?.with_labels()))
        .collect()
}

/// One directory per run: `config.txt`, `logs/`, `checkpoints/`, `outputs/`.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub const CONFIG: &'static str = "config.txt";

    /// Creates the layout and echoes the resolved config.
    pub fn create(root: &Path, cfg: &RunConfig) -> Result<Self> {
        for sub in ["logs", "checkpoints", "outputs"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        }
        write_text(&root.join(Self::CONFIG), &cfg.to_key_value())?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn logs(&self, name: &str) -> PathBuf {
        self.root.join("logs").join(name)
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.root.join("outputs").join(name)
    }
}
