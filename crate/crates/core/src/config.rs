//! Run configuration: flat `key = value` text layered as
//! profile defaults < config file < explicit overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bottom_up::{MaskConfig, TrainMode};
use crate::decode::InferenceConfig;
use crate::error::{Error, Result};
use crate::selector::{SelectorConfig, SelectorTrainConfig};
use crate::summarizer::{AttentionScore, SummarizerConfig, SummarizerTrainConfig};

pub const PROFILES: [&str; 3] = ["cnn-dm", "nyt", "desk"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: String,
    pub seed: u64,
    pub threads: usize,

    pub train_path: String,
    pub valid_path: String,
    pub test_path: String,
    pub word_vectors: String,

    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub vocab_size: usize,

    pub emb_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub attention: AttentionScore,

    pub sel_static_dim: usize,
    pub sel_context_dim: usize,
    pub sel_tagger_hidden: usize,
    pub sel_tagger_layers: usize,
    pub sel_dropout: f64,
    pub sel_epochs: usize,
    pub sel_max_examples: usize,

    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub initial_accumulator: f64,
    pub max_grad_norm: f64,
    pub aux_weight: f64,
    pub lr_halving: bool,

    pub epsilon: f64,
    pub lambda: f64,

    pub beam: usize,
    pub mask_beam: usize,
    pub alpha: f64,
    pub beta: f64,
    pub min_length: usize,
    pub max_length: usize,
    pub block_trigrams: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: "desk".into(),
            seed: 1,
            threads: 1,
            train_path: String::new(),
            valid_path: String::new(),
            test_path: String::new(),
            word_vectors: String::new(),
            max_src_len: 400,
            max_tgt_len: 100,
            vocab_size: 50_000,
            emb_dim: 32,
            enc_hidden: 32,
            dec_hidden: 64,
            attention: AttentionScore::Bilinear,
            sel_static_dim: 32,
            sel_context_dim: 32,
            sel_tagger_hidden: 64,
            sel_tagger_layers: 2,
            sel_dropout: 0.5,
            sel_epochs: 5,
            sel_max_examples: crate::selector::MAX_TRAIN_EXAMPLES,
            mode: TrainMode::Baseline,
            epochs: 10,
            batch_size: 1,
            lr: 0.15,
            initial_accumulator: 0.1,
            max_grad_norm: 2.0,
            aux_weight: 1.0,
            lr_halving: true,
            epsilon: 0.15,
            lambda: 2.0,
            beam: 5,
            mask_beam: 10,
            alpha: 1.0,
            beta: 10.0,
            min_length: 6,
            max_length: 60,
            block_trigrams: true,
        }
    }
}

fn to_map(cfg: &RunConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("RunConfig serializes to an object"),
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn profile(name: &str) -> Result<Self> {
        let base = Self {
            profile: name.to_string(),
            ..Self::default()
        };
        match name {
            "desk" => Ok(base),
            "cnn-dm" => Ok(Self {
                max_src_len: 400,
                max_tgt_len: 100,
                min_length: 35,
                max_length: 100,
                ..Self::full_scale(base)
            }),
            "nyt" => Ok(Self {
                max_src_len: 400,
                min_length: 6,
                max_length: 100,
                ..Self::full_scale(base)
            }),
            other => Err(Error::Config(format!(
                "unknown profile {other:?}; valid profiles: {}",
                PROFILES.join(", ")
            ))),
        }
    }

    fn full_scale(base: Self) -> Self {
        Self {
            emb_dim: 128,
            enc_hidden: 256,
            dec_hidden: 512,
            sel_static_dim: 100,
            sel_context_dim: 1024,
            sel_tagger_hidden: 256,
            batch_size: 16,
            beta: 10.0,
            lambda: 2.0,
            ..base
        }
    }

    /// Applies overrides on top of `self`; values are parsed according to the
    /// type of the existing field.
    pub fn apply<K: AsRef<str>, V: AsRef<str>>(&self, pairs: &[(K, V)]) -> Result<Self> {
        let mut map = to_map(self);
        for (k, v) in pairs {
            let (k, v) = (k.as_ref(), v.as_ref());
            let current = map
                .get(k)
                .ok_or_else(|| Error::Config(format!("unknown config key {k:?}")))?;
            let parsed = match current {
                Value::String(_) => Value::String(v.to_string()),
                Value::Bool(_) => Value::Bool(
                    v.parse()
                        .map_err(|_| Error::Config(format!("{k}: expected true or false, got {v:?}")))?,
                ),
                Value::Number(n) if n.is_u64() => Value::from(
                    v.parse::<u64>()
                        .map_err(|_| Error::Config(format!("{k}: expected a nonnegative integer, got {v:?}")))?,
                ),
                Value::Number(_) => Value::from(
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("{k}: expected a number, got {v:?}")))?,
                ),
                _ => Value::String(v.to_string()),
            };
            map.insert(k.to_string(), parsed);
        }
        let cfg: Self = serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Profile (from overrides, else file, else `desk`) < file < overrides.
    pub fn resolve(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let file_pairs = match file_text {
            Some(t) => parse_pairs(t)?,
            None => Vec::new(),
        };
        let profile = overrides
            .iter()
            .chain(&file_pairs)
            .find(|(k, _)| k == "profile")
            .map_or("desk", |(_, v)| v.as_str());
        Self::profile(profile)?.apply(&file_pairs)?.apply(overrides)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::resolve(Some(&text), overrides)
    }

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in to_map(self) {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&render_value(&v));
            out.push('\n');
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !PROFILES.contains(&self.profile.as_str()) {
            return Err(Error::Config(format!(
                "unknown profile {:?}; valid profiles: {}",
                self.profile,
                PROFILES.join(", ")
            )));
        }
        self.summarizer().validate()?;
        self.inference(false).validate()?;
        MaskConfig::new(self.epsilon, self.lambda)?;
        if self.max_src_len == 0 || self.max_tgt_len == 0 || self.vocab_size == 0 {
            return Err(Error::Config("length limits and vocabulary size must be positive".into()));
        }
        Ok(())
    }

    pub fn summarizer(&self) -> SummarizerConfig {
        SummarizerConfig {
            emb_dim: self.emb_dim,
            enc_hidden: self.enc_hidden,
            dec_hidden: self.dec_hidden,
            attention: self.attention,
        }
    }

    pub fn selector(&self) -> SelectorConfig {
        SelectorConfig {
            static_dim: self.sel_static_dim,
            context_dim: self.sel_context_dim,
            tagger_hidden: self.sel_tagger_hidden,
            tagger_layers: self.sel_tagger_layers,
            dropout: self.sel_dropout,
        }
    }

    pub fn selector_training(&self) -> SelectorTrainConfig {
        SelectorTrainConfig {
            epochs: self.sel_epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            initial_accumulator: self.initial_accumulator,
            max_examples: self.sel_max_examples,
            seed: self.seed,
            ..SelectorTrainConfig::default()
        }
    }

    pub fn summarizer_training(&self) -> SummarizerTrainConfig {
        SummarizerTrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            initial_accumulator: self.initial_accumulator,
            max_grad_norm: self.max_grad_norm,
            aux_weight: self.aux_weight,
            lr_halving: self.lr_halving,
            seed: self.seed,
        }
    }

    pub fn mask(&self) -> Result<MaskConfig> {
        MaskConfig::new(self.epsilon, self.lambda)
    }

    pub fn inference(&self, masked: bool) -> InferenceConfig {
        InferenceConfig {
            beam: if masked { self.mask_beam } else { self.beam },
            alpha: self.alpha,
            beta: self.beta,
            min_length: self.min_length,
            max_length: self.max_length,
            block_trigrams: self.block_trigrams,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_examples() {
        assert_eq!(RunConfig::profile("cnn-dm").unwrap().min_length, 35);
        assert_eq!(RunConfig::profile("nyt").unwrap().min_length, 6);
        assert_eq!(RunConfig::profile("desk").unwrap().enc_hidden, 32);
        let cnn = RunConfig::profile("cnn-dm").unwrap();
        assert_eq!((cnn.max_src_len, cnn.max_tgt_len, cnn.beta, cnn.lambda), (400, 100, 10.0, 2.0));
        let err = RunConfig::profile("xsum").unwrap_err().to_string();
        assert!(err.contains("cnn-dm, nyt, desk"));
    }

    #[test]
    fn precedence() {
        let file = "profile = cnn-dm\nbeam = 7\nalpha = 0.6 # comment\n";
        let flags = vec![("beam".to_string(), "10".to_string())];
        let cfg = RunConfig::resolve(Some(file), &flags).unwrap();
        assert_eq!(cfg.beam, 10);
        assert_eq!(cfg.alpha, 0.6);
        assert_eq!(cfg.min_length, 35);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::profile("nyt")
            .unwrap()
            .apply(&[("mode", "diffmask"), ("train_path", "a b.jsonl"), ("block_trigrams", "false")])
            .unwrap();
        let back = RunConfig::resolve(Some(&cfg.to_key_value()), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::default().apply(&[("nope", "1")]).is_err());
        assert!(RunConfig::default().apply(&[("beam", "-1")]).is_err());
        assert!(RunConfig::default().apply(&[("beam", "0")]).is_err());
        assert!(RunConfig::default().apply(&[("mode", "sideways")]).is_err());
        assert!(parse_pairs("just words").is_err());
    }

    #[test]
    fn dashes_in_keys_are_accepted() {
        let cfg = RunConfig::resolve(Some("min-length = 3"), &[]).unwrap();
        assert_eq!(cfg.min_length, 3);
    }
}
