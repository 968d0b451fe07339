//! Trained models bundled with their vocabulary and run configuration, stored
//! in the BUSM checkpoint container.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::RunConfig;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::selector::Selector;
use crate::summarizer::Summarizer;
use crate::tensor::{decode_checkpoint, encode_checkpoint, CheckpointData, ParamStore};

const KIND: &str = "kind";
const VOCAB: &str = "vocab";
const CONFIG: &str = "config";

fn metadata(kind: &str, vocab: &Vocabulary, config: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    m.insert(KIND.to_string(), kind.to_string());
    m.insert(VOCAB.to_string(), serde_json::to_string(vocab.words())?);
    m.insert(CONFIG.to_string(), config.to_key_value());
    Ok(m)
}

fn unpack(data: &CheckpointData, kind: &str) -> Result<(Vocabulary, RunConfig)> {
    let get = |key: &str| {
        data.metadata
            .get(key)
            .ok_or_else(|| Error::Config(format!("checkpoint metadata lacks {key:?}")))
    };
    let found = get(KIND)?;
    if found != kind {
        return Err(Error::Config(format!("expected a {kind} checkpoint, found {found}")));
    }
    let words: Vec<String> = serde_json::from_str(get(VOCAB)?)?;
    let config = RunConfig::resolve(Some(get(CONFIG)?), &[])?;
    Ok((Vocabulary::from_words(words), config))
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<CheckpointData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[derive(Debug, Clone)]
pub struct SelectorBundle {
    pub selector: Selector,
    pub params: ParamStore<f32>,
    pub vocab: Vocabulary,
    pub config: RunConfig,
}

impl SelectorBundle {
    pub const KIND: &'static str = "selector";

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_checkpoint(&self.params, &metadata(Self::KIND, &self.vocab, &self.config)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_data(decode_checkpoint(bytes)?)
    }

    fn from_data(data: CheckpointData) -> Result<Self> {
        let (vocab, config) = unpack(&data, Self::KIND)?;
        let selector = Selector::bind(config.selector(), vocab.len(), &data.params, "")?;
        Ok(Self {
            selector,
            params: data.params,
            vocab,
            config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_data(read(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct SummarizerBundle {
    pub model: Summarizer,
    pub params: ParamStore<f32>,
    pub vocab: Vocabulary,
    pub config: RunConfig,
}

impl SummarizerBundle {
    pub const KIND: &'static str = "summarizer";

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_checkpoint(&self.params, &metadata(Self::KIND, &self.vocab, &self.config)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_data(decode_checkpoint(bytes)?)
    }

    fn from_data(data: CheckpointData) -> Result<Self> {
        let (vocab, config) = unpack(&data, Self::KIND)?;
        let model = Summarizer::bind(config.summarizer(), config.selector(), config.mode, vocab.len(), &data.params)?;
        Ok(Self {
            model,
            params: data.params,
            vocab,
            config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_data(read(path)?)
    }
}
