use std::collections::HashMap;

use super::{ExamplePair, Token};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token ↔ id map. Ids 0..4 are reserved; the rest are ordered by descending
/// corpus frequency with lexicographic tie-breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from an explicit ordered word list (reserved symbols are prepended).
    pub fn from_words<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for w in words {
            let w = w.as_ref();
            if !index.contains_key(w) {
                index.insert(w.to_string(), tokens.len());
                tokens.push(w.to_string());
            }
        }
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn ids(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(RESERVED[UNK], |s| s.as_str())
    }

    /// Non-reserved words in id order.
    pub fn words(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }
}

pub fn build_vocab(corpus: &[ExamplePair], max_size: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if max_size == 0 {
        return Err(Error::InvalidArgument("vocabulary max_size must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for ex in corpus {
        for t in ex.source_tokens().chain(ex.target_tokens()) {
            if !RESERVED.contains(&t.as_str()) {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    Ok(Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w)))
}
