//! Dataset ingestion: tokenization, vocabulary, truncation and the copy-label
//! alignment that supervises the content selector.

mod align;
mod dataset;
mod tokenize;
mod vocab;

pub use align::{align_copy_labels, Aligner};
pub use dataset::{load_dataset, parse_dataset, render_dataset, write_dataset};
pub use tokenize::{detokenize, tokenize, Token};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExamplePair {
    pub id: String,
    pub source_sentences: Vec<Vec<Token>>,
    pub target_sentences: Vec<Vec<Token>>,
    pub copy_labels: Option<Vec<u8>>,
}

impl ExamplePair {
    /// Drops empty sentences; both sides must keep at least one token.
    pub fn new(
        id: impl Into<String>,
        source_sentences: Vec<Vec<Token>>,
        target_sentences: Vec<Vec<Token>>,
    ) -> Result<Self> {
        let source_sentences: Vec<_> = source_sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let target_sentences: Vec<_> = target_sentences.into_iter().filter(|s| !s.is_empty()).collect();
        if source_sentences.is_empty() {
            return Err(Error::EmptyInput("source document"));
        }
        if target_sentences.is_empty() {
            return Err(Error::EmptyInput("target summary"));
        }
        Ok(Self {
            id: id.into(),
            source_sentences,
            target_sentences,
            copy_labels: None,
        })
    }

    pub fn from_text(id: impl Into<String>, source: &[&str], target: &[&str]) -> Result<Self> {
        Self::new(
            id,
            source.iter().map(|s| tokenize(s)).collect(),
            target.iter().map(|s| tokenize(s)).collect(),
        )
    }

    pub fn source_tokens(&self) -> impl Iterator<Item = &Token> {
        self.source_sentences.iter().flatten()
    }

    pub fn target_tokens(&self) -> impl Iterator<Item = &Token> {
        self.target_sentences.iter().flatten()
    }

    pub fn source(&self) -> Vec<Token> {
        self.source_tokens().cloned().collect()
    }

    pub fn target(&self) -> Vec<Token> {
        self.target_tokens().cloned().collect()
    }

    pub fn source_len(&self) -> usize {
        self.source_sentences.iter().map(Vec::len).sum()
    }

    pub fn target_len(&self) -> usize {
        self.target_sentences.iter().map(Vec::len).sum()
    }

    /// Computes and stores copy labels against the current target.
    pub fn with_labels(mut self) -> Self {
        let labels = align_copy_labels(&self.source(), &self.target());
        self.copy_labels = Some(labels);
        self
    }

    pub fn set_labels(&mut self, labels: Vec<u8>) -> Result<()> {
        if labels.len() != self.source_len() {
            return Err(Error::LengthMismatch {
                context: "copy labels",
                left: labels.len(),
                right: self.source_len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("copy labels must be 0 or 1".into()));
        }
        self.copy_labels = Some(labels);
        Ok(())
    }

    /// Labels (computing them if absent) split back into per-sentence runs.
    pub fn labeled_sentences(&self) -> Vec<(Vec<Token>, Vec<u8>)> {
        let labels = self
            .copy_labels
            .clone()
            .unwrap_or_else(|| align_copy_labels(&self.source(), &self.target()));
        let mut offset = 0;
        self.source_sentences
            .iter()
            .map(|s| {
                let l = labels[offset..offset + s.len()].to_vec();
                offset += s.len();
                (s.clone(), l)
            })
            .collect()
    }
}

fn cut(sentences: &[Vec<Token>], max: usize) -> Vec<Vec<Token>> {
    let mut left = max;
    let mut out = Vec::new();
    for s in sentences {
        if left == 0 {
            break;
        }
        let take = s.len().min(left);
        out.push(s[..take].to_vec());
        left -= take;
    }
    out
}

/// Keeps the first `max_src` source and `max_tgt` target tokens. Labels, if
/// present, are recomputed against the truncated pair.
pub fn truncate_example(ex: &ExamplePair, max_src: usize, max_tgt: usize) -> Result<ExamplePair> {
    if max_src == 0 || max_tgt == 0 {
        return Err(Error::InvalidArgument("truncation limits must be at least 1".into()));
    }
    let mut out = ExamplePair::new(
        ex.id.clone(),
        cut(&ex.source_sentences, max_src),
        cut(&ex.target_sentences, max_tgt),
    )?;
    if ex.copy_labels.is_some() {
        out = out.with_labels();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(prefix: &str, n: usize, per_sentence: usize) -> Vec<Vec<Token>> {
        (0..n)
            .collect::<Vec<_>>()
            .chunks(per_sentence)
            .map(|c| c.iter().map(|i| Token::new(&format!("{prefix}{i}")).unwrap()).collect())
            .collect()
    }

    #[test]
    fn truncates_source_to_limit() {
        let ex = ExamplePair::new("a", numbered("s", 500, 30), numbered("t", 120, 7)).unwrap();
        let t = truncate_example(&ex, 400, 100).unwrap();
        assert_eq!(t.source_len(), 400);
        assert_eq!(t.target_len(), 100);
        assert_eq!(t.source()[..], ex.source()[..400]);
        assert_eq!(t.target()[..], ex.target()[..100]);
        // sentence boundaries survive
        assert_eq!(t.source_sentences[0].len(), 30);
        assert_eq!(t.source_sentences.last().unwrap().len(), 400 % 30);
    }

    #[test]
    fn short_examples_unchanged() {
        let ex = ExamplePair::new("a", numbered("s", 20, 6), numbered("t", 5, 5)).unwrap();
        assert_eq!(truncate_example(&ex, 400, 100).unwrap(), ex);
    }

    #[test]
    fn labels_recomputed_not_carried() {
        let ex = ExamplePair::from_text("a", &["a b c d"], &["c d a"]).unwrap().with_labels();
        assert_eq!(ex.copy_labels.as_deref(), Some(&[1, 0, 1, 1][..]));
        let t = truncate_example(&ex, 4, 1).unwrap();
        // target is now just "c"
        assert_eq!(t.copy_labels.as_deref(), Some(&[0, 0, 1, 0][..]));
    }

    #[test]
    fn labeled_sentences_split() {
        let ex = ExamplePair::from_text("a", &["x a b", "c"], &["a b c"]).unwrap();
        let parts = ex.labeled_sentences();
        assert_eq!(parts[0].1, vec![0, 1, 1]);
        assert_eq!(parts[1].1, vec![1]);
    }
}
