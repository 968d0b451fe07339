use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// A lowercase, whitespace-free, non-empty word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Returns `None` for empty strings or strings containing whitespace.
    pub fn new(text: &str) -> Option<Self> {
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Self(text.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Token {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<&str> for Token {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '-'];

/// Lowercases, isolates punctuation marks and splits on whitespace.
pub fn tokenize(raw: &str) -> Vec<Token> {
    let mut spaced = String::with_capacity(raw.len() + 8);
    for ch in raw.chars() {
        if PUNCTUATION.contains(&ch) {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }
    spaced
        .split_whitespace()
        .map(|w| Token(w.to_lowercase()))
        .collect()
}

/// Joins tokens with single spaces.
pub fn detokenize<'t>(tokens: impl IntoIterator<Item = &'t Token>) -> String {
    let mut out = String::new();
    for t in tokens {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ts: &[Token]) -> Vec<&str> {
        ts.iter().map(|t| t.as_str()).collect()
    }

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            words(&tokenize("Angela Merkel, spotted.")),
            ["angela", "merkel", ",", "spotted", "."]
        );
    }

    #[test]
    fn empty_and_single() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n").is_empty());
        assert_eq!(words(&tokenize("abc")), ["abc"]);
    }

    #[test]
    fn hyphens_and_quotes() {
        assert_eq!(
            words(&tokenize("five-star \"Hotel\"")),
            ["five", "-", "star", "\"", "hotel", "\""]
        );
    }

    #[test]
    fn token_rejects_whitespace() {
        assert!(Token::new("a b").is_none());
        assert!(Token::new("").is_none());
        assert_eq!(Token::new("Ab").unwrap().as_str(), "ab");
    }

    proptest::proptest! {
        #[test]
        fn idempotent(raw in "[a-zA-Z .,;:!?'()\"-]{0,40}") {
            let once = tokenize(&raw);
            let twice = tokenize(&detokenize(&once));
            proptest::prop_assert_eq!(once, twice);
        }
    }
}
