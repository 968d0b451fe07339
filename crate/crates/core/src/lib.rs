//! Bottom-up abstractive summarization: a word-level content selector whose
//! probabilities constrain the copy attention of a pointer-generator, decoded
//! with penalized beam search, plus the metrics to evaluate it.

pub mod bottom_up;
pub mod config;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod metrics;
pub mod persist;
pub mod selector;
pub mod summarizer;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
