use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("missing field {field} at line {line}")]
    MissingField { field: &'static str, line: usize },

    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: String, detail: String },

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("non-finite logits")]
    NonFiniteLogits,

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("optimizer state uninitialized for {0} parameters")]
    OptimizerUninitialized(usize),

    #[error("objective is not deterministic: repeated evaluation gave {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("unknown parameter {0}")]
    UnknownParameter(String),

    #[error("not a BUSM checkpoint")]
    BadMagic,

    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("truncated checkpoint: expected {expected} bytes at offset {offset}, file has {available}")]
    Truncated {
        offset: usize,
        expected: usize,
        available: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
