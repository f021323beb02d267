use thiserror::Error;

use crate::transform::TransformKind;

/// The grammar rejected a unit. Units that fail are skipped by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("vocab_size {requested} is smaller than the {required} entries needed for the alphabet and special tokens")]
    VocabTooSmall { requested: usize, required: usize },
    #[error("cannot train a tokenizer on an empty corpus")]
    EmptyCorpus,
    #[error("unknown type label `{0}`")]
    UnknownType(String),
    #[error("malformed model file at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A malformed line in a bundled or user-supplied data file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

/// A transform has no valid site in the unit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0:?} is not applicable to this unit")]
pub struct NotApplicable(pub TransformKind);

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("vector has zero norm")]
    DegenerateVector,
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("loss became non-finite at step {step}")]
    Divergence { step: usize },
    #[error("{0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("mask plan does not fit a sequence of length {len}")]
    PlanMismatch { len: usize },
}
