use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: reference to undeclared {kind} `{id}`")]
    DanglingReference {
        line: usize,
        kind: &'static str,
        id: String,
    },

    #[error("line {line}: duplicate {kind} `{id}`")]
    DuplicateNode {
        line: usize,
        kind: &'static str,
        id: String,
    },

    #[error("line {line}: duplicate follow edge {from} -> {to}")]
    DuplicateEdge {
        line: usize,
        from: String,
        to: String,
    },

    #[error("line {line}: self-loop on user `{id}`")]
    SelfLoop { line: usize, id: String },

    #[error("anchor links are not one-to-one: {side} user `{id}` appears more than once")]
    NonInjectiveAnchor { side: &'static str, id: String },

    #[error("unknown {side} user `{id}`")]
    UnknownUser { side: &'static str, id: String },

    #[error("sampling ratio must lie in (0, 1], got {0}")]
    InvalidLambda(f64),

    #[error("meta path {0} is not handled by this operation")]
    UnsupportedMetaPath(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("cannot sample {needed} negative pairs, only {available} non-edges exist")]
    InsufficientNonEdges { needed: usize, available: usize },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("both classes must be present")]
    SingleClass,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("cluster count {k} out of range for {n} points")]
    InvalidClusterCount { k: usize, n: usize },

    #[error("network has no follow edges")]
    EmptyEdgeSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
