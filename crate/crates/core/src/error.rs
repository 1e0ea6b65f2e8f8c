use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document has no positive counts")]
    EmptyDocument,
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("duplicate vocabulary word `{0}`")]
    DuplicateWord(String),
    #[error("vocabulary must contain at least one word")]
    EmptyVocabulary,
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("tree too large: {nodes} internal nodes exceeds cap {cap}")]
    Overflow { nodes: u128, cap: usize },
    #[error("both positive and negative pair sets are empty")]
    EmptyBatch,
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("empty split: {0}")]
    EmptySplit(&'static str),
    #[error("empty set: {0}")]
    EmptySet(&'static str),
    #[error("duplicate points: {0} and {1} share coordinates")]
    DuplicatePoints(usize, usize),
    #[error("problem too large for the exact solver: {rows}x{cols} exceeds {limit} cells")]
    SizeLimit { rows: usize, cols: usize, limit: usize },
    #[error("infeasible input: {0}")]
    InfeasibleInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("missing embedding for word `{0}`")]
    MissingWord(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("vocabulary hash mismatch: file was built for {expected}, corpus has {got}")]
    VocabularyMismatch { expected: String, got: String },
    #[error("unsupported format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
