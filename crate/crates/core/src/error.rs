use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action log is empty")]
    EmptyLog,
    #[error("action log ends with {0} secondary action(s) that precede no primary action")]
    TrailingSecondary(usize),
    #[error("action `{id}` has kind {found:?}, expected {expected:?}")]
    WrongKind {
        id: String,
        expected: crate::model::ActionKind,
        found: crate::model::ActionKind,
    },
    #[error("step count {t} outside 1..={n}")]
    OutOfRange { t: usize, n: usize },
    #[error("malformed distance matrix: {0}")]
    MalformedMatrix(String),
    #[error("variance ratio undefined for k={k} clusters over n={n} points")]
    DegenerateK { k: usize, n: usize },
    #[error("need at least 2 points to select a partition, got {0}")]
    TooFewPoints(usize),
    #[error("need at least {needed} users, got {got}")]
    TooFewUsers { needed: usize, got: usize },
    #[error("event identity {0} does not occur in the model")]
    UnknownEvent(String),
    #[error("no prediction is pending")]
    NoPendingPrediction,
    #[error("a prediction is pending and has not been resolved")]
    PendingFeedback,
    #[error("rejected prediction needs the actual secondary set")]
    MissingActual,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid task definition: {0}")]
    InvalidTask(String),
    #[error("invalid demonstration: {0}")]
    InvalidDemonstration(String),
    #[error("inconsistent preset: {0}")]
    InconsistentPreset(String),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
