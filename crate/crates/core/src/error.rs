use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single problem found while validating raw dataset arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    ScoreOutOfRange(usize),
    NonBinaryLabel(usize),
    DuplicateGroupName(String),
    EmptyGroupName,
    ReservedGroupNotAllTrue,
    EmptyDataset,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { what, expected, found } => {
                write!(f, "length mismatch: {what} has {found} rows, expected {expected}")
            }
            Violation::ScoreOutOfRange(i) => write!(f, "score at row {i} is outside [0, 1]"),
            Violation::NonBinaryLabel(i) => write!(f, "label at row {i} is not 0 or 1"),
            Violation::DuplicateGroupName(name) => write!(f, "duplicate group name {name:?}"),
            Violation::EmptyGroupName => write!(f, "group names must be non-empty"),
            Violation::ReservedGroupNotAllTrue => {
                write!(f, "reserved group \"ALL\" must contain every row")
            }
            Violation::EmptyDataset => write!(f, "dataset has no rows"),
        }
    }
}

/// Broad failure class, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {}", join(.0))]
    InvalidDataset(Vec<Violation>),
    #[error("degenerate split: {n} rows with fraction {fraction} leaves an empty side")]
    DegenerateSplit { n: usize, fraction: f64 },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("answer span is empty (prompt length {prompt_len}, total length {total_len})")]
    EmptyAnswerSpan { prompt_len: usize, total_len: usize },
    #[error("log-probability at position {0} is positive")]
    PositiveLogProb(usize),
    #[error("need at least two choices, got {0}")]
    TooFewChoices(usize),
    #[error("group name {0:?} collides with the reserved \"ALL\" group")]
    NameCollision(String),
    #[error("need at least k={k} samples, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("conditioning set is empty")]
    EmptyConditioningSet,
    #[error("group {0:?} has no members")]
    EmptyGroup(String),
    #[error("every group is empty")]
    AllGroupsEmpty,
    #[error("no nonempty candidate bins")]
    NoCandidateBins,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("design matrix is rank deficient (dropped columns: {})", .dropped.join(", "))]
    RankDeficient { dropped: Vec<String> },
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64, best: Vec<f64> },
    #[error("round limit {0} exceeded before reaching the multicalibration target")]
    RoundLimitExceeded(usize),
    #[error("in-sample MSE increased in round {round}: {before} -> {after}")]
    MseIncreased { round: usize, before: f64, after: f64 },
    #[error("model expects group {0:?}, which is missing from the input")]
    GroupSchemaMismatch(String),
    #[error("unreachable signature {0}")]
    UnreachableSignature(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::NameCollision(_) | Error::UnknownColumn(_) => ErrorKind::Config,
            Error::NoConvergence { .. }
            | Error::RoundLimitExceeded(_)
            | Error::MseIncreased { .. }
            | Error::RankDeficient { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
