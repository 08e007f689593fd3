use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TblError {
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid template: {0}")]
    Template(String),
    #[error("position {pos} out of range for sequence {seq} (length {len})")]
    PositionOutOfRange { seq: usize, pos: usize, len: usize },
    #[error("sequence index {0} out of range")]
    SequenceOutOfRange(usize),
    #[error("current classes have not been assigned")]
    Unassigned,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("malformed chunk tag `{0}`")]
    MalformedTag(String),
    #[error("corpora are not aligned: {0}")]
    Misaligned(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("rule store consistency violation: {0}")]
    Consistency(String),
    #[error("oracle mismatch after iteration {iteration}: {detail}")]
    OracleMismatch { iteration: usize, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl TblError {
    /// True for errors that indicate a bookkeeping bug rather than bad input.
    pub fn is_consistency(&self) -> bool {
        matches!(self, TblError::Consistency(_) | TblError::OracleMismatch { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, TblError::Io(_) | TblError::Csv(_))
    }
}

pub type Result<T> = std::result::Result<T, TblError>;
