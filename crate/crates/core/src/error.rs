//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset validation, clustering, evaluation, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("record {id:?}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        actual: usize,
    },

    #[error("record {id:?}: vector component {index} is not finite")]
    NonFiniteComponent { id: String, index: usize },

    #[error("duplicate record id {id:?}")]
    DuplicateId { id: String },

    #[error("record {id:?} carries attribute {attribute:?} which is not in the schema")]
    UnknownAttribute { id: String, attribute: String },

    #[error("record {id:?}: attribute {attribute:?} does not permit value {value:?}")]
    UnknownValue {
        id: String,
        attribute: String,
        value: String,
    },

    #[error("record {id:?} is missing attribute {attribute:?}")]
    MissingAttribute { id: String, attribute: String },

    #[error("no records")]
    NoRecords,

    #[error("metric matrix must be {dimension}x{dimension}")]
    BadMatrixShape { dimension: usize },

    #[error("metric matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("metric matrix is not positive semi-definite: quadratic form {value:.3e}")]
    NotPsd { value: f64 },

    #[error("requested {k} clusters but only {records} records are available")]
    TooFewRecords { k: usize, records: usize },

    #[error("empty model list")]
    EmptyList,

    #[error("mixture component {component} weight underflowed below 1e-12")]
    DegenerateComponent { component: usize },

    #[error("assignment list has {actual} entries but the dataset has {expected} records")]
    AssignmentCountMismatch { expected: usize, actual: usize },

    #[error("reports cover different class sets and cannot be averaged")]
    SchemaMismatch,

    #[error("attribute {attribute:?} takes {count} distinct values; exactly 2 are required")]
    NonBinaryAttribute { attribute: String, count: usize },

    #[error("cluster count {count} must be a power of two no greater than {max}")]
    InvalidClusterCount { count: usize, max: usize },

    #[error("train fraction {fraction} must lie strictly between 0 and 1")]
    InvalidTrainFraction { fraction: f64 },

    #[error("stratum {stratum:?} has {size} record(s); at least 2 are required to split")]
    StratumTooSmall { stratum: String, size: usize },

    #[error("classifier has no centroids at level {level}")]
    EmptyLevel { level: usize },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("invalid generator spec: {reason}")]
    InvalidSpec { reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by unreadable or malformed input files, as
    /// opposed to inputs that parse but fail validation. The CLI maps the
    /// former to exit code 2 and the latter to exit code 3.
    pub fn is_malformed_input(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::VersionMismatch { .. } | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
