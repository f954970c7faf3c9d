use thiserror::Error;

/// Errors surfaced by every module of the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bias alpha = {0} outside the admissible range")]
    BiasOutOfRange(f64),

    #[error("invalid parity index: {0}")]
    InvalidParity(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(usize, usize),

    #[error("domain of size {0} is not a full hypercube")]
    NotHypercube(usize),

    #[error("dimension guard exceeded: {dim} > {limit}")]
    DimensionGuard { dim: usize, limit: usize },

    #[error("width k = {k} exceeds dimension d = {d}")]
    WidthTooLarge { k: usize, d: usize },

    #[error("path-count guard exceeded: {paths} > {limit}")]
    PathGuard { paths: u64, limit: u64 },

    #[error("message {message} outside alphabet of size {alphabet}")]
    OutOfAlphabet { message: usize, alphabet: usize },

    #[error("randomizer emitted {got} messages, declared maximum is {max}")]
    TooManyMessages { got: usize, max: usize },

    #[error("intrusion time {t} outside 1..={len}")]
    IntrusionTime { t: usize, len: usize },

    #[error("invalid cohort: {0}")]
    InvalidCohort(String),

    #[error("conditional independence precondition violated (gap {0:e})")]
    NotConditionallyIndependent(f64),

    #[error("stream length {0} is not divisible by 3")]
    NotDivisibleByThree(usize),

    #[error("malformed learner output: {0}")]
    MalformedLearner(String),

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("insufficient cohort: n = {n} cannot meet (eps = {eps}, delta = {delta})")]
    InsufficientCohort { n: usize, eps: f64, delta: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient points for a fit: need {need}, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("spec error: {0}")]
    Spec(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("in cell {cell}: {source}")]
    InCell { cell: String, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Spec(e.to_string())
    }
}

impl Error {
    /// Attach grid coordinates to an error from an inner module.
    pub fn in_cell(self, cell: impl Into<String>) -> Self {
        Error::InCell { cell: cell.into(), source: Box::new(self) }
    }
}
