use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid features: {0}")]
    InvalidFeatures(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid responsibilities: {0}")]
    InvalidResponsibilities(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("instance too large to enumerate: {classes}^{vertices} assignments exceeds {limit}")]
    TooLarge {
        classes: usize,
        vertices: usize,
        limit: u64,
    },
    #[error("class {class} is empty (mass {mass:e})")]
    EmptyClass { class: usize, mass: f64 },
    #[error("all {attempts} fits failed; last error: {last}")]
    AllFailed { attempts: usize, last: String },
    #[error("partitions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two items are required, got {0}")]
    TooFewItems(usize),
    #[error("unknown value {value:?} for {what}")]
    Unknown { what: &'static str, value: String },
}
