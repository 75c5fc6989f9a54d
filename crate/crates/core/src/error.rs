use thiserror::Error;

pub type Result<T> = std::result::Result<T, DmmtError>;

#[derive(Debug, Error)]
pub enum DmmtError {
    #[error("dimension count must be at least 1")]
    ZeroDimensions,
    #[error("dimension index {index} out of range for {dims}-dimensional key")]
    DimensionOutOfRange { index: usize, dims: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("region key is deeper than the supported {max} cuts per dimension")]
    KeyTooDeep { max: usize },
    #[error("invalid region key text {0:?}")]
    InvalidKey(String),
    #[error("point {index} of group {group} lies outside region {key}")]
    PointOutsideRegion { group: usize, index: usize, key: String },
    #[error("non-finite coordinate in group {group}, point {index}")]
    NonFinite { group: usize, index: usize },
    #[error("dimension {0} is constant across the pooled sample")]
    ConstantDimension(usize),
    #[error("coordinate {value} outside [0, 1) in group {group}, point {index}")]
    OutOfUnitCube { group: usize, index: usize, value: f64 },
    #[error("no data points")]
    EmptyData,
    #[error("invalid prior parameter {name}: {reason}")]
    InvalidPrior { name: &'static str, reason: String },
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("argument must be positive and finite, got ({0}, {1})")]
    NonPositiveArgument(f64, f64),
    #[error("the stop state has no direction or pseudo-count parameters")]
    StopState,
    #[error("region {key} is below the depth cap {depth_cap}")]
    KeyBeyondCap { key: String, depth_cap: usize },
    #[error("memo table exceeded {0} entries")]
    MemoLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("direction requested for fully stopped node {0}")]
    FullyStopped(String),
    #[error("{0}")]
    InvalidInput(String),
}
