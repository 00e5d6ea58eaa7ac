use thiserror::Error;

pub type Result<T, E = OsrError> = std::result::Result<T, E>;

/// Errors raised while decoding one of the binary file formats.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported {format} version {found} (expected {expected})")]
    UnsupportedVersion {
        format: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("truncated payload: expected at least {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data: expected {expected} bytes, got {actual}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("corrupt payload: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum OsrError {
    #[error("insufficient horizon: trajectory has {available} samples, window needs {required}")]
    InsufficientHorizon { required: usize, available: usize },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class too small to stratify: {class} has {count} samples (need at least 3)")]
    ClassTooSmall { class: String, count: usize },
    #[error("empty data")]
    EmptyData,
    #[error("need ≥2 classes, found {0}")]
    NeedTwoClasses(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: extractor fitted on {expected:?}, tensor has {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("rank deficient: {components} components requested from {samples} samples")]
    RankDeficient { components: usize, samples: usize },
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("class {0} has empty vote set")]
    EmptyVoteSet(usize),
    #[error("degenerate sample: all values equal")]
    DegenerateSample,
    #[error("non-positive sample value {0}")]
    NonPositiveSample(f64),
    #[error("weibull fit needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("insufficient outliers: need {required}, have {available}")]
    InsufficientOutliers { required: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
