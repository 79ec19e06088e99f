use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operation requires a non-empty tensor")]
    EmptyTensor,
    #[error("tensor contains a non-finite value")]
    NonFinite,
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("interpolation coefficient {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: bad magic bytes")]
    BadMagic,
    #[error("checkpoint: unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint: checksum mismatch (file is corrupted)")]
    ChecksumMismatch,
    #[error("checkpoint: network spec digest mismatch")]
    DigestMismatch,
    #[error("checkpoint: file is truncated")]
    Truncated,
    #[error("checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
