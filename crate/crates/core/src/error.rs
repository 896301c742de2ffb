use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// [`Error::code`] gives a stable, machine-readable identifier that the CLI
/// prints ahead of the human-readable message.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "sequence {sequence}, position {position}: token id {id} is out of range for vocabulary size {vocab_size}"
    )]
    OutOfRangeToken {
        sequence: usize,
        position: usize,
        id: u32,
        vocab_size: usize,
    },

    #[error("vocabulary size mismatch: expected {expected}, found {found}")]
    VocabSizeMismatch { expected: usize, found: usize },

    #[error("cannot merge an empty list of frequency tables")]
    EmptyMerge,

    #[error("keep token {id} is out of range for vocabulary size {vocab_size}")]
    KeepTokenOutOfRange { id: u32, vocab_size: usize },

    #[error("sequence {sequence}, position {position}: token id {id} has no entry in the remap table")]
    UnmappedToken { sequence: usize, position: usize, id: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("inconsistent remap: {0}")]
    RemapInconsistent(String),

    #[error("at least 2 curve points with positive coordinates are required, got {usable}")]
    InsufficientPoints { usable: usize },

    #[error("cannot fit a power law: all points share the same token count")]
    DegenerateFit,

    #[error("invalid vocabulary counts: original {original}, reduced {reduced}")]
    InvalidCounts { original: usize, reduced: usize },

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("inconsistent inputs ({left} vs {right}): {detail}")]
    InconsistentInputs {
        left: &'static str,
        right: &'static str,
        detail: String,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfRangeToken { .. } => "OUT_OF_RANGE_TOKEN",
            Error::VocabSizeMismatch { .. } => "VOCAB_SIZE_MISMATCH",
            Error::EmptyMerge => "EMPTY_MERGE",
            Error::KeepTokenOutOfRange { .. } => "KEEP_TOKEN_OUT_OF_RANGE",
            Error::UnmappedToken { .. } => "UNMAPPED_TOKEN",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::InvalidMatrix(_) => "INVALID_MATRIX",
            Error::RemapInconsistent(_) => "REMAP_INCONSISTENT",
            Error::InsufficientPoints { .. } => "INSUFFICIENT_POINTS",
            Error::DegenerateFit => "DEGENERATE_FIT",
            Error::InvalidCounts { .. } => "INVALID_COUNTS",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::InconsistentInputs { .. } => "INCONSISTENT_INPUTS",
            Error::BadMagic { .. } => "BAD_MAGIC",
            Error::UnsupportedVersion(_) => "UNSUPPORTED_VERSION",
            Error::UnsupportedDtype(_) => "UNSUPPORTED_DTYPE",
            Error::Parse(_) => "PARSE_ERROR",
            Error::Json(_) => "JSON_ERROR",
            Error::Io(_) => "IO_ERROR",
        }
    }
}
