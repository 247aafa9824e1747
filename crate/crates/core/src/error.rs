use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported filter: {family} with {taps} taps")]
    UnsupportedFilter { family: String, taps: usize },
    #[error("signal length {0} is not a power of two >= 2")]
    LengthNotDyadic(usize),
    #[error("decomposition depth {depth} exceeds log2 of the signal length ({max})")]
    DepthExceedsLog2N { depth: usize, max: usize },
    #[error("coordinate out of range: level {level}, block {block}, index {index}")]
    IndexOutOfRange {
        level: usize,
        block: usize,
        index: usize,
    },
    #[error("class {0} has no samples")]
    EmptyClass(String),
    #[error("class {class} has {size} samples, at least 2 are required")]
    ClassTooSmall { class: String, size: usize },
    #[error("requested {k} features from a basis with {n} coordinates")]
    KTooLarge { k: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("scattering sum needs n in {{3, 4, 5}}, got {0}")]
    InvalidN(usize),
    #[error("triangular waveform class must be 1, 2 or 3, got {0}")]
    InvalidClass(u32),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
