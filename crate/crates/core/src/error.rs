use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pose pipeline.
///
/// Every variant maps to a stable numeric code (see [`PoseError::code`]) that
/// the CLI uses as its exit status and the C bindings return verbatim.
#[derive(Debug, Error)]
pub enum PoseError {
    #[error("invalid part graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("placement of part {part} ({name}) is outside the valid grid: {detail}")]
    OutOfBounds {
        part: usize,
        name: String,
        detail: String,
    },

    #[error("feature lookup out of range: {0}")]
    LookupOutOfRange(String),

    #[error("image too small for the requested pyramid; usable levels: {usable:?} of {requested}")]
    PyramidTooSmall { requested: usize, usable: Vec<usize> },

    #[error("image {width}x{height} is smaller than 3 cells of {cell_size}px")]
    ImageTooSmall {
        width: usize,
        height: usize,
        cell_size: usize,
    },

    #[error("quadratic deformation coefficient {value} is below the floor {floor}")]
    IllPosedTransform { value: f64, floor: f64 },

    #[error("no valid placement at any pyramid level")]
    NoValidPlacement,

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("training diverged: {0}")]
    NonFiniteObjective(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: malformed annotation record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corrupt file header: {0}")]
    CorruptHeader(String),

    #[error("unsupported file version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("file truncated: {0}")]
    Truncated(String),

    #[error("payload checksum mismatch")]
    ChecksumMismatch,

    #[error("config error: {0}")]
    Config(String),

    #[error("image codec error: {0}")]
    Image(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PoseError>;

impl PoseError {
    /// Stable numeric code. `0` is success and `2` is reserved for CLI usage errors.
    pub fn code(&self) -> i32 {
        match self {
            PoseError::InvalidArgument(_) => 3,
            PoseError::Config(_) => 4,
            PoseError::Io { .. } => 5,
            PoseError::Image(_) => 6,
            PoseError::MalformedRecord { .. } => 7,
            PoseError::CorruptHeader(_) => 10,
            PoseError::VersionMismatch { .. } => 11,
            PoseError::Truncated(_) => 12,
            PoseError::ChecksumMismatch => 13,
            PoseError::InvalidGraph(_) => 20,
            PoseError::InvalidModel(_) => 21,
            PoseError::Incompatible(_) => 22,
            PoseError::OutOfBounds { .. } => 30,
            PoseError::LookupOutOfRange(_) => 31,
            PoseError::PyramidTooSmall { .. } => 32,
            PoseError::ImageTooSmall { .. } => 33,
            PoseError::IllPosedTransform { .. } => 34,
            PoseError::NoValidPlacement => 35,
            PoseError::Clustering(_) => 40,
            PoseError::NonFiniteObjective(_) => 41,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PoseError::Io {
            path: path.into(),
            source,
        }
    }
}
