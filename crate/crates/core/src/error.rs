use std::path::PathBuf;

/// Errors produced anywhere in the reconstruction library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid parameter vector: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("gene {index} = {value} is outside [0, 1]")]
    GeneOutOfRange { index: usize, value: f64 },

    #[error("numeric domain error in `{op}`: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("inconsistent partial lengths: expected {expected}, found {found}")]
    PartialLength { expected: usize, found: usize },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("level of detail {tier} is outside 0..={max} for `{generator}`")]
    LodOutOfRange { generator: String, tier: u32, max: u32 },

    #[error("generator `{0}` is not differentiable; use the genetic (tree) path")]
    NotDifferentiable(String),

    #[error("invalid camera: {0}")]
    Camera(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty reference: {0}")]
    EmptyReference(String),

    #[error("empty mesh: {0}")]
    EmptyMesh(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
