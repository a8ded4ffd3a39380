//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grasp: {0}")]
    InvalidGrasp(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Annotation-text parse failure; line numbers are 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no grasps in annotation")]
    NoGrasps,

    #[error("line {line}: unknown class '{name}'")]
    UnknownClass { name: String, line: usize },

    #[error("scene '{scene_id}': {msg}")]
    SceneInvariant { scene_id: String, msg: String },

    #[error("bad magic: expected \"GKT1\", found {found:?}")]
    BadMagic { found: Vec<u8> },

    #[error("tensor: {0}")]
    Tensor(String),

    /// Canonical scenes-file schema violation; line numbers are 1-based.
    #[error("scenes file line {line}: {msg}")]
    SceneSchema { line: usize, msg: String },

    #[error("scene ids mismatch: {0}")]
    SceneMismatch(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
