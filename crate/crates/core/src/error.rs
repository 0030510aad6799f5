use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown map `{0}`")]
    UnknownMap(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("state ({x}, {y}) is not a free cell of map `{map}`")]
    InvalidState { x: usize, y: usize, map: String },

    #[error("not a probability vector: {0}")]
    InvalidDistribution(String),

    #[error("cannot relabel an empty trajectory")]
    EmptyTrajectory,

    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    InsufficientBuffer { have: usize, need: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("no path from start to goal")]
    NoPath,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("held-out map seed {0} was also used for training")]
    HeldOutOverlap(u64),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the caller's configuration rather than the filesystem.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
