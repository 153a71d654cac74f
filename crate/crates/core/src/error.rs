use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("png error at {path}: {message}")]
    Png { path: PathBuf, message: String },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid sample {id}: {message}")]
    Sample { id: String, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty pixel set: {0}")]
    EmptyPixelSet(&'static str),
    #[error("distance to empty set")]
    DistanceToEmptySet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inpaint hole covers the whole frame")]
    HoleCoversFrame,
    #[error("starved estimator at ({row}, {col}): no known pixel within radius")]
    StarvedEstimator { row: u32, col: u32 },
    #[error("instance id collision: {0} already present")]
    IdCollision(u32),
    #[error("synthesis packing failed: placed {placed} of {requested} instances")]
    PackingFailed { placed: u64, requested: u64 },
    #[error("unknown instance id {0}")]
    UnknownInstance(u32),
    #[error("unknown sample id {0}")]
    UnknownSample(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub fn png(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Png {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn sample(id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Sample {
            id: id.into(),
            message: message.into(),
        }
    }
}
