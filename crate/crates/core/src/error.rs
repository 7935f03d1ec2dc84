use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed binary or text input. `offset` is a byte offset for binary
    /// formats and a 1-based line number for text formats.
    #[error("format error at {what} {offset}: {msg}")]
    Format {
        what: &'static str,
        offset: u64,
        msg: String,
    },

    #[error("invalid record {index}: {msg}")]
    InvalidRecord { index: usize, msg: String },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid sort entry {index}: depth {depth} is not a positive finite value")]
    InvalidDepth { index: usize, depth: f32 },

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("load reduction is undefined for an empty entry list")]
    EmptyEntries,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn byte(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            what: "byte",
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn line(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            what: "line",
            offset: line as u64,
            msg: msg.into(),
        }
    }
}
