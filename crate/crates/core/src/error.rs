use std::path::PathBuf;

use crate::geometry::GeometryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// [`Error::Io`] is the only variant the command line maps to exit code 2;
/// everything else is an input or configuration problem (exit code 1).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in `{}` at line {line}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown image `{image_id}` referenced by {context}")]
    UnknownImage { image_id: String, context: String },

    #[error("detections span multiple images (`{first}` and `{other}`)")]
    MixedImage { first: String, other: String },

    #[error("mixed (image, class) partition: {0}")]
    Partition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot split manifest: {0}")]
    Split(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
