use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A window centered at the given coordinate does not fit inside the image.
    #[error("window of size {size} centered at ({x}, {y}) leaves the {width}x{height} image")]
    Border {
        x: i64,
        y: i64,
        size: usize,
        width: usize,
        height: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model format: {0}")]
    Format(String),

    #[error("model version mismatch: expected {expected:?}, found {found:?}")]
    Version { expected: String, found: String },

    #[error("shape mismatch in layer `{layer}`: expected {expected:?}, found {found:?}")]
    Shape {
        layer: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("i/o: {0}")]
    Io(#[from] io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 4,
            Error::Json(e) if e.is_io() => 4,
            Error::InvalidInput(_)
            | Error::Border { .. }
            | Error::Precondition(_)
            | Error::Format(_)
            | Error::Version { .. }
            | Error::Shape { .. }
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::Numeric(_) => 3,
            Error::Io(_) | Error::Image(_) => 4,
        }
    }
}
