use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel ({x:.3}, {y:.3}) lies outside the sky dome")]
    OutOfDome { x: f64, y: f64 },

    #[error("zenith {zenith_deg:.3}° is beyond the plane clip angle {max_deg:.3}°")]
    OutOfPlane { zenith_deg: f64, max_deg: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient coverage: {message}")]
    Coverage { message: String, minutes: Vec<u16> },

    #[error("tables do not align on {} key(s), first: {}", keys.len(), keys.first().map(String::as_str).unwrap_or("-"))]
    Join { keys: Vec<String> },

    #[error("window gap: missing frame at {0}")]
    Gap(String),

    #[error("{path}: line {line}: {message}")]
    Schema {
        path: String,
        line: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("png: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn coverage(message: impl Into<String>) -> Self {
        Error::Coverage {
            message: message.into(),
            minutes: Vec::new(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
