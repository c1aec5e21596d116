use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("timestamp {timestamp} is outside the declared range {range}")]
    Range { timestamp: String, range: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no such file or directory: {}", .0.display())]
    MissingPath(PathBuf),

    #[error("unknown skill {name:?}{}", near_matches_suffix(.near))]
    UnknownSkill { name: String, near: Vec<String> },

    #[error("gradient check failed for {group}: relative error {rel_error:.3e}")]
    GradientCheck { group: String, rel_error: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn near_matches_suffix(near: &[String]) -> String {
    if near.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {})", near.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad input or configuration, as opposed to bugs or
    /// numerical breakdowns inside the library.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::Internal(_) | Error::Numeric(_) | Error::GradientCheck { .. }
        )
    }
}
