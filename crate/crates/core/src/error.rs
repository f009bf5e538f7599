use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("user {user} coincides with array element {element}")]
    CoincidentPoints { user: usize, element: usize },

    #[error("channel Gram matrix is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("exhaustive ordering search over {users} users exceeds the cap of {cap}; use the greedy ordering")]
    CapExceeded { users: usize, cap: usize },

    #[error("expected {expected} users, got {got}")]
    UserCount { expected: usize, got: usize },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by the numerics of a valid input rather than
    /// by the input itself.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::RankDeficient { .. })
    }
}
