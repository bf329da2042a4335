use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus contains no tokens")]
    EmptyCorpus,

    #[error("no token reaches min_count {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("metric `{metric}` unavailable: {reason}")]
    MetricUnavailable { metric: String, reason: String },

    /// A query or view request that cannot be answered. `token` names the
    /// offending word or dimension when there is one.
    #[error("query error: {message}")]
    Query {
        message: String,
        token: Option<String>,
    },

    #[error("label conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn unavailable(metric: &str, reason: impl Into<String>) -> Self {
        Error::MetricUnavailable {
            metric: metric.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn oov(word: &str) -> Self {
        Error::Query {
            message: format!("word `{word}` is not in the vocabulary"),
            token: Some(word.to_string()),
        }
    }

    pub(crate) fn unknown_dimension(name: &str) -> Self {
        Error::Query {
            message: format!("unknown dimension `{name}`"),
            token: Some(name.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
