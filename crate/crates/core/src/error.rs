use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite values produced by `{op}` (node {node})")]
    NonFinite { op: &'static str, node: usize },
    #[error("range error: {0}")]
    Range(String),
    #[error("config error: {key}: {msg}")]
    Config { key: String, msg: String },
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("missing template for style age {0}")]
    MissingTemplate(usize),
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }

    /// Short machine-readable tag used by the command line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Contract(_) => "contract",
            Error::NonFinite { .. } => "non_finite",
            Error::Range(_) => "range",
            Error::Config { .. } => "config",
            Error::Format { .. } => "format",
            Error::MissingTemplate(_) => "missing_template",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
