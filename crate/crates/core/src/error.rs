use std::path::PathBuf;

use chrono::NaiveDate;

/// Errors produced anywhere in the forecasting pipeline.
///
/// The variants map onto the three failure classes the CLI distinguishes:
/// bad user input, bad data, and numerical breakdown.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("insufficient history for {target}: missing {}", format_dates(.missing))]
    MissingHistory {
        target: NaiveDate,
        missing: Vec<NaiveDate>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("unsupported graph structure: {0}")]
    UnsupportedStructure(String),

    #[error("numerical failure: {what} (jitter retries: {jitter_retries})")]
    Numerical { what: String, jitter_retries: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_dates(dates: &[NaiveDate]) -> String {
    dates
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Config { .. } => 1,
            Error::Numerical { .. } | Error::State(_) => 3,
            Error::MissingHistory { .. }
            | Error::Data(_)
            | Error::UnsupportedStructure(_)
            | Error::Io { .. }
            | Error::Csv { .. } => 2,
        }
    }
}
