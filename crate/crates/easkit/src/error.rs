use std::path::PathBuf;

/// Error type shared across the crate.
///
/// Variants are grouped by the stage that raises them so callers can match
/// on the failure class without string inspection.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A judgment template failed validation (slot count, judgment suffix,
    /// polarity wording).
    #[error("template error: {0}")]
    Template(String),

    /// A backend request failed after the configured number of attempts.
    #[error("scoring backend failed after {attempts} attempt(s): {message}")]
    Scoring { attempts: u32, message: String },

    /// The backend answered but cannot provide what we need (for example no
    /// log-probabilities in the response).
    #[error("backend capability missing: {0}")]
    Capability(String),

    /// A fixture backend had no entry for the requested key.
    #[error("fixture has no entry for key {key:?}")]
    FixtureMiss { key: String },

    /// Invalid argument or input data outside file parsing.
    #[error("invalid input: {0}")]
    Input(String),

    /// A structured input file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A slotted pair could not be realized for an identity.
    #[error("realization failed: {0}")]
    Realization(String),

    /// Statistical aligner training was misconfigured or given no data.
    #[error("aligner training error: {0}")]
    Training(String),

    /// A score table row violated the schema; `row` is 1-based and counts
    /// data rows (the header is row 0).
    #[error("score ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    /// A metric has no defined value on the given input (for example
    /// distinct-n over a corpus with no n-grams).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// Aggregation could not cover every expected identity.
    #[error("aggregation error: missing identities: {}", missing.join(", "))]
    Aggregation { missing: Vec<String> },

    /// Run configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// An external subprocess (translator, aligner) failed.
    #[error("subprocess {command:?} failed: {message}")]
    Subprocess { command: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
