//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument value violates an invariant. `field`
    /// names the offending key so callers can surface actionable messages.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    /// A facility spec required by the requested model is absent.
    #[error("missing facility spec for {0}")]
    MissingFacility(&'static str),

    /// Malformed JSON configuration (includes serde's unknown-field errors).
    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),

    /// Weather CSV ingestion failure; `detail` carries file and row context.
    #[error("weather csv `{path}`: {detail}")]
    WeatherCsv { path: String, detail: String },

    /// Structurally invalid linear program handed to the solver or exporter.
    #[error("invalid LP: {0}")]
    InvalidLp(String),

    /// Result extraction refused because the solve did not end Optimal.
    #[error("cannot extract design from a {0} solution")]
    NotOptimal(&'static str),

    /// A metric was requested outside its precondition domain.
    #[error("metric domain error: {0}")]
    MetricDomain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
