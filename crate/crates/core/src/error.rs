use thiserror::Error;

/// Errors raised across the workbench.
///
/// Variants are grouped by the kind of contract that was broken so that the
/// service layer can map them onto HTTP status codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    Parameter { field: String, message: String },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("unknown explanation id `{0}`")]
    Reference(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {message} (input: {input})")]
    Numeric { message: String, input: String },

    #[error("training diverged: {0}")]
    Training(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("session state error: {0}")]
    State(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("validation failed: {}", format_fields(.0))]
    Validation(Vec<FieldError>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A single field-level validation message.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

fn format_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(|f| format!("{}: {}", f.field, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn parameter(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parameter { field: field.into(), message: message.into() }
    }

    /// Short machine-readable kind, used in CLI and HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter { .. } => "parameter",
            Error::Index(_) => "index",
            Error::Configuration(_) => "configuration",
            Error::Reference(_) => "reference",
            Error::Contract(_) => "contract",
            Error::Data(_) => "data",
            Error::Numeric { .. } => "numeric",
            Error::Training(_) => "training",
            Error::Protocol(_) => "protocol",
            Error::State(_) => "state",
            Error::Conflict(_) => "conflict",
            Error::NotFound(_) => "not_found",
            Error::MissingArtifacts(_) => "missing_artifacts",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
