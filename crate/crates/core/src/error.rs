use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed or out-of-range CSV record. `row` is the 1-based data row.
    #[error("row {row}{}: {message}", field.as_ref().map(|f| format!(", field `{f}`")).unwrap_or_default())]
    Csv {
        row: usize,
        field: Option<String>,
        message: String,
    },

    #[error("CSV header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "could not place {classes} class means at separation {separation} after {attempts} attempts; try a smaller separation"
    )]
    SeparationUnsatisfiable {
        classes: usize,
        separation: f64,
        attempts: usize,
    },

    #[error("singular least-squares system; use a regularisation strength > 0")]
    SingularSystem,

    #[error("variance component {0} is zero")]
    ZeroVariance(usize),

    #[error("no clusters exist yet")]
    NoClusters,

    #[error("config{}: {message}", location(*line, key.as_deref()))]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("unknown report format `{0}` (expected json or markdown)")]
    UnknownFormat(String),

    #[error("report schema mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(line: Option<usize>, key: Option<&str>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" line {l}, key `{k}`"),
        (Some(l), None) => format!(" line {l}"),
        (None, Some(k)) => format!(" key `{k}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by the input data rather than by configuration or the run itself.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Csv { .. }
            | Error::Header { .. }
            | Error::EmptyDataset
            | Error::InvalidSample(_)
            | Error::SeparationUnsatisfiable { .. } => true,
            Error::Trial { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::UnknownFormat(_) | Error::SchemaMismatch { .. }
        )
    }
}
