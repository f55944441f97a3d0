use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing value at row {row}, column `{column}` (complete cases required)")]
    MissingData { row: usize, column: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot parse `{value}` at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("outcome is constant; min-max scaling is undefined")]
    DegenerateOutcome,

    #[error("covariate column `{0}` is constant; min-max scaling is undefined")]
    DegenerateColumn(String),

    #[error("column `{column}` has level {level} not seen in training data")]
    UnknownLevel { column: String, level: i64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("all RBF centers coincide; bandwidth is zero")]
    DegenerateCenters,

    #[error("numerical failure in {context}{}", iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Numerical {
        context: String,
        iteration: Option<usize>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(context: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            iteration: None,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the iteration index to a numerical error raised inside the sampler.
    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        match self {
            Error::Numerical { context, .. } => Error::Numerical {
                context,
                iteration: Some(iter),
            },
            other => other,
        }
    }

    /// True for failures of the numerical routines rather than of user input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. } | Error::DegenerateCenters)
    }
}
