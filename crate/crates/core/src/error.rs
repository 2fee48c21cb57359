use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("i/o error on {path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("non-finite `{field}` in record {record}")]
    NonFinite { record: usize, field: String },

    #[error("empty scene")]
    EmptyScene,

    #[error("unknown label {0}")]
    UnknownLabel(i32),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("degenerate bounding box")]
    DegenerateBounds,

    #[error("grid frames do not overlap")]
    NoOverlap,

    #[error("time step {dt:.3e} violates the CFL bound; use dt <= {max_dt:.3e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("numerical failure at step {step}: {detail}")]
    Numerical { step: usize, detail: String },

    #[error("all kernels were culled")]
    AllCulled,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_path(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Path {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotConverged { .. }
            | Error::Numerical { .. }
            | Error::Cfl { .. }
            | Error::AllCulled
            | Error::NonFinite { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::UnknownLabel(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
