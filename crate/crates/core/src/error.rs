use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    ConfigAt { line: usize, message: String },

    #[error("resolution violation: h = {h} is below 4 * bin_width = {limit}")]
    Resolution { h: f64, limit: f64 },

    #[error("field padding {padding} is smaller than h = {h}")]
    Padding { padding: f64, h: f64 },

    #[error("step index {index} out of range 0..={n_steps}")]
    StepIndex { index: usize, n_steps: usize },

    #[error("heat kernel variance t - r must be positive (r = {r}, t = {t})")]
    TerminalTime { r: f64, t: f64 },

    #[error("degenerate replica: alpha = {0} must be positive")]
    DegenerateAlpha(f64),

    #[error("{0}")]
    InvalidInput(String),

    #[error("singular least squares design: {0}")]
    SingularDesign(String),

    #[error("too many degenerate replicas: {excluded} of {total}")]
    Exclusions { excluded: usize, total: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
