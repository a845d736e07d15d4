use std::path::PathBuf;

/// Errors raised across the simulator, learning and evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point ({x:.3}, {y:.3}) is outside the track projection domain (lateral offset {t:.3} m)")]
    OutOfDomain { x: f64, y: f64, t: f64 },

    #[error("non-finite action for vehicle {vehicle}")]
    NonFiniteAction { vehicle: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("spawn failed after {attempts} placement attempts")]
    SpawnFailed { attempts: usize },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing file {path}")]
    Missing { path: PathBuf },

    #[error("refusing to overwrite non-empty {path} (use --force)")]
    WouldOverwrite { path: PathBuf },

    #[error("training aborted at iteration {iteration}: {reason}")]
    TrainingFault { iteration: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for errors caused by user configuration rather than a runtime fault.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Config(_)
                | Error::Schema(_)
                | Error::Missing { .. }
                | Error::WouldOverwrite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
