use std::fmt;
use std::path::PathBuf;

/// Errors raised while building or evaluating a model.
#[derive(Debug)]
pub enum Error {
    /// A parameter violates a model invariant.
    InvalidConfig { key: String, reason: String },
    /// A line of a `key = value` file could not be accepted.
    Parse {
        line: usize,
        key: String,
        reason: String,
    },
    /// A path-loss moment whose defining integral diverges (v * alpha <= 2).
    DivergentMoment { order: u32, alpha: f64 },
    /// A user-supplied pilot matrix failed validation.
    InvalidPilots(String),
    /// Binomial-sum coverage requested for a non-integer or too large antenna mean.
    BinomialFormUnavailable { mean_antennas: f64 },
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Self::InvalidConfig {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a line number to an invariant violation raised after parsing.
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            Self::InvalidConfig { key, reason } => Self::Parse { line, key, reason },
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig { key, reason } => write!(f, "invalid `{key}`: {reason}"),
            Self::Parse { line, key, reason } => {
                write!(f, "line {line}: invalid `{key}`: {reason}")
            }
            Self::DivergentMoment { order, alpha } => write!(
                f,
                "path-loss moment of order {order} diverges for alpha = {alpha} (need order * alpha > 2)"
            ),
            Self::InvalidPilots(reason) => write!(f, "invalid pilot matrix: {reason}"),
            Self::BinomialFormUnavailable { mean_antennas } => write!(
                f,
                "binomial-sum coverage needs an integer mean antenna count <= 60, got {mean_antennas}"
            ),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
