use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the laboratory.
///
/// Variants are grouped by the exit-code class they map onto in the
/// command-line driver (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// A chart point or ambient point lies outside the region where the
    /// requested quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate plane: |X|^2|Y|^2 - <X,Y>^2 = {0:e}")]
    DegeneratePlane(f64),

    #[error("curvature hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("flow unstable: {0}")]
    Stability(String),

    #[error("energy concentration: {0}")]
    Concentration(String),

    #[error("consistency failure for map `{map}`: {detail}")]
    ConsistencyFailure { map: String, detail: String },

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Exit status: 1 assertion failure, 2 usage error, 3 numerical error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assertion(_) | Error::ConsistencyFailure { .. } => 1,
            Error::Usage(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Domain(_)
            | Error::Numerical(_)
            | Error::DegeneratePlane(_)
            | Error::HypothesisViolation(_)
            | Error::Stability(_)
            | Error::Concentration(_) => 3,
        }
    }

    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Usage(_) => "usage",
            Error::Parse { .. } => "parse",
            Error::Numerical(_) => "numerical",
            Error::DegeneratePlane(_) => "degenerate_plane",
            Error::HypothesisViolation(_) => "hypothesis_violation",
            Error::Stability(_) => "stability",
            Error::Concentration(_) => "concentration",
            Error::ConsistencyFailure { .. } => "consistency_failure",
            Error::Assertion(_) => "assertion",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
