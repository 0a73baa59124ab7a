use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller supplied arguments with the wrong shape or an invalid setting.
    #[error("usage error: {0}")]
    Usage(String),

    /// Observation data was rejected (non-finite, wrong dimension).
    #[error("input error: {0}")]
    Input(String),

    #[error("matrix is singular or nearly so (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    /// The H∞ existence condition `I − θP + CᵀV⁻¹CP ≻ 0` does not hold.
    #[error(
        "H-infinity step infeasible for theta = {theta}: pivot {index} of the symmetrized \
         condition matrix is {pivot:e} ({sign})",
        sign = if *pivot < 0.0 { "negative" } else { "not above tolerance" }
    )]
    Infeasible { theta: f64, index: usize, pivot: f64 },

    /// The difference window holds fewer samples than the estimator needs.
    #[error("noise window warming up: {have} of {need} differences collected")]
    WarmingUp { have: usize, need: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A CSV input lacks a required column or has a malformed row.
    #[error("trace schema error: {0}")]
    Schema(String),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Errors caused by what the caller asked for rather than by the run
    /// itself. Front ends map these to exit code 2 / HTTP 400.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_) | Error::Parse { .. } | Error::Schema(_) | Error::Input(_)
        )
    }
}
