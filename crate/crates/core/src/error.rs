use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    /// A group description violates one of its structural invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("group is not of Heisenberg type")]
    NotHeisenbergType,

    #[error("evaluation point coincides with the pole")]
    PoleAtSource,

    #[error("Kalman condition fails at t = {t}: smallest eigenvalue of K(t) is {min_eigenvalue:e}")]
    KalmanFailure { t: f64, min_eigenvalue: f64 },

    #[error("truncation radius {radius} too small: tail bound {tail:e} exceeds target {target:e}")]
    TruncationTooSmall { radius: f64, tail: f64, target: f64 },

    #[error("{what} did not converge: estimated error {est_error:e}, target {target:e}")]
    NonConvergence {
        what: &'static str,
        est_error: f64,
        target: f64,
    },

    /// The oscillatory quadrature would need more nodes than the configured budget.
    #[error("t = {t} is below the resolvable limit (t_min ~ {t_min:e}) for this pair of points")]
    TimeTooSmall { t: f64, t_min: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

impl Error {
    /// Problems with the user's input data rather than with the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation(_))
    }

    /// Accuracy targets that could not be met.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::KalmanFailure { .. }
                | Error::TruncationTooSmall { .. }
                | Error::NonConvergence { .. }
                | Error::TimeTooSmall { .. }
                | Error::Eigen(_)
        )
    }
}
