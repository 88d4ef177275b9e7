use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("weight is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("matrix is not Hermitian: residual {residual:e} exceeds {tol:e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("operator is not accretive: smallest Hermitian eigenvalue {lambda_min:e} below -{tol:e}")]
    NotAccretive { lambda_min: f64, tol: f64 },

    #[error("operator is not hypocoercive for any m <= {max_m}")]
    NotHypocoercive { max_m: usize },

    #[error("mode {0} lies inside (-1, 1)")]
    ModeOutOfRange(f64),

    #[error("empty mode set")]
    EmptyModeSet,

    #[error("matrix exponential out of range: ||A||t = {scale:e} exceeds {limit}")]
    ExpRange { scale: f64, limit: f64 },

    #[error(
        "norm defect at t = {t:e} is {defect:e}, below 10x its error estimate {err:e}; \
         try a window starting at {suggested_lo:e}"
    )]
    Conditioning {
        t: f64,
        defect: f64,
        err: f64,
        suggested_lo: f64,
        suggested_hi: f64,
    },

    #[error("series evaluation outside its convergence regime: t||C|| = {0:e} > 1")]
    OutOfRegime(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
