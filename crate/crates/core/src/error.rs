use thiserror::Error;

/// Errors raised by spectral construction, closed-form evaluation and the
/// numerical oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("A and B do not commute: ||AB - BA||_F = {residual:.3e} exceeds {bound:.3e}")]
    NonCommuting { residual: f64, bound: f64 },

    #[error("matrix is not symmetric positive definite ({reason})")]
    NotPositiveDefinite { reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time {t} is not a positive finite number")]
    DomainError { t: f64 },

    #[error(
        "time {t} is within {tolerance:e} of the singular time {singular} \
         (eigenvalue #{index} = {eigenvalue}, k = {k})"
    )]
    SingularTime {
        t: f64,
        singular: f64,
        index: usize,
        eigenvalue: f64,
        k: u64,
        tolerance: f64,
    },

    #[error("D has a zero eigenvalue (#{index} = {eigenvalue:e}) where a non-singular D is required")]
    SingularD { index: usize, eigenvalue: f64 },

    #[error("s = {s} lies outside [0, {t}]")]
    OutOfRange { s: f64, t: f64 },

    #[error("shooting end-point map is numerically singular (rcond = {rcond:.3e})")]
    SingularShooting { rcond: f64 },

    #[error("RK4 blow-up at step {step} (t = {t}): entry magnitude {magnitude:.3e}")]
    StepUnstable { step: usize, t: f64, magnitude: f64 },

    #[error("cos(2 t a_j b_j) vanishes for coordinate {index} at t = {t}")]
    SingularCos { index: usize, t: f64 },

    #[error("Gaussian integral diverges for coordinate {index} at t = {t} (cot(2 t a_j b_j) <= 0)")]
    DivergentIntegral { index: usize, t: f64 },

    #[error("tanh-sinh quadrature did not converge by level {level} (last change {change:.3e})")]
    QuadratureNonConvergent { level: u32, change: f64 },

    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps (off-diagonal mass {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
