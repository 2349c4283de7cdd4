use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: operand spacing {left} vs {right}")]
    GridMismatch { left: f64, right: f64 },

    #[error("integral of z^{power} over ({lo}, {hi}) is not integrable at the origin")]
    NonIntegrable { lo: f64, hi: f64, power: u32 },

    #[error("adaptive quadrature did not reach tolerance {tol:e} on ({lo}, {hi})")]
    QuadratureFailure { lo: f64, hi: f64, tol: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("cell {0} has no segment partition (not a small-jump cell)")]
    UnknownCell(i64),

    #[error("time step {tau} is not an integer multiple of {fine}")]
    ResolutionMismatch { tau: f64, fine: f64 },

    #[error("coarsening factor {factor} does not divide {steps} steps")]
    IndivisibleFactor { factor: usize, steps: usize },

    #[error("CFL violation: d*tau/h^2 = {ratio} is not below {bound} (h = {h}, tau = {tau})")]
    CflViolation { h: f64, tau: f64, ratio: f64, bound: f64 },

    #[error("delta too large: varsigma(delta) = {varsigma} >= kappa = {kappa}")]
    DeltaTooLarge { varsigma: f64, kappa: f64 },

    #[error("parabolicity fails: 2a - sigma^2 = {margin} at x = {x}, t = {t}")]
    NotParabolic { margin: f64, x: f64, t: f64 },

    #[error("singular banded matrix: pivot {pivot:e} at row {row}")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("time {0} is not on the noise grid")]
    TimeNotOnGrid(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
