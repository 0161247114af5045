//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("x = {x} outside tabulated domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("potential appears unbounded below on the sampled domain")]
    UnboundedPotential,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("momentum inversion requires V > 0, got V = {0}")]
    NonPositivePotential(f64),

    #[error("log-form velocity approximation undefined: 1 - p'^2/V^3 = {0} is not positive")]
    LogFormDomain(f64),

    #[error("degenerate Legendre transform: |d2L/dv2| = {0:e} below cutoff")]
    DegenerateHessian(f64),

    #[error("integration stalled at t = {t} (x = {x}, v = {v}): {message}")]
    Integration { t: f64, x: f64, v: f64, message: String },

    #[error("operator not Hermitian within tolerance: max defect {0:e}")]
    NotHermitian(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("kernel normalization failed: {0}")]
    Normalization(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
