//! Numerical verification toolkit for a weighted energy inequality over an
//! ultrahyperbolic operator.
//!
//! The crate instantiates every ingredient of the estimate chain with exact
//! analytic derivatives (2-jets), so that algebraic identities close to
//! round-off and inequalities can be audited pointwise and in integrated
//! form over the curved domain shell:
//!
//! * [`params`] — scalar parameters of the weight system, validity rules,
//!   and empirical threshold estimation.
//! * [`fields`] — exact 2-jet scalar fields, the compact bump, and
//!   finite-difference cross-checks.
//! * [`operators`] — the second-order operator, its transformed principal
//!   part, and coefficient-set audits.
//! * [`transform`] — the square-root change of variable and coefficient
//!   pushforward.
//! * [`carleman`] — the weight, the auxiliary function families, the
//!   fourteen-term expansion with its divergence ledger, and the
//!   pointwise/integrated inequality checkers.
//! * [`reduction`] — division by the source factor, reduced coefficients,
//!   the integral operators, and the integro-differential identity.
//! * [`quadrature`] — midpoint tensor integration over the shell, the
//!   integral-operator ratio checks, and the uniqueness demonstration.
//! * [`cli`] — configuration loading and suite orchestration.

pub mod carleman;
pub mod cli;
pub mod fields;
pub mod operators;
pub mod params;
pub mod quadrature;
pub mod reduction;
pub mod transform;

use thiserror::Error;

/// Crate-wide error type. Most checkers report findings instead of failing;
/// errors are reserved for misuse (bad steps, empty grids, config problems).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("finite-difference step {h:e} underflows the box scale (minimum {min:e})")]
    StepUnderflow { h: f64, min: f64 },
    #[error("x1 + eta0 must be positive, got {value}")]
    NonPositiveShift { value: f64 },
    #[error("point outside the transform domain: {detail}")]
    TransformDomain { detail: String },
    #[error("divisor magnitude {value:e} below the configured floor {floor:e}")]
    SmallDivisor { value: f64, floor: f64 },
    #[error("no grid point passes the domain-shell indicator")]
    EmptyDomain,
    #[error("grid must have at least {min} points per axis, got {got}")]
    GridTooCoarse { min: usize, got: usize },
    #[error("safety factor must be strictly positive, got {got}")]
    BadSafetyFactor { got: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
