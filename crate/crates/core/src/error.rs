use thiserror::Error;

/// Errors shared across all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("absolute continuity violated at symbol {index}: p > 0 while q = 0")]
    AbsoluteContinuityViolation { index: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("gamma weights must be positive, got ({gamma1}, {gamma2})")]
    NonPositiveGamma { gamma1: f64, gamma2: f64 },
    #[error("phi must lie in [0, 1], got {0}")]
    PhiOutOfRange(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("no off-symbol pair: no input rows of the two channels coincide")]
    NoOffSymbol,
    #[error("input alphabet must be binary for this closed form, got {0} symbols")]
    NonBinaryInput(usize),
    #[error("input distribution puts mass {mass} on off-symbol {index}")]
    OffSymbolMassNonzero { index: usize, mass: f64 },
    #[error("degenerate adversary moments: D1 - D2 = {d_gap}, Delta = {delta}")]
    DegenerateMoments { d_gap: f64, delta: f64 },
    #[error("per-symbol activity mu = {0} must lie in [0, 1)")]
    MuOutOfRange(f64),
    #[error("exact enumeration cost {cost} exceeds budget {budget}")]
    BudgetExceeded { cost: u128, budget: u128 },
    #[error("confidence interval {got} wider than requested {requested}")]
    InsufficientTrials { got: f64, requested: f64 },
    #[error("quadrature failed to converge: residual {0}")]
    QuadratureNonConvergence(f64),
    #[error("invalid sweep spec: {0}")]
    InvalidSweepSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
