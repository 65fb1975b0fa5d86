use thiserror::Error;

/// Violations of the generator and coefficient conditions of a regime model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model needs at least one regime")]
    Empty,
    #[error("generator is {rows}x{cols} but {regimes} regimes were given")]
    Shape {
        rows: usize,
        cols: usize,
        regimes: usize,
    },
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("negative off-diagonal rate q[{row}][{col}] = {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("RowSumNonZero: row {row} of the generator sums to {sum:e}")]
    RowSumNonZero { row: usize, sum: f64 },
    #[error("NonPositiveVolatility: sigma[{regime}] = {value}")]
    NonPositiveVolatility { regime: usize, value: f64 },
    #[error("NonPositiveRate: r[{regime}] = {value}")]
    NonPositiveRate { regime: usize, value: f64 },
    #[error("negative dividend rate {0}")]
    NegativeDividend(f64),
}

/// Invalid option contract or pricing request.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("times must satisfy t0 <= s <= T (t0={t0}, s={s}, T={maturity})")]
    TimeOrder { t0: f64, s: f64, maturity: f64 },
    #[error("averaging window T - t0 must be positive")]
    EmptyWindow,
    #[error("spot must be positive, got {0}")]
    NonPositiveSpot(f64),
    #[error("running integral must be non-negative, got {0}")]
    NegativeRunningIntegral(f64),
    #[error("strike must be positive, got {0}")]
    NonPositiveStrike(f64),
    #[error("fixed-strike option needs a strike")]
    MissingStrike,
    #[error("regime {regime} out of range for a {regimes}-regime model")]
    RegimeOutOfRange { regime: usize, regimes: usize },
    #[error("fixed-strike call is only priced when starting (s = t0, a = 0); the in-progress mapping may not be a contraction")]
    InProgressFixedCall,
    #[error("option style {0} is not supported by this operation")]
    WrongStyle(&'static str),
    #[error("valuation time equals maturity; nothing to price")]
    NoHorizon,
    #[error("invalid numerical configuration: {0}")]
    Numerics(String),
}

/// Errors raised by the pricing engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("AccuracyError: {check} = {value:e}, target {target:e}, tolerance {tolerance:e}")]
    Accuracy {
        check: String,
        value: f64,
        target: f64,
        tolerance: f64,
    },
    #[error("MaxIterations: no convergence after {iterations} iterations (last increment {increment:e})")]
    MaxIterations { iterations: usize, increment: f64 },
}

impl PricingError {
    pub(crate) fn accuracy(check: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        PricingError::Accuracy {
            check: check.into(),
            value,
            target,
            tolerance,
        }
    }

    /// True for numerical failures (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, PricingError::Accuracy { .. } | PricingError::MaxIterations { .. })
    }
}

pub type Result<T, E = PricingError> = std::result::Result<T, E>;
