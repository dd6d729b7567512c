use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by the kind of failure so the CLI can map them onto
/// distinct exit codes.
#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative liability L[{row}][{col}] = {value}")]
    NegativeLiability { row: usize, col: usize, value: f64 },

    #[error("self-obligation: bank {bank} owes itself {value}")]
    SelfObligation { bank: usize, value: f64 },

    #[error("bank {bank} has zero total liabilities")]
    ZeroLiabilities { bank: usize },

    #[error("bank {bank} has no obligation to the societal node")]
    NoSocietalObligation { bank: usize },

    #[error("recovery rate {name} = {value} outside [0, 1]")]
    RecoveryRate { name: &'static str, value: f64 },

    #[error("cross-ownership row {bank} sums to {sum} (must be < 1)")]
    CrossOwnership { bank: usize, sum: f64 },

    #[error("invalid endowment: {0}")]
    Endowment(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("quadrature did not converge on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },

    #[error("bound requires full recovery (alpha_x = alpha_L = 1), got alpha_x = {alpha_x}, alpha_L = {alpha_l}; with bankruptcy costs the comonotonic value is not a bound on payments")]
    RequiresFullRecovery { alpha_x: f64, alpha_l: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("calibration failed for bank {bank}: {reason}")]
    Calibration { bank: usize, reason: String },

    #[error("region enumeration refused for n = {n} > {max}: the number of default sets grows as 2^n")]
    TooManyBanks { n: usize, max: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;
