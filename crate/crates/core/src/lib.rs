//! Valuation of debt and equity in interbank networks with bankruptcy costs.
//!
//! The crate clears Eisenberg-Noe style networks with recovery rates, prices
//! claims in closed form when endowments are comonotonic, and brackets the
//! general case between a comonotonic lower bound and conditional / Jensen
//! upper bounds. The [`oracle`] module holds independent Monte Carlo and
//! default-region validators.

pub mod bounds;
pub mod calibration;
pub mod capm;
pub mod clearing;
pub mod comonotonic;
pub mod error;
pub mod factor;
pub mod io;
pub mod marginal;
pub mod network;
pub mod oracle;
pub mod special;
pub mod statics;

pub use clearing::{greatest_clearing, ClearingResult};
pub use comonotonic::{expected_values, solvency_thresholds, BankExpectation, SolvencyThresholds};
pub use error::{NetError, Result};
pub use factor::{EndowmentMap, FactorDistribution, FactorModel};
pub use marginal::Marginal;
pub use network::FinancialNetwork;
