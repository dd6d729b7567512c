//! Independent validators for the closed-form results.
//!
//! [`regions`] partitions the endowment space by default set for small
//! networks; [`simulate`] and [`mc`] draw endowment scenarios and average the
//! clearing outcomes.

pub mod mc;
pub mod regions;
pub mod simulate;

pub use mc::{mc_expectations, McExpectations, McStat};
pub use regions::{classify, enumerate_regions, regions_containing, DefaultRegion, MAX_REGION_BANKS};
pub use simulate::{exact_batch, simulate, CapmVariant, Measure, ScenarioBatch, ScenarioSpec, WeightedScenario};
