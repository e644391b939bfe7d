//! Factorial difference-in-differences: estimators, inference, and a
//! potential-outcomes oracle for checking identification results.

pub mod error;
pub mod analysis;
pub mod cli;
pub mod dgp;
pub mod estimators;
pub mod inference;
pub mod ipw;
pub mod linalg;
pub mod montecarlo;
pub mod numeric;
pub mod panel;
pub mod regression;
pub mod roadmap;

pub use error::{FdidError, Result};
pub use estimators::{did, did_stratified, EstimandLabel, EstimateResult, Strata};
pub use panel::{CrossSection, LongPanel, PanelDataset, UnitRecord};
