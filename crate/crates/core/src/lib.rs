//! Cross-industry return dispersion research engine.
//!
//! The crate is organised as a pipeline:
//!
//! * [`panel`] ingests stock-month returns, factor tables and macro series,
//!   applies sample screens and assigns industries.
//! * [`dispersion`] measures cross-industry (CID), within-industry (WID) and
//!   cross-sectional (CSD) dispersion every month.
//! * [`econometrics`] holds the numerical core: QR-based OLS, Newey-West
//!   covariance, the differencing/residualising innovation filter,
//!   winsorisation and autocorrelation.
//! * [`beta`] estimates rolling stock sensitivities to dispersion innovations.
//! * [`portfolio`] sorts stocks into quantile portfolios and builds long-short
//!   legs, double sorts and characteristic tables.
//! * [`battery`] runs alpha regressions, Fama-MacBeth, spanning tests and
//!   macro predictive regressions.
//! * [`synth`] generates synthetic economies with planted premia that the
//!   whole pipeline must recover.

pub mod battery;
pub mod beta;
pub mod dispersion;
pub mod econometrics;
mod error;
pub mod panel;
pub mod pipeline;
pub mod portfolio;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use panel::{MonthId, ReturnPanel, StockObservation};
pub use series::Series;
