//! Time-series alpha regressions, Fama-MacBeth, spanning tests, predictive
//! regressions and correlation tables.

mod correlation;
mod fmb;
mod models;
mod predictive;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use fmb::{fama_macbeth, portfolio_cross_sections, stock_cross_sections, CrossSection, FmbReport};
pub use models::{
    alpha_regression, build_factor, loadings_table, spanning_test, AlphaReport, AlphaRow, ModelSpec, SpanningResult,
};
pub use predictive::{
    aggregate_to_period, market_volatility, panel_predictive, panel_predictive_profile, predictive_regression,
    Aggregation, PanelPredictiveInput, PanelPredictiveResult, PredictiveConfig, PredictiveResult, Predictor, Subsample,
};

/// Formats an optional float as a CSV field.
pub(crate) fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
