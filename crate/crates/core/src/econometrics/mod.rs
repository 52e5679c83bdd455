//! Regression, covariance, filtering and summary statistics.

mod filter;
mod ols;
mod stats;

pub use filter::{innovation_filter, innovation_filter_step, FilterFit, InnovationSeries, MIN_FILTER_LENGTH};
pub use ols::{
    newey_west, ols, with_cov, CovMethod, Design, RegressionResult, INTERCEPT, RANK_TOLERANCE,
};
pub use stats::{
    autocorrelation, correlation, mean, quantile, quantile_sorted, std_dev, variance, winsorize,
    QUANTILE_CONVENTION,
};
