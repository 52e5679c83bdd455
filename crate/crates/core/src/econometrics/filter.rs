use super::ols::{ols, Design, RegressionResult};
use super::stats::autocorrelation;
use crate::{Error, MonthId, Result, Series};

/// Shortest contiguous block the filter accepts.
pub const MIN_FILTER_LENGTH: usize = 10;

const LAG_DIFF: &str = "lag_diff";
const LAG_LEVEL: &str = "lag_level";

/// Fit of `Δs_t = γ0 + γ1 Δs_{t-1} + γ2 s_{t-1} + u_t` on one contiguous block.
#[derive(Debug, Clone)]
pub struct FilterFit {
    pub start: MonthId,
    pub end: MonthId,
    /// `[γ0, γ1, γ2]`.
    pub gammas: [f64; 3],
    /// Set when `Δs_{t-1}` was constant and had to be dropped (γ1 reported as 0).
    pub dropped_lagged_difference: bool,
    pub regression: RegressionResult,
}

/// Residuals of the differencing regression, indexed by month.
#[derive(Debug, Clone)]
pub struct InnovationSeries {
    pub innovations: Series,
    pub fits: Vec<FilterFit>,
    /// Lag-1 autocorrelation of the innovations; `None` when undefined.
    pub autocorr_lag1: Option<f64>,
}

impl InnovationSeries {
    pub fn months(&self) -> &[MonthId] {
        self.innovations.months()
    }

    /// Fit of the first (usually only) block.
    pub fn fit(&self) -> &FilterFit {
        &self.fits[0]
    }
}

/// Differences and residualises a series. Months missing from `series` split
/// it into contiguous blocks that are filtered independently; each block loses
/// its first two months.
pub fn innovation_filter(series: &Series) -> Result<InnovationSeries> {
    innovation_filter_step(series, 1)
}

/// [`innovation_filter`] for series observed every `step` months.
pub fn innovation_filter_step(series: &Series, step: i64) -> Result<InnovationSeries> {
    let blocks = series.contiguous_blocks_step(step);
    if blocks.is_empty() {
        return Err(Error::insufficient("innovation filter on an empty series"));
    }
    let mut months = Vec::new();
    let mut values = Vec::new();
    let mut fits = Vec::new();
    for block in &blocks {
        if block.len() < MIN_FILTER_LENGTH {
            return Err(Error::insufficient(format!(
                "contiguous block {}..{} has {} observations; the filter needs at least {}",
                block.months()[0],
                block.months()[block.len() - 1],
                block.len(),
                MIN_FILTER_LENGTH
            )));
        }
        let (fit, resid) = filter_block(block)?;
        months.extend_from_slice(&block.months()[2..]);
        values.extend(resid);
        fits.push(fit);
    }
    let autocorr_lag1 = autocorrelation(&values, 1).ok();
    Ok(InnovationSeries {
        innovations: Series::new(months, values)?,
        fits,
        autocorr_lag1,
    })
}

fn filter_block(block: &Series) -> Result<(FilterFit, Vec<f64>)> {
    let s = block.values();
    let n = s.len();
    let diff: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let y = diff[1..].to_vec();
    let lag_diff = diff[..n - 2].to_vec();
    let lag_level = s[1..n - 1].to_vec();

    let full = Design::with_intercept(n - 2)
        .column(LAG_DIFF, lag_diff.clone())
        .column(LAG_LEVEL, lag_level.clone());
    let (regression, dropped) = match ols(&y, &full) {
        Ok(r) => (r, false),
        Err(Error::Singular(msg)) if msg.starts_with(&format!("column `{LAG_DIFF}`")) => {
            // A constant lagged difference duplicates the intercept; the level
            // term must still vary.
            let reduced = Design::with_intercept(n - 2).column(LAG_LEVEL, lag_level);
            (ols(&y, &reduced)?, true)
        }
        Err(e) => return Err(e),
    };
    let gammas = [
        regression.coefficients[0],
        regression.coefficient(LAG_DIFF).unwrap_or(0.0),
        regression.coefficient(LAG_LEVEL).unwrap_or(0.0),
    ];
    let resid = regression.residuals.clone();
    Ok((
        FilterFit {
            start: block.months()[0],
            end: block.months()[n - 1],
            gammas,
            dropped_lagged_difference: dropped,
            regression,
        },
        resid,
    ))
}
