//! The standard chain from a raw panel to sorted long-short returns.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::beta::{rolling_betas, BetaConfig, BetaPanel};
use crate::dispersion::{dispersion_series, DispersionOptions, DispersionSeries};
use crate::econometrics::{innovation_filter, InnovationSeries};
use crate::panel::{classify, FactorTable, IndustryScheme, MonthId};
use crate::portfolio::{long_short, portfolio_returns, sort_by_month, Breakpoints, PortfolioSeries, SortResult, Weighting};
use crate::{Result, ReturnPanel};

#[derive(Debug, Clone, PartialEq)]
pub struct SortOptions {
    pub groups: usize,
    pub breakpoints: Breakpoints,
    pub weighting: Weighting,
}

impl Default for SortOptions {
    fn default() -> Self {
        SortOptions {
            groups: 5,
            breakpoints: Breakpoints::EqualCount,
            weighting: Weighting::Value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SortPipeline {
    pub classified: ReturnPanel,
    pub dispersion: DispersionSeries,
    pub innovations: InnovationSeries,
    pub betas: BetaPanel,
    pub sort: SortResult,
    pub portfolios: Vec<PortfolioSeries>,
    /// Highest group minus lowest.
    pub long_short: PortfolioSeries,
}

/// Per-month `(stock_id, beta)` cross-sections.
pub fn keys_by_month(betas: &BetaPanel) -> BTreeMap<MonthId, Vec<(Arc<str>, f64)>> {
    betas.months().map(|m| (m, betas.keys(m))).collect()
}

/// Dispersion, innovations, rolling betas, quantile sort and long-short.
pub fn run_sort_pipeline(
    panel: &ReturnPanel,
    factors: Option<&FactorTable>,
    scheme: &IndustryScheme,
    dispersion: &DispersionOptions,
    beta: &BetaConfig,
    sort: &SortOptions,
) -> Result<SortPipeline> {
    let classified = classify(panel, scheme);
    let disp = dispersion_series(&classified, factors, dispersion)?;
    let innovations = innovation_filter(&disp.cid_series())?;
    let market = factors.map(|f| f.column("MKT_RF")).transpose()?;
    let betas = rolling_betas(&classified, &innovations.innovations, market.as_ref(), beta)?;
    let sorted = sort_by_month(&keys_by_month(&betas), sort.groups, &sort.breakpoints)?;
    let portfolios = portfolio_returns(&classified, &sorted, sort.weighting);
    let ls = long_short(&portfolios[portfolios.len() - 1], &portfolios[0])?;
    Ok(SortPipeline {
        classified,
        dispersion: disp,
        innovations,
        betas,
        sort: sorted,
        portfolios,
        long_short: ls,
    })
}
