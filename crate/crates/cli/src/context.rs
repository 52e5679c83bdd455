//! Lazily computed pipeline state shared by the stages of one run.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cidlab_core::beta::{rolling_betas, BetaPanel};
use cidlab_core::dispersion::{dispersion_series, DispersionOptions, DispersionSeries};
use cidlab_core::econometrics::{innovation_filter, InnovationSeries};
use cidlab_core::panel::{
    apply_screens, classify, load_factors, load_macro, load_panel, load_scheme, FactorTable, IndustryScheme,
    MacroSeries, ScreenConfig,
};
use cidlab_core::pipeline::keys_by_month;
use cidlab_core::portfolio::{long_short, portfolio_returns, sort_by_month, PortfolioSeries, SortResult};
use cidlab_core::{MonthId, ReturnPanel, Series};

use crate::config::{Measure, RunConfig};
use crate::CliError;

pub type Keys = BTreeMap<MonthId, Vec<(Arc<str>, f64)>>;

/// Observation counts before and after each ingestion step.
#[derive(Debug, Clone)]
pub struct IngestStats {
    pub loaded: usize,
    pub screened: usize,
}

/// Betas, sort and portfolios (quantiles then `L/S`) for one dispersion measure.
pub struct MeasureSort {
    pub innovations: InnovationSeries,
    pub betas: BetaPanel,
    pub sort: SortResult,
    pub portfolios: Vec<PortfolioSeries>,
}

impl MeasureSort {
    pub fn long_short(&self) -> &PortfolioSeries {
        self.portfolios.last().expect("long-short leg is always present")
    }

    pub fn quantiles(&self) -> &[PortfolioSeries] {
        &self.portfolios[..self.portfolios.len() - 1]
    }
}

fn init<T>(cell: &OnceCell<T>, f: impl FnOnce() -> Result<T, CliError>) -> Result<&T, CliError> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    Ok(cell.get_or_init(|| v))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Config(format!("inputs.{key}: required by this stage")))
}

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    factors: OnceCell<Option<FactorTable>>,
    raw_panel: OnceCell<(ReturnPanel, IngestStats)>,
    scheme: OnceCell<IndustryScheme>,
    classified: OnceCell<ReturnPanel>,
    dispersion: OnceCell<DispersionSeries>,
    innovations: OnceCell<InnovationSeries>,
    cid: OnceCell<MeasureSort>,
    wid: OnceCell<MeasureSort>,
    csd: OnceCell<MeasureSort>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Context {
            cfg,
            factors: OnceCell::new(),
            raw_panel: OnceCell::new(),
            scheme: OnceCell::new(),
            classified: OnceCell::new(),
            dispersion: OnceCell::new(),
            innovations: OnceCell::new(),
            cid: OnceCell::new(),
            wid: OnceCell::new(),
            csd: OnceCell::new(),
        }
    }

    pub fn factors(&self) -> Result<Option<&FactorTable>, CliError> {
        init(&self.factors, || {
            Ok(match &self.cfg.inputs.factors {
                Some(p) => Some(load_factors(p)?),
                None => None,
            })
        })
        .map(Option::as_ref)
    }

    pub fn require_factors(&self) -> Result<&FactorTable, CliError> {
        self.factors()?
            .ok_or_else(|| CliError::Config("inputs.factors: required by this stage".into()))
    }

    pub fn market(&self) -> Result<Series, CliError> {
        Ok(self.require_factors()?.column("MKT_RF")?)
    }

    /// Loaded, converted to excess returns if needed, and screened.
    pub fn panel(&self) -> Result<&(ReturnPanel, IngestStats), CliError> {
        init(&self.raw_panel, || {
            let inputs = &self.cfg.inputs;
            let mut panel = load_panel(required(&inputs.panel, "panel")?)?;
            let loaded = panel.len();
            if inputs.raw_returns {
                let f = self.factors()?.ok_or_else(|| {
                    CliError::Config("inputs.raw_returns: needs inputs.factors with an RF column".into())
                })?;
                panel = panel.to_excess(f)?;
            }
            let s = &self.cfg.screens;
            if s.enabled {
                let deflator = load_macro(required(&inputs.deflator, "deflator")?, "deflator")?;
                let sc = ScreenConfig {
                    min_price: s.min_price,
                    min_real_cap: s.min_real_cap,
                    base_month: s.base_month.expect("validated with screens enabled"),
                };
                panel = apply_screens(&panel, &sc, &deflator)?;
            }
            let screened = panel.len();
            Ok((panel, IngestStats { loaded, screened }))
        })
    }

    pub fn scheme(&self) -> Result<&IndustryScheme, CliError> {
        init(&self.scheme, || {
            let inputs = &self.cfg.inputs;
            match (&inputs.scheme, &inputs.scheme_name) {
                (Some(p), name) => Ok(load_scheme(p, name.as_deref().unwrap_or("custom"))?),
                (None, Some(name)) => IndustryScheme::builtin(name)
                    .map_err(|e| CliError::Config(format!("inputs.scheme_name: {e}"))),
                (None, None) => Err(CliError::Config("inputs.scheme: a scheme file or scheme_name is required".into())),
            }
        })
    }

    pub fn classified(&self) -> Result<&ReturnPanel, CliError> {
        init(&self.classified, || Ok(classify(&self.panel()?.0, self.scheme()?)))
    }

    pub fn dispersion_options(&self, min_firms: usize) -> DispersionOptions {
        let d = &self.cfg.dispersion;
        DispersionOptions {
            min_firms,
            market: d.market,
            csd_weighting: d.csd_weighting,
            abnormal_model: d.abnormal_model.clone(),
        }
    }

    pub fn dispersion(&self) -> Result<&DispersionSeries, CliError> {
        init(&self.dispersion, || {
            let opts = self.dispersion_options(self.cfg.dispersion.min_firms);
            Ok(dispersion_series(self.classified()?, self.factors()?, &opts)?)
        })
    }

    /// Filter, betas and sort for one measure series on a classified panel.
    pub fn sort_measure(&self, panel: &ReturnPanel, measure: &Series) -> Result<MeasureSort, CliError> {
        let innovations = innovation_filter(measure)?;
        let market = match self.cfg.beta.market_control {
            true => Some(self.market()?),
            false => None,
        };
        let betas = rolling_betas(panel, &innovations.innovations, market.as_ref(), &self.cfg.beta.to_config())?;
        let s = &self.cfg.sort;
        let sort = sort_by_month(&keys_by_month(&betas), s.groups, &s.breakpoints)?;
        let mut portfolios = portfolio_returns(panel, &sort, s.weighting);
        let ls = long_short(&portfolios[portfolios.len() - 1], &portfolios[0])?;
        portfolios.push(ls);
        Ok(MeasureSort {
            innovations,
            betas,
            sort,
            portfolios,
        })
    }

    /// CID innovations without estimating betas.
    pub fn innovations(&self) -> Result<&InnovationSeries, CliError> {
        init(&self.innovations, || Ok(innovation_filter(&self.dispersion()?.cid_series())?))
    }

    pub fn cid_sort(&self) -> Result<&MeasureSort, CliError> {
        init(&self.cid, || {
            let cid = self.dispersion()?.cid_series();
            self.sort_measure(self.classified()?, &cid)
        })
    }

    /// Sort on betas to WID or CSD innovations.
    pub fn measure_sort(&self, measure: Measure) -> Result<&MeasureSort, CliError> {
        let cell = match measure {
            Measure::Wid => &self.wid,
            Measure::Csd => &self.csd,
        };
        init(cell, || {
            let d = self.dispersion()?;
            let series = match measure {
                Measure::Wid => d.wid_series(),
                Measure::Csd => d.csd_series(),
            };
            self.sort_measure(self.classified()?, &series)
        })
    }

    pub fn macro_series(&self, path: &Option<PathBuf>, label: &str) -> Result<Option<MacroSeries>, CliError> {
        Ok(match path {
            Some(p) => Some(load_macro(p, label)?),
            None => None,
        })
    }
}
