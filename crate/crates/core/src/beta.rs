//! Rolling sensitivities of stock returns to dispersion innovations.
//!
//! For stock `i` at period `m` the slope of `R_i,t = a + b u_t + e_t` is
//! estimated over the trailing `window` periods ending at `m`, then each
//! period's cross-section is winsorized.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econometrics::{ols, winsorize, Design};
use crate::panel::{Frequency, MonthId, ReturnPanel};
use crate::{Error, Result, Series};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaConfig {
    /// Window length in periods of `frequency`.
    pub window: usize,
    pub min_obs: usize,
    pub winsor: (f64, f64),
    /// Adds the market return as a second regressor.
    pub market_control: bool,
    pub frequency: Frequency,
}

impl Default for BetaConfig {
    fn default() -> Self {
        BetaConfig {
            window: 24,
            min_obs: 18,
            winsor: (0.01, 0.99),
            market_control: false,
            frequency: Frequency::Monthly,
        }
    }
}

impl BetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_obs < 3 || self.window < self.min_obs {
            return Err(Error::invalid(format!(
                "beta window must satisfy window >= min_obs >= 3, got window {} min_obs {}",
                self.window, self.min_obs
            )));
        }
        let (lo, hi) = self.winsor;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::invalid(format!("winsor bounds ({lo}, {hi}) out of order")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaEntry {
    pub stock_id: Arc<str>,
    pub month: MonthId,
    /// After cross-sectional winsorization.
    pub beta: f64,
    pub raw_beta: f64,
    pub nobs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BetaDiagnostics {
    pub estimated: usize,
    pub skipped_short: usize,
    pub skipped_zero_variance: usize,
}

/// Stock-period beta estimates sorted by `(month, stock_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPanel {
    entries: Vec<BetaEntry>,
    months: BTreeMap<MonthId, std::ops::Range<usize>>,
    pub config: BetaConfig,
    pub diagnostics: BetaDiagnostics,
}

impl BetaPanel {
    pub fn from_entries(mut entries: Vec<BetaEntry>, config: BetaConfig, diagnostics: BetaDiagnostics) -> Self {
        entries.sort_by(|a, b| (a.month, &a.stock_id).cmp(&(b.month, &b.stock_id)));
        let mut months = BTreeMap::new();
        let mut start = 0;
        for i in 1..=entries.len() {
            if i == entries.len() || entries[i].month != entries[start].month {
                months.insert(entries[start].month, start..i);
                start = i;
            }
        }
        BetaPanel {
            entries,
            months,
            config,
            diagnostics,
        }
    }

    pub fn entries(&self) -> &[BetaEntry] {
        &self.entries
    }

    pub fn months(&self) -> impl Iterator<Item = MonthId> + '_ {
        self.months.keys().copied()
    }

    pub fn month(&self, month: MonthId) -> &[BetaEntry] {
        self.months.get(&month).map_or(&[], |r| &self.entries[r.clone()])
    }

    /// `(stock_id, beta)` pairs for one period.
    pub fn keys(&self, month: MonthId) -> Vec<(Arc<str>, f64)> {
        self.month(month).iter().map(|e| (e.stock_id.clone(), e.beta)).collect()
    }

    pub fn get(&self, stock_id: &str, month: MonthId) -> Option<&BetaEntry> {
        let slice = self.month(month);
        slice
            .binary_search_by(|e| (*e.stock_id).cmp(stock_id))
            .ok()
            .map(|i| &slice[i])
    }

    /// `stock_id,month,beta,nobs`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stock_id,month,beta,nobs\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.stock_id, e.month, e.beta, e.nobs));
        }
        out
    }
}

enum Estimate {
    Beta(f64, usize),
    Short,
    Flat,
}

fn bivariate_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut scale) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        scale += a * a;
    }
    if sxx <= 1e-14 * scale || sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

fn estimate_window(
    returns: &[(MonthId, f64)],
    end: usize,
    innovations: &Series,
    market: Option<&Series>,
    config: &BetaConfig,
) -> Estimate {
    let span = (config.window as i64 - 1) * config.frequency.step();
    let first = returns[end].0.add_months(-span);
    let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (m, r) in returns[..=end].iter().rev().take_while(|(m, _)| *m >= first) {
        let Some(u) = innovations.get(*m) else { continue };
        if let Some(mk) = market {
            let Some(v) = mk.get(*m) else { continue };
            z.push(v);
        }
        x.push(u);
        y.push(*r);
    }
    if x.len() < config.min_obs {
        return Estimate::Short;
    }
    let n = x.len();
    let slope = match market {
        None => bivariate_slope(&x, &y),
        Some(_) => {
            let design = Design::with_intercept(n).column("innovation", x).column("market", z);
            ols(&y, &design).ok().and_then(|r| r.coefficient("innovation"))
        }
    };
    match slope {
        Some(b) => Estimate::Beta(b, n),
        None => Estimate::Flat,
    }
}

/// Estimates every stock-period beta whose trailing window holds at least
/// `min_obs` periods with both a return and an innovation.
pub fn rolling_betas(
    panel: &ReturnPanel,
    innovations: &Series,
    market: Option<&Series>,
    config: &BetaConfig,
) -> Result<BetaPanel> {
    config.validate()?;
    if config.market_control && market.is_none() {
        return Err(Error::invalid("market control requested without a market series"));
    }
    let market = if config.market_control { market } else { None };
    let obs = panel.observations();
    let stocks: Vec<(Arc<str>, Vec<usize>)> = panel.by_stock().into_iter().collect();

    let per_stock: Vec<(Vec<BetaEntry>, BetaDiagnostics)> = stocks
        .par_iter()
        .map(|(id, idx)| {
            let returns: Vec<(MonthId, f64)> = idx.iter().map(|&i| (obs[i].month, obs[i].excess_return)).collect();
            let mut entries = Vec::new();
            let mut diag = BetaDiagnostics::default();
            for end in 0..returns.len() {
                match estimate_window(&returns, end, innovations, market, config) {
                    Estimate::Beta(b, n) => {
                        diag.estimated += 1;
                        entries.push(BetaEntry {
                            stock_id: id.clone(),
                            month: returns[end].0,
                            beta: b,
                            raw_beta: b,
                            nobs: n,
                        });
                    }
                    Estimate::Short => diag.skipped_short += 1,
                    Estimate::Flat => diag.skipped_zero_variance += 1,
                }
            }
            (entries, diag)
        })
        .collect();

    let mut diagnostics = BetaDiagnostics::default();
    let mut entries = Vec::new();
    for (e, d) in per_stock {
        entries.extend(e);
        diagnostics.estimated += d.estimated;
        diagnostics.skipped_short += d.skipped_short;
        diagnostics.skipped_zero_variance += d.skipped_zero_variance;
    }
    let mut out = BetaPanel::from_entries(entries, *config, diagnostics);
    let ranges: Vec<std::ops::Range<usize>> = out.months.values().cloned().collect();
    let (lo, hi) = config.winsor;
    for r in ranges {
        let raw: Vec<f64> = out.entries[r.clone()].iter().map(|e| e.raw_beta).collect();
        let clamped = winsorize(&raw, lo, hi)?;
        for (e, b) in out.entries[r].iter_mut().zip(clamped) {
            e.beta = b;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostRankingBeta {
    pub label: String,
    pub beta: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub nobs: usize,
}

/// Full-sample slope of each portfolio's return series on the innovations.
pub fn post_ranking_betas(portfolios: &[(String, Series)], innovations: &Series) -> Result<Vec<PostRankingBeta>> {
    portfolios
        .iter()
        .map(|(label, s)| {
            let aligned: Vec<(f64, f64)> = s.iter().filter_map(|(m, r)| innovations.get(m).map(|u| (u, r))).collect();
            if aligned.len() < 3 {
                return Err(Error::insufficient(format!(
                    "portfolio `{label}` overlaps the innovations in {} periods",
                    aligned.len()
                )));
            }
            let (x, y): (Vec<f64>, Vec<f64>) = aligned.into_iter().unzip();
            let fit = ols(&y, &Design::with_intercept(x.len()).column("innovation", x))?;
            Ok(PostRankingBeta {
                label: label.clone(),
                beta: fit.coefficients[1],
                std_error: fit.std_errors[1],
                t_stat: fit.t_stats[1],
                nobs: fit.nobs,
            })
        })
        .collect()
}

/// Maps stock ids to betas for quick lookups across many periods.
pub fn beta_lookup(panel: &BetaPanel) -> HashMap<(Arc<str>, MonthId), f64> {
    panel.entries.iter().map(|e| ((e.stock_id.clone(), e.month), e.beta)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::StockObservation;

    fn months(n: usize) -> Vec<MonthId> {
        let start = MonthId::from_yyyymm(199001).unwrap();
        (0..n).map(|i| start.add_months(i as i64)).collect()
    }

    fn innov(n: usize) -> Series {
        Series::new(months(n), (0..n).map(|i| ((i * 7919) % 23) as f64 / 23.0 - 0.5).collect()).unwrap()
    }

    #[test]
    fn exact_linear_stock() {
        let u = innov(40);
        let obs: Vec<_> = u
            .iter()
            .map(|(m, x)| StockObservation::new("A", m, 2.0 * x + 0.001))
            .collect();
        let panel = ReturnPanel::new(obs).unwrap();
        let cfg = BetaConfig {
            winsor: (0.0, 1.0),
            ..BetaConfig::default()
        };
        let b = rolling_betas(&panel, &u, None, &cfg).unwrap();
        assert_eq!(b.entries().len(), 40 - 17);
        assert_eq!(b.diagnostics.skipped_short, 17);
        for e in b.entries() {
            assert!((e.beta - 2.0).abs() < 1e-12);
        }
        assert_eq!(b.entries().last().unwrap().nobs, 24);
    }

    #[test]
    fn zero_variance_window_skipped() {
        let ms = months(30);
        let u = Series::new(ms.clone(), vec![0.3; 30]).unwrap();
        let obs: Vec<_> = ms.iter().map(|m| StockObservation::new("A", *m, 0.01)).collect();
        let b = rolling_betas(&ReturnPanel::new(obs).unwrap(), &u, None, &BetaConfig::default()).unwrap();
        assert!(b.entries().is_empty());
        assert_eq!(b.diagnostics.skipped_zero_variance, 13);
    }

    #[test]
    fn gaps_count_against_min_obs() {
        let u = innov(30);
        // Stock missing every third month: 24-month windows hold 16 returns.
        let obs: Vec<_> = u
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 3 != 0)
            .map(|(_, (m, x))| StockObservation::new("A", m, x))
            .collect();
        let b = rolling_betas(&ReturnPanel::new(obs).unwrap(), &u, None, &BetaConfig::default()).unwrap();
        assert!(b.entries().is_empty());
    }

    #[test]
    fn market_control_recovers_partial_slope() {
        let u = innov(36);
        let mkt = Series::new(months(36), (0..36).map(|i| ((i * 31) % 11) as f64 / 11.0).collect()).unwrap();
        let obs: Vec<_> = u
            .iter()
            .map(|(m, x)| StockObservation::new("A", m, -1.5 * x + 0.7 * mkt.get(m).unwrap()))
            .collect();
        let cfg = BetaConfig {
            market_control: true,
            winsor: (0.0, 1.0),
            ..BetaConfig::default()
        };
        let b = rolling_betas(&ReturnPanel::new(obs).unwrap(), &u, Some(&mkt), &cfg).unwrap();
        assert!(b.entries().iter().all(|e| (e.beta + 1.5).abs() < 1e-10));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = BetaConfig {
            window: 12,
            min_obs: 18,
            ..BetaConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn post_ranking_unit_beta() {
        let u = innov(50);
        let out = post_ranking_betas(&[("Q1".into(), u.clone())], &u).unwrap();
        assert!((out[0].beta - 1.0).abs() < 1e-12);
    }
}
