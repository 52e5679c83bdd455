//! Synthetic economies with planted ground truth.
//!
//! A latent dispersion level follows `D_t = mu + phi (D_{t-1} - mu) + u_t`.
//! Each month half the industries sit `D_t` above the market and half below,
//! so measured CID tracks `D_t` and its innovations track `u_t`. Stock returns
//! are
//!
//! ```text
//! r_it = -lambda b_i + b_i u_t + m_i MKT_t + s_i SMB_t + h_i HML_t + sign_jt D_t + e_it
//! ```
//!
//! with `b_i ~ N(beta_mean, beta_sd)`. Market caps follow their own random
//! walk, independent of returns, so value weights carry no information about
//! `b_i`.

mod rng;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub use rng::{mix64, SplitMix64};

use crate::panel::{FactorTable, Frequency, IndustryScheme, MacroSeries, MonthId, SicRange, StockObservation};
use crate::{Error, Result, ReturnPanel, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_stocks: usize,
    pub n_industries: usize,
    pub n_months: usize,
    pub seed: u64,
    pub start: MonthId,
    /// Expected monthly return lost per unit of dispersion beta.
    pub planted_lambda: f64,
    /// `(mean, sd)` of true dispersion betas.
    pub beta_distribution: (f64, f64),
    pub idio_vol: f64,
    pub dispersion_mean: f64,
    pub dispersion_persistence: f64,
    pub dispersion_shock_vol: f64,
    pub market_mean: f64,
    pub market_vol: f64,
    /// Volatility of SMB, HML, RMW, CMA, MOM, STR in that order.
    pub factor_vols: [f64; 6],
    pub risk_free: f64,
    /// Quarterly long-term unemployment growth per unit of lagged summed shock.
    pub reallocation_intensity: f64,
    /// Quarterly short-term unemployment growth per unit of lagged market return.
    pub aggregate_sensitivity: f64,
    pub macro_noise: f64,
    /// Quarters between a shock and the unemployment response.
    pub employment_response_lag: usize,
    /// Industry employment response to negative and positive lagged excess
    /// industry returns.
    pub employment_response: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_stocks: 2000,
            n_industries: 10,
            n_months: 600,
            seed: 20190101,
            start: MonthId::from_yyyymm(196301).expect("valid month"),
            planted_lambda: 0.001,
            beta_distribution: (0.0, 1.5),
            idio_vol: 0.06,
            dispersion_mean: 0.04,
            dispersion_persistence: 0.5,
            dispersion_shock_vol: 0.01,
            market_mean: 0.005,
            market_vol: 0.045,
            factor_vols: [0.03, 0.03, 0.02, 0.02, 0.04, 0.03],
            risk_free: 0.003,
            reallocation_intensity: 4.0,
            aggregate_sensitivity: -2.0,
            macro_noise: 0.15,
            employment_response_lag: 1,
            employment_response: (0.05, 0.0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stocks == 0 || self.n_industries == 0 || self.n_months == 0 {
            return Err(Error::invalid("synthetic counts must be positive"));
        }
        if self.n_industries > 8000 {
            return Err(Error::invalid("at most 8000 synthetic industries fit in the SIC range"));
        }
        if !(0.0..1.0).contains(&self.dispersion_persistence.abs()) {
            return Err(Error::invalid("dispersion persistence must lie in (-1, 1)"));
        }
        if self.beta_distribution.1 < 0.0 || self.idio_vol < 0.0 || self.dispersion_shock_vol < 0.0 {
            return Err(Error::invalid("volatilities must be non-negative"));
        }
        if self.employment_response_lag == 0 {
            return Err(Error::invalid("employment response lag must be at least one quarter"));
        }
        Ok(())
    }

    fn months(&self) -> Vec<MonthId> {
        (0..self.n_months).map(|i| self.start.add_months(i as i64)).collect()
    }
}

// Stream ids keep each component reproducible on its own.
const STREAM_LATENT: u64 = 1;
const STREAM_FACTORS: u64 = 2;
const STREAM_STOCKS: u64 = 3;
const STREAM_SIGNS: u64 = 4;
const STREAM_NOISE: u64 = 5;
const STREAM_CAPS: u64 = 6;
const STREAM_MACRO: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockTruth {
    pub stock_id: Arc<str>,
    pub industry: u32,
    pub beta: f64,
    pub market_loading: f64,
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub panel: ReturnPanel,
    pub factors: FactorTable,
    pub scheme: IndustryScheme,
    pub stocks: Vec<StockTruth>,
    /// Latent dispersion level `D_t`.
    pub latent: Series,
    /// True innovations `u_t`.
    pub shocks: Series,
    /// Months where `D_t` hit the positivity floor.
    pub clamped: usize,
}

fn normals(g: &mut SplitMix64, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..n).map(|_| mean + sd * g.normal()).collect()
}

/// Builds a full synthetic panel. The market factor is the realised
/// value-weighted panel return, so dispersion measured against `MKT_RF`
/// matches the panel it came from.
pub fn generate_panel(config: &SynthConfig) -> Result<SynthPanel> {
    config.validate()?;
    let months = config.months();
    let (t_n, n, k) = (config.n_months, config.n_stocks, config.n_industries);

    let mut g = SplitMix64::stream(config.seed, STREAM_LATENT);
    let (mu, phi, su) = (config.dispersion_mean, config.dispersion_persistence, config.dispersion_shock_vol);
    let floor = 0.1 * mu.abs();
    let mut d_prev = mu + su / (1.0 - phi * phi).sqrt() * g.normal();
    let (mut latent, mut shocks, mut clamped) = (Vec::with_capacity(t_n), Vec::with_capacity(t_n), 0);
    for _ in 0..t_n {
        let u = su * g.normal();
        let mut d = mu + phi * (d_prev - mu) + u;
        if d < floor {
            d = floor;
            clamped += 1;
        }
        latent.push(d);
        shocks.push(u);
        d_prev = d;
    }

    let mut g = SplitMix64::stream(config.seed, STREAM_FACTORS);
    let mkt_shock = normals(&mut g, t_n, config.market_mean, config.market_vol);
    let others: Vec<Vec<f64>> = config.factor_vols.iter().map(|v| normals(&mut g, t_n, 0.0, *v)).collect();
    let rf: Vec<f64> = (0..t_n).map(|_| config.risk_free * (1.0 + 0.1 * g.normal()).max(0.0)).collect();

    let mut g = SplitMix64::stream(config.seed, STREAM_STOCKS);
    let (bm, bsd) = config.beta_distribution;
    let width = 8000 / k as u32;
    let stocks: Vec<StockTruth> = (0..n)
        .map(|i| StockTruth {
            stock_id: Arc::from(format!("S{i:05}").as_str()),
            industry: (i % k) as u32 + 1,
            beta: bm + bsd * g.normal(),
            market_loading: 1.0 + 0.3 * g.normal(),
        })
        .collect();
    let smb_h: Vec<(f64, f64)> = (0..n).map(|_| (0.3 * g.normal(), 0.3 * g.normal())).collect();
    let sics: Vec<u16> = stocks
        .iter()
        .map(|s| (1000 + (s.industry - 1) * width + g.below(width as u64) as u32) as u16)
        .collect();

    let mut g = SplitMix64::stream(config.seed, STREAM_SIGNS);
    let signs: Vec<Vec<f64>> = (0..t_n)
        .map(|_| {
            let mut s: Vec<f64> = (0..k).map(|j| if j < k / 2 { 1.0 } else { -1.0 }).collect();
            if k % 2 == 1 {
                s[k - 1] = if g.below(2) == 0 { 1.0 } else { -1.0 };
            }
            g.shuffle(&mut s);
            s
        })
        .collect();

    let mut g = SplitMix64::stream(config.seed, STREAM_CAPS);
    let mut caps: Vec<f64> = (0..n).map(|_| (5.0 + 0.6 * g.normal()).exp()).collect();
    let prices0: Vec<f64> = (0..n).map(|_| 10.0 + 50.0 * g.uniform()).collect();
    let cap0 = caps.clone();

    let mut noise = SplitMix64::stream(config.seed, STREAM_NOISE);
    let mut obs = Vec::with_capacity(n * t_n);
    let mut mkt_rf = Vec::with_capacity(t_n);
    let mut prev_caps = caps.clone();
    for t in 0..t_n {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let s = &stocks[i];
            let r = -config.planted_lambda * s.beta
                + s.beta * shocks[t]
                + s.market_loading * mkt_shock[t]
                + smb_h[i].0 * others[0][t]
                + smb_h[i].1 * others[1][t]
                + signs[t][(s.industry - 1) as usize] * latent[t]
                + config.idio_vol * noise.normal();
            if t > 0 {
                num += prev_caps[i] * r;
                den += prev_caps[i];
            }
            caps[i] *= (0.05 * g.normal() - 0.00125).exp();
            obs.push(
                StockObservation::new(&s.stock_id, months[t], r)
                    .with_cap(caps[i])
                    .with_price(prices0[i] * caps[i] / cap0[i])
                    .with_sic(sics[i]),
            );
        }
        // No prior caps exist in the first month; fall back to the latent shock.
        mkt_rf.push(if den > 0.0 { num / den } else { mkt_shock[t] });
        prev_caps.clone_from(&caps);
    }
    let panel = ReturnPanel::new(obs)?;

    let mut names: Vec<String> = vec!["MKT_RF".into()];
    names.extend(["SMB", "HML", "RMW", "CMA", "MOM", "STR"].map(String::from));
    names.push("RF".into());
    let mut columns = vec![mkt_rf];
    columns.extend(others);
    columns.push(rf);
    let factors = FactorTable::new(months.clone(), names, columns)?;

    let ranges = (0..k as u32)
        .map(|j| SicRange {
            low: (1000 + j * width) as u16,
            high: (1000 + (j + 1) * width - 1) as u16,
            code: j + 1,
            name: format!("Ind{}", j + 1),
        })
        .collect();
    let scheme = IndustryScheme::from_ranges("SYNTH", ranges)?;

    Ok(SynthPanel {
        panel,
        factors,
        scheme,
        stocks,
        latent: Series::new(months.clone(), latent)?,
        shocks: Series::new(months, shocks)?,
        clamped,
    })
}

/// Expected `Q_high - Q_low` spread in true betas when stocks are sorted into
/// `groups` equal-count groups on a noisy estimate with reliability `rho`
/// (correlation between true and estimated beta).
pub fn expected_beta_spread(beta_sd: f64, rho: f64, groups: usize) -> f64 {
    let p = 1.0 / groups as f64;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let z = std.inverse_cdf(1.0 - p);
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * rho * beta_sd * density / p
}

/// Reliability of a `window`-month slope estimate of the dispersion beta,
/// treating measured innovations as the true shocks.
pub fn beta_reliability(config: &SynthConfig, window: usize) -> f64 {
    let (_, bsd) = config.beta_distribution;
    let [smb, hml, ..] = config.factor_vols;
    let latent_var = config.dispersion_shock_vol.powi(2) / (1.0 - config.dispersion_persistence.powi(2));
    let resid_var = config.idio_vol.powi(2)
        + (1.0 + 0.09) * config.market_vol.powi(2)
        + 0.09 * (smb * smb + hml * hml)
        + config.dispersion_mean.powi(2)
        + latent_var;
    let noise_var = resid_var / (config.dispersion_shock_vol.powi(2) * (window as f64 - 3.0));
    if bsd == 0.0 {
        return 0.0;
    }
    bsd / (bsd * bsd + noise_var).sqrt()
}

/// Closed-form expected mean of the high-minus-low portfolio sorted on
/// `window`-month betas into `groups` groups.
pub fn expected_long_short(config: &SynthConfig, window: usize, groups: usize) -> f64 {
    -config.planted_lambda * expected_beta_spread(config.beta_distribution.1, beta_reliability(config, window), groups)
}

#[derive(Debug, Clone, Serialize)]
pub struct MacroTruth {
    pub reallocation_intensity: f64,
    pub aggregate_sensitivity: f64,
    pub response_lag: usize,
    pub employment_response: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SynthMacro {
    pub total: MacroSeries,
    pub long_term: MacroSeries,
    pub short_term: MacroSeries,
    /// Quarterly industry employment growth keyed by industry code.
    pub employment: Vec<(u32, MacroSeries)>,
    pub truth: MacroTruth,
}

fn quarter_sums(monthly: &Series) -> Vec<(MonthId, f64)> {
    monthly
        .iter()
        .filter(|(m, _)| m.is_quarter_end())
        .filter_map(|(q, _)| {
            let v: Option<Vec<f64>> = (0..3).map(|k| monthly.get(q.add_months(-k))).collect();
            v.map(|v| (q, v.iter().sum()))
        })
        .collect()
}

/// Quarterly unemployment in levels (percentage points): long-term growth
/// loads on the lagged quarterly sum of `shocks`, short-term growth on the
/// lagged quarterly market return. Industry employment growth responds to
/// the lagged quarterly excess industry return with separate slopes for
/// falls and rises.
pub fn generate_macro(
    config: &SynthConfig,
    shocks: &Series,
    market: &Series,
    industry_excess: &[(u32, Series)],
) -> Result<SynthMacro> {
    config.validate()?;
    let mut g = SplitMix64::stream(config.seed, STREAM_MACRO);
    let x = quarter_sums(shocks);
    let mk = Series::from_pairs(quarter_sums(market))?;
    let lag = config.employment_response_lag as i64 * 3;
    let (mut lt, mut st) = (Vec::new(), Vec::new());
    let (mut lt_level, mut st_level) = (2.0, 3.0);
    for (q, _) in &x {
        let prev = q.add_months(-lag);
        let Some(x_lag) = x.iter().find(|(m, _)| *m == prev).map(|p| p.1) else { continue };
        let Some(m_lag) = mk.get(prev) else { continue };
        // Levels revert slowly so the differencing filter has a level term to absorb.
        lt_level += 0.1 * (2.0 - lt_level) + config.reallocation_intensity * x_lag + config.macro_noise * g.normal();
        st_level += 0.1 * (3.0 - st_level) + config.aggregate_sensitivity * m_lag + config.macro_noise * g.normal();
        lt.push((*q, lt_level));
        st.push((*q, st_level));
    }
    let total: Vec<(MonthId, f64)> = lt.iter().zip(&st).map(|(a, b)| (a.0, a.1 + b.1)).collect();
    let (neg, pos) = config.employment_response;
    let mut employment = Vec::new();
    for (code, ret) in industry_excess {
        let r = Series::from_pairs(quarter_sums(ret))?;
        let pairs: Vec<(MonthId, f64)> = r
            .iter()
            .filter_map(|(q, _)| {
                let lagged = r.get(q.add_months(-lag))?;
                let slope = if lagged < 0.0 { neg } else { pos };
                Some((q, slope * lagged + 0.01 * g.normal()))
            })
            .collect();
        employment.push((
            *code,
            MacroSeries::new(&format!("employment_{code}"), Frequency::Quarterly, Series::from_pairs(pairs)?)?,
        ));
    }
    let q = |label: &str, p: Vec<(MonthId, f64)>| MacroSeries::new(label, Frequency::Quarterly, Series::from_pairs(p)?);
    Ok(SynthMacro {
        total: q("unemployment", total)?,
        long_term: q("lt_unemployment", lt)?,
        short_term: q("st_unemployment", st)?,
        employment,
        truth: MacroTruth {
            reallocation_intensity: config.reallocation_intensity,
            aggregate_sensitivity: config.aggregate_sensitivity,
            response_lag: config.employment_response_lag,
            employment_response: config.employment_response,
        },
    })
}

/// Monthly price index growing at a constant rate, for the size screen.
pub fn generate_deflator(config: &SynthConfig, monthly_growth: f64) -> Result<MacroSeries> {
    let months = config.months();
    let values = (0..months.len()).map(|i| 100.0 * (1.0 + monthly_growth).powi(i as i32)).collect();
    MacroSeries::new("deflator", Frequency::Monthly, Series::new(months, values)?)
}
