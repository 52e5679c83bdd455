//! Cross-industry (CID), within-industry (WID) and cross-sectional (CSD)
//! dispersion of monthly returns.
//!
//! For a month with `N` industries passing the minimum-firm filter, industry
//! `j` holding `M_j` stocks with value-weighted return `R_j` and market
//! return `R_m`:
//!
//! ```text
//! CID = 1/N Σ_j |R_j - R_m|
//! WID = 1/N Σ_j 1/M_j Σ_i |R_i - R_j|
//! CSD = 1/N Σ_j 1/M_j Σ_i |R_i - R_m|      (nested weighting)
//! ```
//!
//! Nested weighting makes `CSD <= CID + WID` hold term by term.
//! Industry weights are previous-month market caps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econometrics::{ols, Design};
use crate::panel::{FactorTable, MonthId, ReturnPanel};
use crate::{Error, Result, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MarketSource {
    /// `MKT_RF` column of the factor table.
    #[default]
    Factor,
    /// Value-weighted return of every panel stock with a previous-month cap.
    PanelValueWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsdWeighting {
    #[default]
    Nested,
    /// Every stock weighted equally across the cross-section.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionOptions {
    pub min_firms: usize,
    pub market: MarketSource,
    pub csd_weighting: CsdWeighting,
    /// When set, CID uses residuals of each industry's return series regressed
    /// on these factor columns (with intercept) instead of raw deviations.
    pub abnormal_model: Option<Vec<String>>,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        DispersionOptions {
            min_firms: 10,
            market: MarketSource::Factor,
            csd_weighting: CsdWeighting::Nested,
            abnormal_model: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndustryReturn {
    pub vw_return: f64,
    /// Classified stocks with a return this month.
    pub firm_count: usize,
}

struct IndustryMonth {
    vw_return: f64,
    returns: Vec<f64>,
}

fn require_classified(panel: &ReturnPanel) -> Result<()> {
    if panel.scheme().is_none() {
        return Err(Error::invalid("panel has not been classified into industries"));
    }
    Ok(())
}

fn group_month(panel: &ReturnPanel, month: MonthId) -> BTreeMap<u32, IndustryMonth> {
    let mut acc: BTreeMap<u32, (f64, f64, Vec<f64>)> = BTreeMap::new();
    for (o, cap) in panel.month_with_prior_caps(month) {
        let Some(ind) = o.industry else { continue };
        let e = acc.entry(ind).or_insert((0.0, 0.0, Vec::new()));
        if let Some(c) = cap {
            e.0 += c * o.excess_return;
            e.1 += c;
        }
        e.2.push(o.excess_return);
    }
    acc.into_iter()
        .filter(|(_, (_, w, _))| *w > 0.0)
        .map(|(k, (num, den, returns))| {
            (
                k,
                IndustryMonth {
                    vw_return: num / den,
                    returns,
                },
            )
        })
        .collect()
}

/// Value-weighted industry returns for one month. Industries where no stock
/// has a previous-month cap are absent.
pub fn industry_returns(panel: &ReturnPanel, month: MonthId) -> Result<BTreeMap<u32, IndustryReturn>> {
    require_classified(panel)?;
    Ok(group_month(panel, month)
        .into_iter()
        .map(|(k, g)| {
            (
                k,
                IndustryReturn {
                    vw_return: g.vw_return,
                    firm_count: g.returns.len(),
                },
            )
        })
        .collect())
}

/// CID and the number of industries used; `None` when no industry has
/// `min_firms` stocks.
pub fn compute_cid(
    panel: &ReturnPanel,
    month: MonthId,
    min_firms: usize,
    market_return: f64,
) -> Result<Option<(f64, usize)>> {
    check_min_firms(min_firms)?;
    require_classified(panel)?;
    let groups = group_month(panel, month);
    let used: Vec<_> = groups.values().filter(|g| g.returns.len() >= min_firms).collect();
    if used.is_empty() {
        return Ok(None);
    }
    let cid = used.iter().map(|g| (g.vw_return - market_return).abs()).sum::<f64>() / used.len() as f64;
    Ok(Some((cid, used.len())))
}

pub fn compute_wid(panel: &ReturnPanel, month: MonthId, min_firms: usize) -> Result<Option<f64>> {
    check_min_firms(min_firms)?;
    require_classified(panel)?;
    let groups = group_month(panel, month);
    Ok(month_measures(&groups, min_firms, 0.0, CsdWeighting::Nested).map(|m| m.wid))
}

pub fn compute_csd(
    panel: &ReturnPanel,
    month: MonthId,
    min_firms: usize,
    market_return: f64,
    weighting: CsdWeighting,
) -> Result<Option<f64>> {
    check_min_firms(min_firms)?;
    require_classified(panel)?;
    let groups = group_month(panel, month);
    Ok(month_measures(&groups, min_firms, market_return, weighting).map(|m| m.csd))
}

fn check_min_firms(min_firms: usize) -> Result<()> {
    if min_firms == 0 {
        return Err(Error::invalid("min_firms must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct MonthMeasures {
    cid: f64,
    wid: f64,
    csd: f64,
    n: usize,
}

fn month_measures(
    groups: &BTreeMap<u32, IndustryMonth>,
    min_firms: usize,
    market: f64,
    weighting: CsdWeighting,
) -> Option<MonthMeasures> {
    let used: Vec<&IndustryMonth> = groups.values().filter(|g| g.returns.len() >= min_firms).collect();
    if used.is_empty() {
        return None;
    }
    let n = used.len() as f64;
    let mut cid = 0.0;
    let mut wid = 0.0;
    let mut csd_nested = 0.0;
    let (mut flat_sum, mut flat_count) = (0.0, 0usize);
    for g in &used {
        let m = g.returns.len() as f64;
        cid += (g.vw_return - market).abs();
        wid += g.returns.iter().map(|r| (r - g.vw_return).abs()).sum::<f64>() / m;
        let about_market: f64 = g.returns.iter().map(|r| (r - market).abs()).sum();
        csd_nested += about_market / m;
        flat_sum += about_market;
        flat_count += g.returns.len();
    }
    let csd = match weighting {
        CsdWeighting::Nested => csd_nested / n,
        CsdWeighting::Flat => flat_sum / flat_count as f64,
    };
    Some(MonthMeasures {
        cid: cid / n,
        wid: wid / n,
        csd,
        n: used.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureConfig {
    pub scheme: String,
    pub min_firms: usize,
    pub market: MarketSource,
    pub csd_weighting: CsdWeighting,
    pub abnormal_model: Option<Vec<String>>,
}

/// Monthly dispersion measures. Months with no qualifying industry are listed
/// in `missing` and absent from the measure vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSeries {
    pub months: Vec<MonthId>,
    pub cid: Vec<f64>,
    pub wid: Vec<f64>,
    pub csd: Vec<f64>,
    pub industries_used: Vec<usize>,
    pub missing: Vec<MonthId>,
    pub config: MeasureConfig,
}

impl DispersionSeries {
    pub fn cid_series(&self) -> Series {
        Series::new(self.months.clone(), self.cid.clone()).expect("dispersion months are ordered")
    }

    pub fn wid_series(&self) -> Series {
        Series::new(self.months.clone(), self.wid.clone()).expect("dispersion months are ordered")
    }

    pub fn csd_series(&self) -> Series {
        Series::new(self.months.clone(), self.csd.clone()).expect("dispersion months are ordered")
    }

    /// `month,cid,wid,csd,n_industries`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,cid,wid,csd,n_industries\n");
        for i in 0..self.months.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.months[i], self.cid[i], self.wid[i], self.csd[i], self.industries_used[i]
            ));
        }
        out
    }
}

fn market_series(
    panel: &ReturnPanel,
    factors: Option<&FactorTable>,
    source: MarketSource,
) -> Result<BTreeMap<MonthId, f64>> {
    match source {
        MarketSource::Factor => {
            let table = factors.ok_or_else(|| Error::invalid("factor market source needs a factor table"))?;
            Ok(table.column("MKT_RF")?.to_map())
        }
        MarketSource::PanelValueWeighted => Ok(panel
            .months()
            .filter_map(|m| panel.value_weighted_return(m).map(|r| (m, r)))
            .collect()),
    }
}

/// Residuals of each industry's value-weighted return series on the factor
/// model, keyed by `(industry, month)`.
fn abnormal_industry_returns(
    groups: &[(MonthId, BTreeMap<u32, IndustryMonth>)],
    factors: &FactorTable,
    model: &[String],
) -> Result<BTreeMap<(u32, MonthId), f64>> {
    let cols: Vec<&str> = model.iter().map(String::as_str).collect();
    factors.require(&cols)?;
    let mut by_industry: BTreeMap<u32, Vec<(MonthId, f64)>> = BTreeMap::new();
    for (m, g) in groups {
        for (ind, im) in g {
            by_industry.entry(*ind).or_default().push((*m, im.vw_return));
        }
    }
    let mut out = BTreeMap::new();
    for (ind, obs) in by_industry {
        let rows: Vec<(MonthId, f64)> = obs
            .into_iter()
            .filter(|(m, _)| cols.iter().all(|c| factors.value(c, *m).is_some()))
            .collect();
        if rows.len() < cols.len() + 2 {
            continue;
        }
        let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut design = Design::with_intercept(rows.len());
        for c in &cols {
            let v: Vec<f64> = rows.iter().map(|(m, _)| factors.value(c, *m).unwrap_or(0.0)).collect();
            design = design.column(c, v);
        }
        let fit = ols(&y, &design)?;
        for ((m, _), e) in rows.iter().zip(fit.residuals) {
            out.insert((ind, *m), e);
        }
    }
    Ok(out)
}

/// Applies the three measures to every month of a classified panel.
pub fn dispersion_series(
    panel: &ReturnPanel,
    factors: Option<&FactorTable>,
    options: &DispersionOptions,
) -> Result<DispersionSeries> {
    check_min_firms(options.min_firms)?;
    require_classified(panel)?;
    let market = market_series(panel, factors, options.market)?;
    let months: Vec<MonthId> = panel.months().collect();
    let groups: Vec<(MonthId, BTreeMap<u32, IndustryMonth>)> = months
        .par_iter()
        .map(|m| (*m, group_month(panel, *m)))
        .collect();
    let abnormal = match &options.abnormal_model {
        Some(model) => {
            let table = factors.ok_or_else(|| Error::invalid("abnormal mode needs a factor table"))?;
            Some(abnormal_industry_returns(&groups, table, model)?)
        }
        None => None,
    };

    let per_month: Vec<(MonthId, Option<MonthMeasures>)> = groups
        .par_iter()
        .map(|(m, g)| {
            let Some(mkt) = market.get(m) else {
                return (*m, None);
            };
            let mut measures = month_measures(g, options.min_firms, *mkt, options.csd_weighting);
            if let (Some(ab), Some(meas)) = (&abnormal, measures.as_mut()) {
                let devs: Vec<f64> = g
                    .iter()
                    .filter(|(_, im)| im.returns.len() >= options.min_firms)
                    .filter_map(|(ind, _)| ab.get(&(*ind, *m)).map(|e| e.abs()))
                    .collect();
                if devs.is_empty() {
                    return (*m, None);
                }
                meas.cid = devs.iter().sum::<f64>() / devs.len() as f64;
            }
            (*m, measures)
        })
        .collect();

    let mut out = DispersionSeries {
        months: Vec::new(),
        cid: Vec::new(),
        wid: Vec::new(),
        csd: Vec::new(),
        industries_used: Vec::new(),
        missing: Vec::new(),
        config: MeasureConfig {
            scheme: panel.scheme().unwrap_or_default().to_string(),
            min_firms: options.min_firms,
            market: options.market,
            csd_weighting: options.csd_weighting,
            abnormal_model: options.abnormal_model.clone(),
        },
    };
    for (m, meas) in per_month {
        match meas {
            Some(x) => {
                out.months.push(m);
                out.cid.push(x.cid);
                out.wid.push(x.wid);
                out.csd.push(x.csd);
                out.industries_used.push(x.n);
            }
            None => out.missing.push(m),
        }
    }
    Ok(out)
}
