//! Data model, ingestion, sample screens and industry classification.

mod factors;
mod industry;
mod io;
mod month;
mod screens;

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use factors::{
    load_factors, load_industry_series, load_macro, write_factors, write_industry_series, write_macro, FactorTable, Frequency, MacroSeries,
    FACTOR_COLUMNS,
};
pub use industry::{classify, load_scheme, write_scheme, IndustryScheme, SchemeKind, SicRange};
pub use io::{load_panel, write_panel, PANEL_HEADER};
pub use month::MonthId;
pub use screens::{apply_screens, ScreenConfig};

use crate::{Error, Result};

/// One stock in one month. Returns are monthly decimal fractions in excess of
/// the risk-free rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockObservation {
    pub stock_id: Arc<str>,
    pub month: MonthId,
    pub excess_return: f64,
    pub market_cap: Option<f64>,
    pub price: Option<f64>,
    pub sic: Option<u16>,
    /// Set by [`classify`]; `None` means unclassified.
    pub industry: Option<u32>,
}

impl StockObservation {
    pub fn new(stock_id: &str, month: MonthId, excess_return: f64) -> Self {
        StockObservation {
            stock_id: Arc::from(stock_id),
            month,
            excess_return,
            market_cap: None,
            price: None,
            sic: None,
            industry: None,
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.market_cap = Some(cap);
        self
    }

    pub fn with_price(mut self, price: f64) -> Self {
        self.price = Some(price);
        self
    }

    pub fn with_sic(mut self, sic: u16) -> Self {
        self.sic = Some(sic);
        self
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.excess_return.is_finite() {
            return Err("excess_return is not finite".into());
        }
        match self.market_cap {
            Some(c) if !(c.is_finite() && c > 0.0) => {
                return Err(format!("market_cap must be positive, got {c}"))
            }
            _ => {}
        }
        match self.price {
            Some(p) if !(p.is_finite() && p > 0.0) => {
                return Err(format!("price must be positive, got {p}"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Stock-month panel sorted by `(month, stock_id)`.
///
/// Each observation carries the stock's market cap from the previous calendar
/// month (when observed), which is what value weights use.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    observations: Vec<StockObservation>,
    prior_caps: Vec<Option<f64>>,
    months: BTreeMap<MonthId, Range<usize>>,
    scheme: Option<String>,
}

impl ReturnPanel {
    pub fn new(mut observations: Vec<StockObservation>) -> Result<Self> {
        for o in &observations {
            o.validate()
                .map_err(|e| Error::invalid(format!("{} {}: {e}", o.stock_id, o.month)))?;
        }
        observations.sort_by(|a, b| (a.month, &a.stock_id).cmp(&(b.month, &b.stock_id)));
        if let Some(w) = observations
            .windows(2)
            .find(|w| w[0].month == w[1].month && w[0].stock_id == w[1].stock_id)
        {
            return Err(Error::invalid(format!(
                "duplicate observation for stock `{}` in {}",
                w[0].stock_id, w[0].month
            )));
        }
        let prior_caps = compute_prior_caps(&observations);
        Ok(Self::assemble(observations, prior_caps, None))
    }

    fn assemble(
        observations: Vec<StockObservation>,
        prior_caps: Vec<Option<f64>>,
        scheme: Option<String>,
    ) -> Self {
        let mut months = BTreeMap::new();
        let mut start = 0;
        for i in 1..=observations.len() {
            if i == observations.len() || observations[i].month != observations[start].month {
                months.insert(observations[start].month, start..i);
                start = i;
            }
        }
        ReturnPanel {
            observations,
            prior_caps,
            months,
            scheme,
        }
    }

    pub fn observations(&self) -> &[StockObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// First and last month, or `None` for an empty panel.
    pub fn month_range(&self) -> Option<(MonthId, MonthId)> {
        Some((*self.months.keys().next()?, *self.months.keys().next_back()?))
    }

    pub fn months(&self) -> impl Iterator<Item = MonthId> + '_ {
        self.months.keys().copied()
    }

    /// Name of the scheme used by the last [`classify`] call.
    pub fn scheme(&self) -> Option<&str> {
        self.scheme.as_deref()
    }

    pub fn month(&self, month: MonthId) -> &[StockObservation] {
        match self.months.get(&month) {
            Some(r) => &self.observations[r.clone()],
            None => &[],
        }
    }

    /// Observations of `month` paired with their previous-month market cap.
    pub fn month_with_prior_caps(
        &self,
        month: MonthId,
    ) -> impl Iterator<Item = (&StockObservation, Option<f64>)> + '_ {
        let range = self.months.get(&month).cloned().unwrap_or(0..0);
        self.observations[range.clone()]
            .iter()
            .zip(self.prior_caps[range].iter().copied())
    }

    pub fn prior_cap(&self, index: usize) -> Option<f64> {
        self.prior_caps[index]
    }

    /// Observation indices per stock, in month order.
    pub fn by_stock(&self) -> BTreeMap<Arc<str>, Vec<usize>> {
        let mut map: BTreeMap<Arc<str>, Vec<usize>> = BTreeMap::new();
        for (i, o) in self.observations.iter().enumerate() {
            map.entry(o.stock_id.clone()).or_default().push(i);
        }
        map
    }

    /// `(stock, month) -> observation index` lookup.
    pub fn index(&self) -> HashMap<(Arc<str>, MonthId), usize> {
        self.observations
            .iter()
            .enumerate()
            .map(|(i, o)| ((o.stock_id.clone(), o.month), i))
            .collect()
    }

    /// Keeps observations matching `keep`; previous-month caps are carried over
    /// from the unfiltered panel.
    pub fn retain(&self, mut keep: impl FnMut(&StockObservation) -> bool) -> ReturnPanel {
        let (obs, caps) = self
            .observations
            .iter()
            .zip(&self.prior_caps)
            .filter(|(o, _)| keep(o))
            .map(|(o, c)| (o.clone(), *c))
            .unzip();
        Self::assemble(obs, caps, self.scheme.clone())
    }

    pub(crate) fn with_industries(&self, industries: Vec<Option<u32>>, scheme: &str) -> Self {
        let mut obs = self.observations.clone();
        for (o, ind) in obs.iter_mut().zip(industries) {
            o.industry = ind;
        }
        Self::assemble(obs, self.prior_caps.clone(), Some(scheme.to_string()))
    }

    /// Maps every return through `f` (month, return) keeping caps and industries.
    pub fn map_returns(&self, f: impl Fn(MonthId, f64) -> f64) -> Result<Self> {
        let mut obs = self.observations.clone();
        for o in obs.iter_mut() {
            o.excess_return = f(o.month, o.excess_return);
            if !o.excess_return.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite return for {} {}",
                    o.stock_id, o.month
                )));
            }
        }
        Ok(Self::assemble(obs, self.prior_caps.clone(), self.scheme.clone()))
    }

    /// Converts a raw-return panel to excess returns using the `RF` column.
    pub fn to_excess(&self, factors: &FactorTable) -> Result<Self> {
        let rf = factors.column("RF")?;
        for m in self.months() {
            if rf.get(m).is_none() {
                return Err(Error::Misaligned(format!("RF missing for {m}")));
            }
        }
        self.map_returns(|m, r| r - rf.get(m).unwrap_or(0.0))
    }

    /// Value-weighted return of all stocks with a previous-month cap.
    pub fn value_weighted_return(&self, month: MonthId) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (o, cap) in self.month_with_prior_caps(month) {
            if let Some(c) = cap {
                num += c * o.excess_return;
                den += c;
            }
        }
        (den > 0.0).then(|| num / den)
    }
}

fn compute_prior_caps(observations: &[StockObservation]) -> Vec<Option<f64>> {
    let mut last: HashMap<&str, (MonthId, Option<f64>)> = HashMap::new();
    let mut out = Vec::with_capacity(observations.len());
    for o in observations {
        let prior = match last.get(&*o.stock_id) {
            Some((m, cap)) if m.succ() == o.month => *cap,
            _ => None,
        };
        out.push(prior);
        last.insert(&o.stock_id, (o.month, o.market_cap));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: u32) -> MonthId {
        MonthId::from_yyyymm(v).unwrap()
    }

    #[test]
    fn prior_caps_need_adjacent_month() {
        let panel = ReturnPanel::new(vec![
            StockObservation::new("A", m(200001), 0.01).with_cap(10.0),
            StockObservation::new("A", m(200002), 0.02).with_cap(11.0),
            StockObservation::new("A", m(200004), 0.03).with_cap(12.0),
            StockObservation::new("B", m(200002), 0.00),
        ])
        .unwrap();
        let caps: Vec<_> = panel
            .observations()
            .iter()
            .enumerate()
            .map(|(i, o)| (o.stock_id.to_string(), o.month, panel.prior_cap(i)))
            .collect();
        assert_eq!(caps[0].2, None);
        assert_eq!(caps[1], ("A".into(), m(200002), Some(10.0)));
        assert_eq!(caps[2].2, None);
        assert_eq!(caps[3].2, None);
    }

    #[test]
    fn rejects_duplicates_and_bad_caps() {
        let dup = ReturnPanel::new(vec![
            StockObservation::new("A", m(200001), 0.01),
            StockObservation::new("A", m(200001), 0.02),
        ]);
        assert!(dup.is_err());
        let bad = ReturnPanel::new(vec![StockObservation::new("A", m(200001), 0.01).with_cap(-1.0)]);
        assert!(bad.is_err());
    }

    #[test]
    fn retain_keeps_original_prior_caps() {
        let panel = ReturnPanel::new(vec![
            StockObservation::new("A", m(200001), 0.01).with_cap(10.0),
            StockObservation::new("A", m(200002), 0.02).with_cap(11.0),
        ])
        .unwrap();
        let later = panel.retain(|o| o.month == m(200002));
        assert_eq!(later.len(), 1);
        assert_eq!(later.prior_cap(0), Some(10.0));
    }
}
