use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::assign::SortResult;
use crate::econometrics::std_dev;
use crate::panel::{MonthId, ReturnPanel};
use crate::{Error, Result};

/// Characteristics measured at the formation month `m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Characteristic {
    /// Log market cap at `m`.
    Size,
    /// The sort key itself.
    PreBeta,
    /// Compounded return over `m-11..=m-1`; needs 8 of the 11 months.
    Momentum12_2,
    /// Standard deviation of returns over `m-11..=m`; needs 8 of 12 months.
    Volatility12m,
    /// Supplied values keyed by `(stock_id, month)`.
    External(String, HashMap<(Arc<str>, MonthId), f64>),
}

impl Characteristic {
    pub fn name(&self) -> &str {
        match self {
            Characteristic::Size => "size",
            Characteristic::PreBeta => "prebeta",
            Characteristic::Momentum12_2 => "mom12_2",
            Characteristic::Volatility12m => "vol12m",
            Characteristic::External(name, _) => name,
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Ok(match name {
            "size" => Characteristic::Size,
            "prebeta" => Characteristic::PreBeta,
            "mom12_2" => Characteristic::Momentum12_2,
            "vol12m" => Characteristic::Volatility12m,
            other => return Err(Error::invalid(format!("unknown characteristic `{other}`"))),
        })
    }
}

/// Time-series averages of per-month cross-sectional group means.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicsTable {
    pub names: Vec<String>,
    pub groups: usize,
    /// `values[c][q]`; `None` when no month had a defined mean.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CharacteristicsTable {
    /// One row per characteristic, one column per group.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("characteristic");
        for q in 1..=self.groups {
            out.push_str(&format!(",Q{q}"));
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.values) {
            out.push_str(name);
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

struct History {
    by_stock: BTreeMap<Arc<str>, Vec<(MonthId, f64, Option<f64>)>>,
}

impl History {
    fn window(&self, id: &str, from: MonthId, to: MonthId) -> Vec<f64> {
        let Some(h) = self.by_stock.get(id) else { return Vec::new() };
        let lo = h.partition_point(|x| x.0 < from);
        h[lo..].iter().take_while(|x| x.0 <= to).map(|x| x.1).collect()
    }

    fn cap(&self, id: &str, m: MonthId) -> Option<f64> {
        let h = self.by_stock.get(id)?;
        let i = h.binary_search_by(|x| x.0.cmp(&m)).ok()?;
        h[i].2
    }
}

fn value(c: &Characteristic, hist: &History, id: &Arc<str>, m: MonthId, key: f64) -> Option<f64> {
    match c {
        Characteristic::Size => hist.cap(id, m).map(f64::ln),
        Characteristic::PreBeta => Some(key),
        Characteristic::Momentum12_2 => {
            let w = hist.window(id, m.add_months(-11), m.add_months(-1));
            (w.len() >= 8).then(|| w.iter().map(|r| 1.0 + r).product::<f64>() - 1.0)
        }
        Characteristic::Volatility12m => {
            let w = hist.window(id, m.add_months(-11), m);
            if w.len() >= 8 {
                std_dev(&w)
            } else {
                None
            }
        }
        Characteristic::External(_, map) => map.get(&(id.clone(), m)).copied(),
    }
}

impl History {
    fn new(panel: &ReturnPanel) -> Self {
        let mut by_stock: BTreeMap<Arc<str>, Vec<(MonthId, f64, Option<f64>)>> = BTreeMap::new();
        for o in panel.observations() {
            by_stock
                .entry(o.stock_id.clone())
                .or_default()
                .push((o.month, o.excess_return, o.market_cap));
        }
        History { by_stock }
    }
}

/// Per-stock values of `c` for every `(stock, month)` in `keys`, keeping the
/// key order; stocks where `c` is undefined are left out.
pub fn characteristic_keys(
    panel: &ReturnPanel,
    keys: &BTreeMap<MonthId, Vec<(Arc<str>, f64)>>,
    c: &Characteristic,
) -> BTreeMap<MonthId, Vec<(Arc<str>, f64)>> {
    let hist = History::new(panel);
    keys.iter()
        .map(|(m, ks)| {
            let v = ks
                .iter()
                .filter_map(|(id, k)| value(c, &hist, id, *m, *k).map(|v| (id.clone(), v)))
                .collect();
            (*m, v)
        })
        .collect()
}

pub fn characteristics(panel: &ReturnPanel, sort: &SortResult, chars: &[Characteristic]) -> CharacteristicsTable {
    let hist = History::new(panel);
    let q = sort.groups;
    let mut sums = vec![vec![(0.0, 0usize); q]; chars.len()];
    for (m, assignments) in &sort.assignments {
        for (ci, c) in chars.iter().enumerate() {
            let mut cs = vec![(0.0, 0usize); q];
            for a in assignments {
                if let Some(v) = value(c, &hist, &a.stock_id, *m, a.key) {
                    cs[a.quantile - 1].0 += v;
                    cs[a.quantile - 1].1 += 1;
                }
            }
            for (g, (s, n)) in cs.into_iter().enumerate() {
                if n > 0 {
                    sums[ci][g].0 += s / n as f64;
                    sums[ci][g].1 += 1;
                }
            }
        }
    }
    CharacteristicsTable {
        names: chars.iter().map(|c| c.name().to_string()).collect(),
        groups: q,
        values: sums
            .into_iter()
            .map(|row| row.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{sort_by_month, Breakpoints};
    use crate::StockObservation;

    fn m(v: u32) -> MonthId {
        MonthId::from_yyyymm(v).unwrap()
    }

    #[test]
    fn constant_and_key_characteristics() {
        let mut obs = Vec::new();
        let mut keys = BTreeMap::new();
        for month in [m(200001), m(200002)] {
            let mut k = Vec::new();
            for i in 0..10 {
                let id = format!("S{i}");
                obs.push(StockObservation::new(&id, month, 0.0).with_cap(5.0));
                k.push((Arc::from(id.as_str()), i as f64));
            }
            keys.insert(month, k);
        }
        let panel = ReturnPanel::new(obs).unwrap();
        let sort = sort_by_month(&keys, 5, &Breakpoints::EqualCount).unwrap();
        let t = characteristics(&panel, &sort, &[Characteristic::Size, Characteristic::PreBeta]);
        assert!(t.values[0].iter().all(|v| (v.unwrap() - 5f64.ln()).abs() < 1e-15));
        let pre: Vec<f64> = t.values[1].iter().map(|v| v.unwrap()).collect();
        assert_eq!(pre, vec![0.5, 2.5, 4.5, 6.5, 8.5]);
        assert!(t.to_csv().starts_with("characteristic,Q1,Q2,Q3,Q4,Q5\nsize,"));
        let size = characteristic_keys(&panel, &keys, &Characteristic::Size);
        assert_eq!(size[&m(200002)].len(), 10);
        let mom = characteristic_keys(&panel, &keys, &Characteristic::Momentum12_2);
        assert!(mom.values().all(Vec::is_empty));
    }
}
