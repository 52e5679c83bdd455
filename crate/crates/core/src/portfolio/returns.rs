use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::assign::SortResult;
use crate::panel::{MonthId, ReturnPanel};
use crate::{Error, Result, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Equal,
    #[default]
    Value,
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Weighting::Equal => "ew",
            Weighting::Value => "vw",
        })
    }
}

/// Monthly return series of one portfolio. `returns[i]` is `None` when the
/// portfolio had no eligible constituent in `months[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    pub label: String,
    pub months: Vec<MonthId>,
    pub returns: Vec<Option<f64>>,
    pub weighting: Weighting,
    pub counts: Vec<usize>,
}

impl PortfolioSeries {
    /// Non-missing months only.
    pub fn to_series(&self) -> Series {
        Series::from_pairs(
            self.months
                .iter()
                .zip(&self.returns)
                .filter_map(|(m, r)| r.map(|r| (*m, r))),
        )
        .expect("portfolio months are ordered")
    }

    pub fn mean(&self) -> Option<f64> {
        crate::econometrics::mean(self.to_series().values())
    }

    /// Mean, standard error and t-statistic of the non-missing returns.
    pub fn mean_t(&self) -> Option<(f64, f64, f64)> {
        let s = self.to_series();
        let m = crate::econometrics::mean(s.values())?;
        let sd = crate::econometrics::std_dev(s.values())?;
        let se = sd / (s.len() as f64).sqrt();
        Some((m, se, m / se))
    }

    /// Rows of `month,label,return,count`; missing returns are empty fields.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for i in 0..self.months.len() {
            let r = self.returns[i].map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", self.months[i], self.label, r, self.counts[i]));
        }
        out
    }
}

/// Weighted return over `members` in holding month `t`. Members without a
/// return in `t` drop out; under value weighting so do members without a cap
/// at `t - 1`.
pub(crate) fn cell_return(
    panel: &ReturnPanel,
    holding: MonthId,
    members: &[&Arc<str>],
    weighting: Weighting,
) -> (Option<f64>, usize) {
    let month: Vec<(&crate::StockObservation, Option<f64>)> = panel.month_with_prior_caps(holding).collect();
    let (mut num, mut den, mut count) = (0.0, 0.0, 0);
    for id in members {
        let Ok(i) = month.binary_search_by(|(o, _)| o.stock_id.as_ref().cmp(id.as_ref())) else {
            continue;
        };
        let (o, cap) = month[i];
        let w = match weighting {
            Weighting::Equal => 1.0,
            Weighting::Value => match cap {
                Some(c) => c,
                None => continue,
            },
        };
        num += w * o.excess_return;
        den += w;
        count += 1;
    }
    if count == 0 || den <= 0.0 {
        (None, 0)
    } else {
        (Some(num / den), count)
    }
}

/// One series per group, labelled `Q1..Qn`. Formation month `m` is held in
/// `m + 1`; months after the panel's last month are not reported.
pub fn portfolio_returns(panel: &ReturnPanel, sort: &SortResult, weighting: Weighting) -> Vec<PortfolioSeries> {
    let mut out: Vec<PortfolioSeries> = (1..=sort.groups)
        .map(|q| PortfolioSeries {
            label: format!("Q{q}"),
            months: Vec::new(),
            returns: Vec::new(),
            weighting,
            counts: Vec::new(),
        })
        .collect();
    let last = panel.month_range().map(|r| r.1);
    for (formation, assignments) in &sort.assignments {
        let holding = formation.succ();
        if last.is_none_or(|l| holding > l) {
            continue;
        }
        let mut members: Vec<Vec<&Arc<str>>> = vec![Vec::new(); sort.groups];
        for a in assignments {
            members[a.quantile - 1].push(&a.stock_id);
        }
        for (q, mem) in members.iter_mut().enumerate() {
            mem.sort();
            let (r, n) = cell_return(panel, holding, mem, weighting);
            out[q].months.push(holding);
            out[q].returns.push(r);
            out[q].counts.push(n);
        }
    }
    out
}

/// `high - low` over the months where both legs are present.
pub fn long_short(high: &PortfolioSeries, low: &PortfolioSeries) -> Result<PortfolioSeries> {
    if high.months != low.months {
        return Err(Error::Misaligned(format!(
            "legs `{}` and `{}` cover different months",
            high.label, low.label
        )));
    }
    Ok(PortfolioSeries {
        label: "L/S".into(),
        months: high.months.clone(),
        returns: high
            .returns
            .iter()
            .zip(&low.returns)
            .map(|(h, l)| Some(h.as_ref()? - l.as_ref()?))
            .collect(),
        weighting: high.weighting,
        counts: high.counts.iter().zip(&low.counts).map(|(a, b)| a + b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::portfolio::{sort_by_month, Breakpoints};
    use crate::StockObservation;

    fn m(v: u32) -> MonthId {
        MonthId::from_yyyymm(v).unwrap()
    }

    #[test]
    fn vw_two_stocks() {
        let panel = ReturnPanel::new(vec![
            StockObservation::new("A", m(200001), 0.0).with_cap(1.0),
            StockObservation::new("B", m(200001), 0.0).with_cap(3.0),
            StockObservation::new("A", m(200002), 0.0).with_cap(1.0),
            StockObservation::new("B", m(200002), 0.04).with_cap(3.0),
        ])
        .unwrap();
        let mut keys = BTreeMap::new();
        keys.insert(m(200001), vec![(Arc::from("A"), 1.0), (Arc::from("B"), 1.0)]);
        let sort = sort_by_month(&keys, 1, &Breakpoints::EqualCount).unwrap();
        let vw = portfolio_returns(&panel, &sort, Weighting::Value);
        assert!((vw[0].returns[0].unwrap() - 0.03).abs() < 1e-15);
        let ew = portfolio_returns(&panel, &sort, Weighting::Equal);
        assert!((ew[0].returns[0].unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(vw[0].months, vec![m(200002)]);
    }

    #[test]
    fn missing_prior_cap_drops_from_vw_only() {
        let panel = ReturnPanel::new(vec![
            StockObservation::new("A", m(200001), 0.0).with_cap(1.0),
            StockObservation::new("B", m(200001), 0.0),
            StockObservation::new("A", m(200002), 0.01).with_cap(1.0),
            StockObservation::new("B", m(200002), 0.05).with_cap(3.0),
        ])
        .unwrap();
        let mut keys = BTreeMap::new();
        keys.insert(m(200001), vec![(Arc::from("A"), 1.0), (Arc::from("B"), 2.0)]);
        let sort = sort_by_month(&keys, 1, &Breakpoints::EqualCount).unwrap();
        assert_eq!(portfolio_returns(&panel, &sort, Weighting::Value)[0].counts, vec![1]);
        assert_eq!(portfolio_returns(&panel, &sort, Weighting::Equal)[0].counts, vec![2]);
    }

    #[test]
    fn long_short_legs() {
        let mk = |label: &str, r: Vec<Option<f64>>| PortfolioSeries {
            label: label.into(),
            months: vec![m(200001), m(200002)],
            counts: vec![1; r.len()],
            returns: r,
            weighting: Weighting::Equal,
        };
        let ls = long_short(&mk("Q5", vec![Some(0.01), None]), &mk("Q1", vec![Some(0.02), Some(0.0)])).unwrap();
        assert!((ls.returns[0].unwrap() + 0.01).abs() < 1e-15);
        assert_eq!(ls.returns[1], None);
        let same = long_short(&mk("a", vec![Some(0.3), Some(0.1)]), &mk("b", vec![Some(0.3), Some(0.1)])).unwrap();
        assert!(same.returns.iter().all(|r| *r == Some(0.0)));
    }
}
