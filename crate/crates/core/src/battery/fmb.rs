use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::field;
use crate::econometrics::{mean, newey_west, ols, std_dev, Design};
use crate::panel::{MonthId, ReturnPanel};
use crate::portfolio::{PortfolioSeries, SortResult};
use crate::{Error, Result};

/// One period's cross-section: `y` regressed on named columns plus intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub month: MonthId,
    pub y: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmbReport {
    /// `const` first, then regressors.
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std_error: Vec<Option<f64>>,
    /// `None` when the coefficient series is degenerate (one period or no
    /// variation); see `degenerate`.
    pub t_stat: Vec<Option<f64>>,
    pub degenerate: Vec<bool>,
    pub series: Vec<(MonthId, Vec<f64>)>,
    pub mean_adj_r2: f64,
    pub nw_lags: Option<usize>,
    /// Months left out, with the reason.
    pub dropped: Vec<(MonthId, String)>,
}

impl FmbReport {
    pub fn periods(&self) -> usize {
        self.series.len()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `term,mean,std_error,t_stat,degenerate,periods,mean_adj_r2`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,mean,std_error,t_stat,degenerate,periods,mean_adj_r2\n");
        for i in 0..self.names.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.names[i],
                self.mean[i],
                field(self.std_error[i]),
                field(self.t_stat[i]),
                self.degenerate[i],
                self.periods(),
                self.mean_adj_r2
            ));
        }
        out
    }
}

/// Per-period cross-sectional OLS, then time-series means with
/// `t = mean / (sd / sqrt(T))`, or Newey-West when `nw_lags` is set.
pub fn fama_macbeth(sections: &[CrossSection], nw_lags: Option<usize>) -> Result<FmbReport> {
    let Some(first) = sections.first() else {
        return Err(Error::insufficient("Fama-MacBeth needs at least one cross-section"));
    };
    let regressors: Vec<String> = first.columns.iter().map(|c| c.0.clone()).collect();
    let mut series = Vec::new();
    let mut adj = Vec::new();
    let mut dropped = Vec::new();
    let mut names = Vec::new();
    for cs in sections {
        let these: Vec<&String> = cs.columns.iter().map(|c| &c.0).collect();
        if these.iter().map(|s| s.as_str()).ne(regressors.iter().map(String::as_str)) {
            return Err(Error::invalid(format!("cross-section {} has different regressors", cs.month)));
        }
        let mut d = Design::with_intercept(cs.y.len());
        for (n, v) in &cs.columns {
            if v.len() != cs.y.len() {
                return Err(Error::invalid(format!("column `{n}` length mismatch in {}", cs.month)));
            }
            d = d.column(n, v.clone());
        }
        match ols(&cs.y, &d) {
            Ok(r) => {
                names = r.names.clone();
                adj.push(r.adj_r2);
                series.push((cs.month, r.coefficients));
            }
            Err(e @ (Error::Singular(_) | Error::InsufficientData(_))) => dropped.push((cs.month, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if series.is_empty() {
        return Err(Error::insufficient(format!(
            "every cross-section was dropped ({} months)",
            dropped.len()
        )));
    }
    let k = names.len();
    let t = series.len();
    let mut out = FmbReport {
        names,
        mean: Vec::with_capacity(k),
        std_error: Vec::with_capacity(k),
        t_stat: Vec::with_capacity(k),
        degenerate: Vec::with_capacity(k),
        series,
        mean_adj_r2: mean(&adj).unwrap_or(f64::NAN),
        nw_lags,
        dropped,
    };
    for j in 0..k {
        let c: Vec<f64> = out.series.iter().map(|(_, b)| b[j]).collect();
        let m = mean(&c).unwrap_or(f64::NAN);
        let sd = std_dev(&c);
        let flat = sd.is_none_or(|s| s <= 1e-12 * m.abs().max(f64::MIN_POSITIVE));
        let se = if flat {
            None
        } else {
            match nw_lags {
                None => sd.map(|s| s / (t as f64).sqrt()),
                Some(l) if l < t => {
                    let r = ols(&c, &Design::with_intercept(t))?;
                    Some(newey_west(&r, l)?.std_errors[0])
                }
                Some(l) => {
                    return Err(Error::invalid(format!("Newey-West lags {l} not below {t} periods")));
                }
            }
        };
        out.mean.push(m);
        out.std_error.push(se);
        out.t_stat.push(se.map(|s| m / s));
        out.degenerate.push(flat);
    }
    Ok(out)
}

/// Stock-level cross-sections: the holding-month return of each stock on its
/// formation-month regressors. A stock enters only with every regressor.
pub fn stock_cross_sections(
    panel: &ReturnPanel,
    regressors: &[(&str, &BTreeMap<MonthId, Vec<(Arc<str>, f64)>>)],
) -> Vec<CrossSection> {
    let Some((_, first)) = regressors.first() else { return Vec::new() };
    let mut out = Vec::new();
    for formation in first.keys() {
        let holding = formation.succ();
        let ret: HashMap<&str, f64> = panel
            .month(holding)
            .iter()
            .map(|o| (o.stock_id.as_ref(), o.excess_return))
            .collect();
        if ret.is_empty() {
            continue;
        }
        let maps: Vec<HashMap<&str, f64>> = regressors
            .iter()
            .map(|(_, k)| k.get(formation).map_or_else(HashMap::new, |v| v.iter().map(|(id, x)| (id.as_ref(), *x)).collect()))
            .collect();
        let mut ids: Vec<&str> = maps[0].keys().copied().filter(|id| ret.contains_key(id) && maps.iter().all(|m| m.contains_key(id))).collect();
        ids.sort_unstable();
        out.push(CrossSection {
            month: holding,
            y: ids.iter().map(|id| ret[id]).collect(),
            columns: regressors
                .iter()
                .zip(&maps)
                .map(|((n, _), m)| (n.to_string(), ids.iter().map(|id| m[id]).collect()))
                .collect(),
        });
    }
    out
}

/// Portfolio-level cross-sections: each portfolio's holding-month return on
/// the mean sort key of its members at formation (`prebeta`).
pub fn portfolio_cross_sections(portfolios: &[PortfolioSeries], sort: &SortResult) -> Vec<CrossSection> {
    let mut out = Vec::new();
    for (formation, assignments) in &sort.assignments {
        let holding = formation.succ();
        let mut key_sum = vec![(0.0, 0usize); sort.groups];
        for a in assignments {
            key_sum[a.quantile - 1].0 += a.key;
            key_sum[a.quantile - 1].1 += 1;
        }
        let (mut y, mut x) = (Vec::new(), Vec::new());
        for (q, p) in portfolios.iter().enumerate().take(sort.groups) {
            let Ok(i) = p.months.binary_search(&holding) else { continue };
            if let (Some(r), (s, n)) = (p.returns[i], key_sum[q]) {
                if n > 0 {
                    y.push(r);
                    x.push(s / n as f64);
                }
            }
        }
        if !y.is_empty() {
            out.push(CrossSection {
                month: holding,
                y,
                columns: vec![("prebeta".into(), x)],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(i: i64) -> MonthId {
        MonthId::from_yyyymm(200001).unwrap().add_months(i)
    }

    fn exact(month: i64, shift: f64) -> CrossSection {
        let x: Vec<f64> = (0..8).map(|i| i as f64 + shift).collect();
        CrossSection {
            month: m(month),
            y: x.iter().map(|v| 2.0 * v).collect(),
            columns: vec![("x".into(), x)],
        }
    }

    #[test]
    fn exact_slope_is_flagged_degenerate() {
        let r = fama_macbeth(&[exact(0, 0.0), exact(1, 0.5), exact(2, 1.0)], None).unwrap();
        let j = r.index("x").unwrap();
        assert!((r.mean[j] - 2.0).abs() < 1e-12);
        assert!(r.degenerate[j]);
        assert_eq!(r.t_stat[j], None);
    }

    #[test]
    fn single_month_is_flagged() {
        let mut cs = exact(0, 0.0);
        cs.y[3] += 0.1;
        let r = fama_macbeth(&[cs.clone()], None).unwrap();
        let direct = ols(&cs.y, &Design::with_intercept(8).column("x", cs.columns[0].1.clone())).unwrap();
        assert_eq!(r.mean, direct.coefficients);
        assert!(r.degenerate.iter().all(|d| *d));
        assert!(r.t_stat.iter().all(Option::is_none));
        assert!(r.to_csv().contains(",true,1,"));
    }

    #[test]
    fn rank_deficient_month_dropped() {
        let bad = CrossSection {
            month: m(5),
            y: vec![1.0, 2.0, 3.0, 4.0],
            columns: vec![("x".into(), vec![1.0; 4])],
        };
        let mut a = exact(0, 0.0);
        a.y[0] += 0.3;
        let mut b = exact(1, 0.0);
        b.y[5] -= 0.2;
        let r = fama_macbeth(&[a, bad, b], Some(1)).unwrap();
        assert_eq!(r.periods(), 2);
        assert_eq!(r.dropped.len(), 1);
        assert_eq!(r.dropped[0].0, m(5));
    }
}
