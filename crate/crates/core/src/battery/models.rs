use serde::{Deserialize, Serialize};

use super::field;
use crate::econometrics::{ols, with_cov, CovMethod, Design, RegressionResult};
use crate::panel::{FactorTable, MonthId};
use crate::portfolio::PortfolioSeries;
use crate::{Error, Result, Series};

/// Named set of factor columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub factors: Vec<String>,
}

impl ModelSpec {
    pub fn new(name: &str, factors: &[&str]) -> Self {
        ModelSpec {
            name: name.to_string(),
            factors: factors.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn capm() -> Self {
        Self::new("CAPM", &["MKT_RF"])
    }

    pub fn ff3() -> Self {
        Self::new("FF3", &["MKT_RF", "SMB", "HML"])
    }

    pub fn carhart() -> Self {
        Self::new("Carhart", &["MKT_RF", "SMB", "HML", "MOM"])
    }

    pub fn ff5() -> Self {
        Self::new("FF5", &["MKT_RF", "SMB", "HML", "RMW", "CMA"])
    }

    pub fn ff5_umd_str() -> Self {
        Self::new("FF5+UMD+STR", &["MKT_RF", "SMB", "HML", "RMW", "CMA", "MOM", "STR"])
    }

    /// Looks up a builtin model by name (case-insensitive).
    pub fn builtin(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_uppercase().as_str() {
            "CAPM" => Self::capm(),
            "FF3" => Self::ff3(),
            "CARHART" => Self::carhart(),
            "FF5" => Self::ff5(),
            "FF5+UMD+STR" => Self::ff5_umd_str(),
            _ => return Err(Error::invalid(format!("unknown model `{name}`"))),
        })
    }

    fn columns(&self) -> Vec<&str> {
        self.factors.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AlphaRow {
    pub portfolio: String,
    pub model: String,
    pub alpha: f64,
    pub t_alpha: f64,
    /// `(factor, loading, t)`.
    pub loadings: Vec<(String, f64, f64)>,
    pub adj_r2: f64,
    pub nobs: usize,
    pub regression: RegressionResult,
}

#[derive(Debug, Clone, Default)]
pub struct AlphaReport {
    pub rows: Vec<AlphaRow>,
}

impl AlphaReport {
    pub fn get(&self, portfolio: &str, model: &str) -> Option<&AlphaRow> {
        self.rows.iter().find(|r| r.portfolio == portfolio && r.model == model)
    }

    /// Long format: `portfolio,model,term,coef,t_stat,adj_r2,nobs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("portfolio,model,term,coef,t_stat,adj_r2,nobs\n");
        for r in &self.rows {
            let mut line = |term: &str, c: f64, t: f64| {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.portfolio,
                    r.model,
                    term,
                    c,
                    field(t.is_finite().then_some(t)),
                    r.adj_r2,
                    r.nobs
                ));
            };
            line("alpha", r.alpha, r.t_alpha);
            for (f, c, t) in &r.loadings {
                line(f, *c, *t);
            }
        }
        out
    }
}

fn aligned_regression(y: &Series, table: &FactorTable, cols: &[&str], cov: CovMethod) -> Result<(RegressionResult, Vec<MonthId>)> {
    table.require(cols)?;
    let months: Vec<MonthId> = y
        .months()
        .iter()
        .copied()
        .filter(|m| cols.iter().all(|c| table.value(c, *m).is_some()))
        .collect();
    let needed = cols.len() + 1 + 10;
    if months.len() < needed {
        return Err(Error::insufficient(format!(
            "{} overlapping months, need at least {needed}",
            months.len()
        )));
    }
    let yv: Vec<f64> = months.iter().map(|m| y.get(*m).unwrap_or(f64::NAN)).collect();
    let mut design = Design::with_intercept(months.len());
    for c in cols {
        design = design.column(c, months.iter().map(|m| table.value(c, *m).unwrap_or(f64::NAN)).collect::<Vec<_>>());
    }
    Ok((with_cov(ols(&yv, &design)?, cov)?, months))
}

/// Time-series regression of a portfolio's excess returns on a factor model.
/// Needs at least `factors + 11` overlapping months.
pub fn alpha_regression(
    label: &str,
    returns: &Series,
    model: &ModelSpec,
    factors: &FactorTable,
    cov: CovMethod,
) -> Result<AlphaRow> {
    let (reg, _) = aligned_regression(returns, factors, &model.columns(), cov)
        .map_err(|e| Error::insufficient(format!("alpha of `{label}` under {}: {e}", model.name)))?;
    Ok(AlphaRow {
        portfolio: label.to_string(),
        model: model.name.clone(),
        alpha: reg.coefficients[0],
        t_alpha: reg.t_stats[0],
        loadings: (1..reg.names.len())
            .map(|i| (reg.names[i].clone(), reg.coefficients[i], reg.t_stats[i]))
            .collect(),
        adj_r2: reg.adj_r2,
        nobs: reg.nobs,
        regression: reg,
    })
}

/// [`alpha_regression`] for every portfolio under every model.
pub fn loadings_table(
    portfolios: &[PortfolioSeries],
    models: &[ModelSpec],
    factors: &FactorTable,
    cov: CovMethod,
) -> Result<AlphaReport> {
    let mut rows = Vec::new();
    for p in portfolios {
        let s = p.to_series();
        for m in models {
            rows.push(alpha_regression(&p.label, &s, m, factors, cov)?);
        }
    }
    Ok(AlphaReport { rows })
}

/// Registers a long-short series as a factor column.
pub fn build_factor(series: &PortfolioSeries, name: &str) -> Result<FactorTable> {
    FactorTable::from_series(name, &series.to_series())
}

#[derive(Debug, Clone)]
pub struct SpanningResult {
    pub target: String,
    pub candidate: String,
    pub without: RegressionResult,
    pub with: RegressionResult,
}

impl SpanningResult {
    pub fn alpha_change(&self) -> f64 {
        self.with.coefficients[0] - self.without.coefficients[0]
    }

    /// `spec,term,coef,t_stat,adj_r2,nobs`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("spec,term,coef,t_stat,adj_r2,nobs\n");
        for (spec, r) in [("base", &self.without), ("augmented", &self.with)] {
            for i in 0..r.names.len() {
                let term = if i == 0 { "alpha" } else { r.names[i].as_str() };
                let t = r.t_stats[i];
                out.push_str(&format!(
                    "{spec},{term},{},{},{},{}\n",
                    r.coefficients[i],
                    field(t.is_finite().then_some(t)),
                    r.adj_r2,
                    r.nobs
                ));
            }
        }
        out
    }
}

/// Regresses `target` on `base` columns, then on `base` plus the candidate,
/// over the months where all of them are present.
pub fn spanning_test(
    target: (&str, &Series),
    factors: &FactorTable,
    base: &[&str],
    candidate: (&str, &Series),
    cov: CovMethod,
) -> Result<SpanningResult> {
    let cand = FactorTable::from_series(candidate.0, candidate.1)?;
    let joined = factors.join(&cand)?;
    let mut all: Vec<&str> = base.to_vec();
    all.push(candidate.0);
    let common: Vec<MonthId> = target
        .1
        .months()
        .iter()
        .copied()
        .filter(|m| all.iter().all(|c| joined.value(c, *m).is_some()))
        .collect();
    let y = Series::from_pairs(common.iter().map(|m| (*m, target.1.get(*m).unwrap_or(f64::NAN))))?;
    let (without, _) = aligned_regression(&y, &joined, base, cov)?;
    let (with, _) = aligned_regression(&y, &joined, &all, cov)?;
    Ok(SpanningResult {
        target: target.0.to_string(),
        candidate: candidate.0.to_string(),
        without,
        with,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn months(n: usize) -> Vec<MonthId> {
        let s = MonthId::from_yyyymm(198001).unwrap();
        (0..n).map(|i| s.add_months(i as i64)).collect()
    }

    fn factors(n: usize) -> FactorTable {
        let mkt: Vec<f64> = (0..n).map(|i| ((i * 37 % 19) as f64 - 9.0) / 100.0).collect();
        let smb: Vec<f64> = (0..n).map(|i| ((i * 11 % 7) as f64 - 3.0) / 100.0).collect();
        let hml: Vec<f64> = (0..n).map(|i| ((i * 5 % 13) as f64 - 6.0) / 100.0).collect();
        FactorTable::new(months(n), vec!["MKT_RF".into(), "SMB".into(), "HML".into()], vec![mkt, smb, hml]).unwrap()
    }

    #[test]
    fn market_under_capm() {
        let f = factors(60);
        let mkt = f.column("MKT_RF").unwrap();
        let r = alpha_regression("m", &mkt, &ModelSpec::capm(), &f, CovMethod::Classical).unwrap();
        assert!(r.alpha.abs() < 1e-12);
        assert!((r.loadings[0].1 - 1.0).abs() < 1e-12);
        assert!((r.regression.r2 - 1.0).abs() < 1e-12);
        let shifted = mkt.map(|x| x + 0.001).unwrap();
        let r = alpha_regression("m", &shifted, &ModelSpec::capm(), &f, CovMethod::Classical).unwrap();
        assert!((r.alpha - 0.001).abs() < 1e-12);
    }

    #[test]
    fn missing_column_and_short_overlap() {
        let f = factors(60);
        let mkt = f.column("MKT_RF").unwrap();
        assert!(alpha_regression("m", &mkt, &ModelSpec::carhart(), &f, CovMethod::Classical).is_err());
        let short = mkt.window(months(60)[0], months(60)[10]);
        assert!(alpha_regression("m", &short, &ModelSpec::capm(), &f, CovMethod::Classical).is_err());
    }

    #[test]
    fn target_on_itself() {
        let f = factors(80);
        let smb = f.column("SMB").unwrap();
        let s = spanning_test(("SMB2", &smb), &f, &["MKT_RF"], ("SMBc", &smb), CovMethod::Classical).unwrap();
        assert!(s.with.coefficients[0].abs() < 1e-12);
        assert!((s.with.coefficient("SMBc").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn builtins_resolve() {
        assert_eq!(ModelSpec::builtin("ff5+umd+str").unwrap().factors.len(), 7);
        assert!(ModelSpec::builtin("APT").is_err());
    }
}
