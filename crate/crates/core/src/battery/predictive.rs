use serde::{Deserialize, Serialize};

use super::field;
use crate::econometrics::{innovation_filter_step, newey_west, ols, std_dev, Design, RegressionResult};
use crate::panel::{Frequency, MacroSeries, MonthId};
use crate::{Error, Result, Series};

/// How monthly observations collapse into one longer period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
    Last,
}

/// Aggregates a monthly series to the period of length `step` ending at
/// `end`. Every month of the period must be present.
pub fn aggregate_to_period(series: &Series, end: MonthId, step: i64, how: Aggregation) -> Option<f64> {
    let mut vals = Vec::with_capacity(step as usize);
    for k in (0..step).rev() {
        vals.push(series.get(end.add_months(-k))?);
    }
    Some(match how {
        Aggregation::Sum => vals.iter().sum(),
        Aggregation::Mean => vals.iter().sum::<f64>() / step as f64,
        Aggregation::Last => *vals.last()?,
    })
}

/// Trailing standard deviation of monthly market returns over `window`
/// months, defined once the window is full.
pub fn market_volatility(market: &Series, window: usize) -> Series {
    let pairs = market.months().iter().enumerate().filter_map(|(i, m)| {
        if i + 1 < window {
            return None;
        }
        let start = m.add_months(-(window as i64 - 1));
        let w = &market.values()[i + 1 - window..=i];
        (market.months()[i + 1 - window] == start).then(|| std_dev(w).map(|s| (*m, s)))?
    });
    Series::from_pairs(pairs).expect("subset of an ordered series")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub name: String,
    /// Monthly observations.
    pub series: Series,
    pub aggregation: Aggregation,
}

impl Predictor {
    pub fn new(name: &str, series: Series, aggregation: Aggregation) -> Self {
        Predictor {
            name: name.to_string(),
            series,
            aggregation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveConfig {
    pub nw_lags: usize,
    /// Pass the dependent series through the innovation filter.
    pub filter_dependent: bool,
    /// Ignore dependent observations after this period.
    pub sample_end: Option<MonthId>,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        PredictiveConfig {
            nw_lags: 4,
            filter_dependent: true,
            sample_end: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PredictiveResult {
    pub label: String,
    pub regression: RegressionResult,
    /// Dependent periods used.
    pub periods: Vec<MonthId>,
}

impl PredictiveResult {
    /// `dependent,term,coef,std_error,t_stat,r2,nobs`
    pub fn csv_rows(&self) -> String {
        let r = &self.regression;
        let mut out = String::new();
        for i in 0..r.names.len() {
            let t = r.t_stats[i];
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.label,
                r.names[i],
                r.coefficients[i],
                r.std_errors[i],
                field(t.is_finite().then_some(t)),
                r.r2,
                r.nobs
            ));
        }
        out
    }
}

/// One-period-ahead regression: the (filtered) dependent at period `q` on the
/// predictors aggregated over period `q - 1`, with Newey-West errors.
pub fn predictive_regression(
    dependent: &MacroSeries,
    predictors: &[Predictor],
    config: &PredictiveConfig,
) -> Result<PredictiveResult> {
    let step = dependent.frequency.step();
    let dep = match config.sample_end {
        Some(end) => dependent.series.window(MonthId::from_yyyymm(100001)?, end),
        None => dependent.series.clone(),
    };
    let y_series = if config.filter_dependent {
        innovation_filter_step(&dep, step)?.innovations
    } else {
        dep
    };
    let (mut periods, mut y) = (Vec::new(), Vec::new());
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); predictors.len()];
    for (q, v) in y_series.iter() {
        let prev = q.add_months(-step);
        let row: Option<Vec<f64>> = predictors
            .iter()
            .map(|p| aggregate_to_period(&p.series, prev, step, p.aggregation))
            .collect();
        if let Some(row) = row {
            periods.push(q);
            y.push(v);
            for (col, val) in x.iter_mut().zip(row) {
                col.push(val);
            }
        }
    }
    if periods.len() <= predictors.len() + 1 {
        return Err(Error::Misaligned(format!(
            "`{}` overlaps the lagged predictors in only {} periods",
            dependent.label,
            periods.len()
        )));
    }
    let mut design = Design::with_intercept(y.len());
    for (p, col) in predictors.iter().zip(x) {
        design = design.column(&p.name, col);
    }
    let fit = ols(&y, &design)?;
    let regression = if config.nw_lags < fit.nobs {
        newey_west(&fit, config.nw_lags)?
    } else {
        return Err(Error::invalid(format!(
            "Newey-West lags {} not below {} observations",
            config.nw_lags, fit.nobs
        )));
    };
    Ok(PredictiveResult {
        label: dependent.label.clone(),
        regression,
        periods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsample {
    Full,
    /// Lagged excess return below zero.
    Negative,
    /// Lagged excess return at or above zero.
    Positive,
}

impl std::fmt::Display for Subsample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Subsample::Full => "full",
            Subsample::Negative => "negative",
            Subsample::Positive => "positive",
        })
    }
}

/// Matched industry series. Employment entries are growth rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelPredictiveInput {
    pub employment: Vec<(String, Series)>,
    pub returns: Vec<(String, Series)>,
    /// Aggregate employment growth subtracted from every industry.
    pub aggregate: Option<Series>,
    /// Market return subtracted from every industry return.
    pub market: Option<Series>,
    pub frequency: Frequency,
}

#[derive(Debug, Clone)]
pub struct PanelPredictiveResult {
    pub subsample: Subsample,
    pub lag: usize,
    pub regression: RegressionResult,
}

fn demeaned(s: &Series, by: Option<&Series>) -> Series {
    match by {
        None => s.clone(),
        Some(b) => Series::from_pairs(s.iter().filter_map(|(m, v)| b.get(m).map(|x| (m, v - x))))
            .expect("subset of an ordered series"),
    }
}

/// Pooled regression of industry excess employment growth at `t` on the
/// industry excess return at `t - lag` periods.
pub fn panel_predictive(input: &PanelPredictiveInput, subsample: Subsample, lag: usize) -> Result<PanelPredictiveResult> {
    if lag == 0 {
        return Err(Error::invalid("predictive lag must be at least one period"));
    }
    let step = input.frequency.step() * lag as i64;
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for (name, emp) in &input.employment {
        let Some((_, ret)) = input.returns.iter().find(|(n, _)| n == name) else {
            return Err(Error::Misaligned(format!("industry `{name}` has employment but no returns")));
        };
        let g = demeaned(emp, input.aggregate.as_ref());
        let r = demeaned(ret, input.market.as_ref());
        for (t, gv) in g.iter() {
            let Some(rv) = r.get(t.add_months(-step)) else { continue };
            let keep = match subsample {
                Subsample::Full => true,
                Subsample::Negative => rv < 0.0,
                Subsample::Positive => rv >= 0.0,
            };
            if keep {
                y.push(gv);
                x.push(rv);
            }
        }
    }
    if y.len() < 3 {
        return Err(Error::insufficient(format!(
            "{subsample} subsample at lag {lag} has {} pooled observations",
            y.len()
        )));
    }
    let regression = ols(&y, &Design::with_intercept(y.len()).column("lagged_return", x))?;
    Ok(PanelPredictiveResult {
        subsample,
        lag,
        regression,
    })
}

/// Slope t-statistics for lags `1..=max_lag`.
pub fn panel_predictive_profile(
    input: &PanelPredictiveInput,
    subsample: Subsample,
    max_lag: usize,
) -> Result<Vec<PanelPredictiveResult>> {
    (1..=max_lag).map(|l| panel_predictive(input, subsample, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn months(n: usize) -> Vec<MonthId> {
        let s = MonthId::from_yyyymm(197001).unwrap();
        (0..n).map(|i| s.add_months(i as i64)).collect()
    }

    fn noise(n: usize, a: usize) -> Vec<f64> {
        (0..n).map(|i| (((i * a + 7) * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect()
    }

    #[test]
    fn aggregation_rules() {
        let s = Series::new(months(6), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let q1 = MonthId::from_yyyymm(197003).unwrap();
        assert_eq!(aggregate_to_period(&s, q1, 3, Aggregation::Sum), Some(6.0));
        assert_eq!(aggregate_to_period(&s, q1, 3, Aggregation::Mean), Some(2.0));
        assert_eq!(aggregate_to_period(&s, q1, 3, Aggregation::Last), Some(3.0));
        assert_eq!(aggregate_to_period(&s, q1.add_months(6), 3, Aggregation::Sum), None);
    }

    #[test]
    fn dependent_is_lagged_predictor() {
        let ms = months(120);
        let x = Series::new(ms.clone(), noise(120, 13)).unwrap();
        let dep = Series::from_pairs(ms.iter().skip(1).map(|m| (*m, x.get(m.pred()).unwrap()))).unwrap();
        let dep = MacroSeries::new("u", Frequency::Monthly, dep).unwrap();
        let cfg = PredictiveConfig {
            filter_dependent: false,
            ..PredictiveConfig::default()
        };
        let r = predictive_regression(&dep, &[Predictor::new("x", x, Aggregation::Sum)], &cfg).unwrap();
        assert!((r.regression.coefficient("x").unwrap() - 1.0).abs() < 1e-12);
        assert!((r.regression.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarterly_alignment() {
        let ms = months(120);
        let x = Series::new(ms.clone(), noise(120, 17)).unwrap();
        // Dependent at quarter q equals the predictor summed over quarter q-1.
        let pairs: Vec<(MonthId, f64)> = ms
            .iter()
            .filter(|m| m.is_quarter_end() && **m > ms[5])
            .map(|q| (*q, aggregate_to_period(&x, q.add_months(-3), 3, Aggregation::Sum).unwrap()))
            .collect();
        let dep = MacroSeries::new("u", Frequency::Quarterly, Series::from_pairs(pairs).unwrap()).unwrap();
        let cfg = PredictiveConfig {
            filter_dependent: false,
            ..PredictiveConfig::default()
        };
        let r = predictive_regression(&dep, &[Predictor::new("x", x, Aggregation::Sum)], &cfg).unwrap();
        assert!((r.regression.coefficient("x").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn volatility_window() {
        let s = Series::new(months(30), noise(30, 3)).unwrap();
        let v = market_volatility(&s, 24);
        assert_eq!(v.len(), 7);
        assert!((v.values()[0] - std_dev(&s.values()[..24]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn panel_exact_slope() {
        let ms = months(60);
        let r = Series::new(ms.clone(), noise(60, 29)).unwrap();
        let g = Series::from_pairs(ms.iter().skip(1).map(|m| (*m, 0.02 * r.get(m.pred()).unwrap()))).unwrap();
        let input = PanelPredictiveInput {
            employment: vec![("a".into(), g)],
            returns: vec![("a".into(), r)],
            aggregate: None,
            market: None,
            frequency: Frequency::Monthly,
        };
        let out = panel_predictive(&input, Subsample::Full, 1).unwrap();
        assert!((out.regression.coefficient("lagged_return").unwrap() - 0.02).abs() < 1e-14);
        let neg = panel_predictive(&input, Subsample::Negative, 1).unwrap();
        let pos = panel_predictive(&input, Subsample::Positive, 1).unwrap();
        assert_eq!(neg.regression.nobs + pos.regression.nobs, out.regression.nobs);
    }
}
