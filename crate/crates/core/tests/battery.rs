use cidlab_core::battery::{
    alpha_regression, fama_macbeth, predictive_regression, spanning_test, Aggregation, CrossSection, ModelSpec,
    PredictiveConfig, Predictor,
};
use cidlab_core::econometrics::{ols, CovMethod, Design};
use cidlab_core::panel::{FactorTable, Frequency, MacroSeries};
use cidlab_core::synth::SplitMix64;
use cidlab_core::{MonthId, Series};
use proptest::prelude::*;

fn month(i: i64) -> MonthId {
    MonthId::from_yyyymm(197001).unwrap().add_months(i)
}

fn planted_sections(seed: u64, months: i64, slope: f64) -> Vec<CrossSection> {
    let mut g = SplitMix64::new(seed);
    (0..months)
        .map(|t| {
            let lambda = slope + 0.04 * g.normal();
            let x: Vec<f64> = (0..80).map(|_| g.normal()).collect();
            let z: Vec<f64> = (0..80).map(|_| g.normal()).collect();
            let y = x.iter().zip(&z).map(|(a, b)| 0.01 + lambda * a + 0.02 * b + 0.3 * g.normal()).collect();
            CrossSection {
                month: month(t),
                y,
                columns: vec![("x".into(), x), ("z".into(), z)],
            }
        })
        .collect()
}

#[test]
fn fama_macbeth_recovers_planted_slope() {
    let rep = fama_macbeth(&planted_sections(1, 600, -0.10), None).unwrap();
    let i = rep.index("x").unwrap();
    let se = rep.std_error[i].unwrap();
    assert!((rep.mean[i] + 0.10).abs() <= 2.0 * se, "{} se {se}", rep.mean[i]);
    assert_eq!(rep.periods(), 600);
    assert!(!rep.degenerate[i]);
}

#[test]
fn fama_macbeth_t_is_mean_over_standard_error() {
    let rep = fama_macbeth(&planted_sections(2, 60, -0.10), None).unwrap();
    let i = rep.index("x").unwrap();
    let slopes: Vec<f64> = rep.series.iter().map(|(_, c)| c[i]).collect();
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let sd = (slopes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((rep.mean[i] - mean).abs() < 1e-15);
    assert!((rep.t_stat[i].unwrap() - mean / (sd / n.sqrt())).abs() < 1e-10);
}

#[test]
fn single_period_is_degenerate() {
    let rep = fama_macbeth(&planted_sections(3, 1, -0.10), None).unwrap();
    assert!(rep.degenerate.iter().all(|d| *d));
    assert!(rep.t_stat.iter().all(Option::is_none));
    assert!(rep.std_error.iter().all(Option::is_none));
}

fn random_factors(g: &mut SplitMix64, n: usize, names: &[&str]) -> FactorTable {
    let cols = names.iter().map(|_| (0..n).map(|_| 0.004 + 0.03 * g.normal()).collect()).collect();
    FactorTable::new(
        (0..n as i64).map(month).collect(),
        names.iter().map(|s| s.to_string()).collect(),
        cols,
    )
    .unwrap()
}

#[test]
fn factor_on_itself_has_no_alpha() {
    let mut g = SplitMix64::new(9);
    let f = random_factors(&mut g, 300, &["MKT_RF", "SMB", "HML"]);
    let target = f.column("HML").unwrap();
    let model = ModelSpec {
        name: "own".into(),
        factors: vec!["MKT_RF".into(), "HML".into()],
    };
    let row = alpha_regression("HML", &target, &model, &f, CovMethod::Classical).unwrap();
    assert!(row.alpha.abs() < 1e-10);
    assert!((row.regression.coefficient("HML").unwrap() - 1.0).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn orthogonal_candidate_leaves_alpha(seed in any::<u64>()) {
        let mut g = SplitMix64::new(seed);
        let n = 240;
        let f = random_factors(&mut g, n, &["A", "B"]);
        let months: Vec<MonthId> = (0..n as i64).map(month).collect();
        let target: Vec<f64> = (0..n).map(|t| 0.002 + 0.7 * f.column("A").unwrap().values()[t] + 0.01 * g.normal()).collect();
        let raw: Vec<f64> = (0..n).map(|_| g.normal()).collect();
        let d = Design::with_intercept(n)
            .column("A", f.column("A").unwrap().values().to_vec())
            .column("B", f.column("B").unwrap().values().to_vec())
            .column("T", target.clone());
        let cand = Series::new(months.clone(), ols(&raw, &d).unwrap().residuals).unwrap();
        let res = spanning_test(
            ("T", &Series::new(months, target).unwrap()),
            &f,
            &["A", "B"],
            ("C", &cand),
            CovMethod::NeweyWest { lags: 4 },
        )
        .unwrap();
        let shift = res.with.coefficient("const").unwrap() - res.without.coefficient("const").unwrap();
        prop_assert!(shift.abs() < 1e-8);
        prop_assert!(res.with.coefficient("C").unwrap().abs() < 1e-8);
    }
}

fn quarterly(values: Vec<f64>, first_quarter_end: i64) -> MacroSeries {
    let months = (0..values.len() as i64).map(|q| month(first_quarter_end + 3 * q)).collect();
    MacroSeries::new("u", Frequency::Quarterly, Series::new(months, values).unwrap()).unwrap()
}

#[test]
fn predictive_regression_ignores_the_future() {
    let mut g = SplitMix64::new(4);
    let x = Series::new((0..360).map(month).collect(), (0..360).map(|_| g.normal()).collect()).unwrap();
    let dep = quarterly((0..120).map(|_| g.normal()).collect(), 2);
    let config = PredictiveConfig {
        nw_lags: 2,
        filter_dependent: true,
        sample_end: Some(month(2 + 3 * 80)),
    };
    let base = predictive_regression(&dep, &[Predictor::new("x", x.clone(), Aggregation::Sum)], &config).unwrap();
    // Scrambling predictor months at or after the sample end changes nothing.
    let scrambled = x.iter().map(|(m, v)| if m >= month(2 + 3 * 80) { (m, v * 100.0 + 7.0) } else { (m, v) });
    let x2 = Series::from_pairs(scrambled).unwrap();
    let again = predictive_regression(&dep, &[Predictor::new("x", x2, Aggregation::Sum)], &config).unwrap();
    assert_eq!(base.regression.coefficients, again.regression.coefficients);
    assert_eq!(base.periods, again.periods);
    assert!(base.periods.iter().all(|p| *p <= month(2 + 3 * 80)));
}

#[test]
fn predictive_regression_recovers_lagged_effect() {
    let mut g = SplitMix64::new(12);
    let x = Series::new((0..600).map(month).collect(), (0..600).map(|_| 0.01 * g.normal()).collect()).unwrap();
    // Dependent quarter q responds to the sum of x over quarter q - 1.
    let mut level = 0.0;
    let mut values = Vec::new();
    for q in 0..200i64 {
        let end = month(2 + 3 * q);
        let prev: f64 = (3..6).map(|k| x.get(end.add_months(-k)).unwrap_or(0.0)).sum();
        level += 5.0 * prev + 0.01 * g.normal();
        values.push(level);
    }
    let config = PredictiveConfig {
        nw_lags: 4,
        filter_dependent: false,
        sample_end: None,
    };
    let growth: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let dep = quarterly(growth, 5);
    let fit = predictive_regression(&dep, &[Predictor::new("x", x, Aggregation::Sum)], &config).unwrap();
    assert!((fit.regression.coefficient("x").unwrap() - 5.0).abs() < 0.2);
}
