//! One function per subcommand; each returns the files it emits.

use std::collections::BTreeMap;

use cidlab_core::battery::{
    aggregate_to_period, correlation_matrix, fama_macbeth, loadings_table, market_volatility, panel_predictive,
    portfolio_cross_sections, predictive_regression, spanning_test, stock_cross_sections, ModelSpec,
    PanelPredictiveInput, PredictiveConfig, Predictor, Subsample,
};
use cidlab_core::beta::post_ranking_betas;
use cidlab_core::dispersion::{dispersion_series, industry_returns};
use cidlab_core::econometrics::{mean, std_dev, CovMethod};
use cidlab_core::panel::{
    classify, load_industry_series, load_scheme, write_factors, write_industry_series, write_macro, write_panel,
    write_scheme, Frequency, IndustryScheme, MacroSeries, SchemeKind,
};
use cidlab_core::pipeline::keys_by_month;
use cidlab_core::portfolio::{
    characteristic_keys, characteristics, double_sort, double_sort_returns, Characteristic, PortfolioSeries,
};
use cidlab_core::synth::{beta_reliability, expected_long_short, generate_deflator, generate_macro, generate_panel};
use cidlab_core::{MonthId, ReturnPanel, Series};

use crate::bundle::Bundle;
use crate::config::{ControlKey, Measure, RunConfig, SchemeFile};
use crate::context::{Context, Keys};
use crate::CliError;

type Files = Vec<(String, Vec<u8>)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    IngestCheck,
    Dispersion,
    Betas,
    Sort,
    Alphas,
    Fmb,
    Spanning,
    PredictMacro,
    PredictEmployment,
    Sweep,
    Synth,
}

impl Stage {
    /// Stages chained by `all`, in order.
    pub const ANALYSIS: [Stage; 10] = [
        Stage::IngestCheck,
        Stage::Dispersion,
        Stage::Betas,
        Stage::Sort,
        Stage::Alphas,
        Stage::Fmb,
        Stage::Spanning,
        Stage::PredictMacro,
        Stage::PredictEmployment,
        Stage::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::IngestCheck => "ingest-check",
            Stage::Dispersion => "dispersion",
            Stage::Betas => "betas",
            Stage::Sort => "sort",
            Stage::Alphas => "alphas",
            Stage::Fmb => "fmb",
            Stage::Spanning => "spanning",
            Stage::PredictMacro => "predict-macro",
            Stage::PredictEmployment => "predict-employment",
            Stage::Sweep => "sweep-classification",
            Stage::Synth => "synth",
        }
    }

    /// Why `all` leaves this stage out, if it does.
    fn unavailable(self, cfg: &RunConfig) -> Option<&'static str> {
        let i = &cfg.inputs;
        match self {
            Stage::Alphas | Stage::Spanning if i.factors.is_none() => Some("no factor file"),
            Stage::PredictMacro if i.factors.is_none() => Some("no factor file"),
            Stage::PredictMacro if i.unemployment.is_none() && i.lt_unemployment.is_none() && i.st_unemployment.is_none() => {
                Some("no unemployment series")
            }
            Stage::PredictEmployment if i.factors.is_none() => Some("no factor file"),
            Stage::PredictEmployment if i.employment.is_none() => Some("no employment file"),
            _ => None,
        }
    }
}

/// Runs `stage` unless the digest cache is current. Outside an explicit
/// request, stages missing optional inputs are skipped.
pub fn run_stage(stage: Stage, ctx: &Context, bundle: &mut Bundle, explicit: bool) -> Result<(), CliError> {
    let name = stage.name();
    if !explicit {
        if let Some(why) = stage.unavailable(ctx.cfg) {
            eprintln!("{name}: skipped ({why})");
            return Ok(());
        }
    }
    if bundle.is_current(name) {
        eprintln!("{name}: up to date");
        return Ok(());
    }
    let files = match stage {
        Stage::IngestCheck => ingest_check(ctx),
        Stage::Dispersion => dispersion(ctx),
        Stage::Betas => betas(ctx),
        Stage::Sort => sort(ctx),
        Stage::Alphas => alphas(ctx),
        Stage::Fmb => fmb(ctx),
        Stage::Spanning => spanning(ctx),
        Stage::PredictMacro => predict_macro(ctx),
        Stage::PredictEmployment => predict_employment(ctx),
        Stage::Sweep => sweep(ctx),
        Stage::Synth => synth(ctx, bundle),
    }
    .map_err(|e| e.in_stage(name))?;
    let listed: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
    eprintln!("{name}: wrote {}", listed.join(", "));
    bundle.write_stage(name, files)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finite(v: f64) -> String {
    opt(v.is_finite().then_some(v))
}

/// CSV text from a header and rows of already formatted fields.
fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| CliError::Internal(format!("csv: {e}"));
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(&r).map_err(internal)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(format!("csv: {e}")))
}

fn file(name: &str, bytes: impl Into<Vec<u8>>) -> (String, Vec<u8>) {
    (name.to_string(), bytes.into())
}

fn ingest_check(ctx: &Context) -> Result<Files, CliError> {
    let (panel, stats) = ctx.panel()?;
    let classified = ctx.classified()?;
    let scheme = ctx.scheme()?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut kv = |k: &str, v: String| rows.push(vec![k.to_string(), v]);
    kv("panel_rows_loaded", stats.loaded.to_string());
    kv("panel_rows_screened", stats.screened.to_string());
    kv("panel_stocks", panel.by_stock().len().to_string());
    let (first, last) = panel
        .month_range()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .unwrap_or_default();
    kv("panel_first_month", first);
    kv("panel_last_month", last);
    let unclassified = classified.observations().iter().filter(|o| o.industry.is_none()).count();
    kv("scheme", scheme.name.clone());
    kv("scheme_industries", scheme.num_industries().to_string());
    kv("classified_rows", (classified.len() - unclassified).to_string());
    kv("unclassified_rows", unclassified.to_string());
    if let Some(f) = ctx.factors()? {
        kv("factor_months", f.len().to_string());
        kv("factor_columns", f.names().join(" "));
    }
    let inputs = &ctx.cfg.inputs;
    for (label, path) in [
        ("unemployment", &inputs.unemployment),
        ("lt_unemployment", &inputs.lt_unemployment),
        ("st_unemployment", &inputs.st_unemployment),
        ("deflator", &inputs.deflator),
    ] {
        if let Some(m) = ctx.macro_series(path, label)? {
            let ends = (m.series.months().first(), m.series.months().last());
            kv(&format!("{label}_periods"), m.series.len().to_string());
            kv(&format!("{label}_first"), ends.0.map(|p| m.format_period(*p)).unwrap_or_default());
            kv(&format!("{label}_last"), ends.1.map(|p| m.format_period(*p)).unwrap_or_default());
        }
    }
    if let Some(p) = &inputs.employment {
        let e = load_industry_series(p)?;
        kv("employment_industries", e.len().to_string());
    }
    Ok(vec![file("table_ingest.csv", table(&["item", "value"], rows)?)])
}

fn summary_row(name: &str, values: &[f64]) -> Vec<String> {
    let ac = cidlab_core::econometrics::autocorrelation(values, 1).ok();
    vec![
        name.to_string(),
        values.len().to_string(),
        opt(mean(values)),
        opt(std_dev(values)),
        opt(ac),
    ]
}

fn dispersion(ctx: &Context) -> Result<Files, CliError> {
    let d = ctx.dispersion()?;
    let inn = ctx.innovations()?;
    let innovations = table(
        &["month", "innovation"],
        inn.innovations.iter().map(|(m, v)| vec![m.to_string(), v.to_string()]).collect(),
    )?;
    let fits = table(
        &["block_start", "block_end", "gamma0", "gamma1", "gamma2", "dropped_lag_diff", "nobs", "r2"],
        inn.fits
            .iter()
            .map(|f| {
                vec![
                    f.start.to_string(),
                    f.end.to_string(),
                    f.gammas[0].to_string(),
                    f.gammas[1].to_string(),
                    f.gammas[2].to_string(),
                    f.dropped_lagged_difference.to_string(),
                    f.regression.nobs.to_string(),
                    f.regression.r2.to_string(),
                ]
            })
            .collect(),
    )?;
    let summary = table(
        &["series", "months", "mean", "std_dev", "autocorr1"],
        vec![
            summary_row("cid", &d.cid),
            summary_row("wid", &d.wid),
            summary_row("csd", &d.csd),
            summary_row("cid_innovation", inn.innovations.values()),
        ],
    )?;
    let corr = correlation_matrix(
        &[
            ("cid".into(), d.cid_series()),
            ("wid".into(), d.wid_series()),
            ("csd".into(), d.csd_series()),
        ],
        true,
    )?;
    Ok(vec![
        file("dispersion.csv", d.to_csv()),
        file("innovations.csv", innovations),
        file("table_filter.csv", fits),
        file("table_dispersion_summary.csv", summary),
        file("table_correlations.csv", corr.to_csv()),
    ])
}

fn betas(ctx: &Context) -> Result<Files, CliError> {
    let c = ctx.cid_sort()?;
    let b = &c.betas;
    let cfg = &b.config;
    let diag = table(
        &["item", "value"],
        vec![
            vec!["estimated".into(), b.diagnostics.estimated.to_string()],
            vec!["skipped_short".into(), b.diagnostics.skipped_short.to_string()],
            vec!["skipped_zero_variance".into(), b.diagnostics.skipped_zero_variance.to_string()],
            vec!["months".into(), b.months().count().to_string()],
            vec!["window".into(), cfg.window.to_string()],
            vec!["min_obs".into(), cfg.min_obs.to_string()],
            vec!["winsor_low".into(), cfg.winsor.0.to_string()],
            vec!["winsor_high".into(), cfg.winsor.1.to_string()],
        ],
    )?;
    Ok(vec![file("betas.csv", b.to_csv()), file("table_beta_diagnostics.csv", diag)])
}

fn mean_row(p: &PortfolioSeries) -> Vec<String> {
    let s = p.to_series();
    match p.mean_t() {
        Some((m, se, t)) => vec![p.label.clone(), m.to_string(), se.to_string(), finite(t), s.len().to_string()],
        None => vec![p.label.clone(), opt(p.mean()), String::new(), String::new(), s.len().to_string()],
    }
}

const MEAN_HEADER: [&str; 5] = ["portfolio", "mean", "std_error", "t_stat", "months"];

fn portfolio_rows(ps: &[PortfolioSeries]) -> String {
    let mut out = String::from("month,label,return,count\n");
    for p in ps {
        out.push_str(&p.csv_rows());
    }
    out
}

fn sort(ctx: &Context) -> Result<Files, CliError> {
    let c = ctx.cid_sort()?;
    let panel = ctx.classified()?;
    let chars: Vec<Characteristic> = ctx
        .cfg
        .sort
        .characteristics
        .iter()
        .map(|n| Characteristic::builtin(n))
        .collect::<Result<_, _>>()?;
    let table_chars = characteristics(panel, &c.sort, &chars);
    let labelled: Vec<(String, Series)> = c.portfolios.iter().map(|p| (p.label.clone(), p.to_series())).collect();
    let post = post_ranking_betas(&labelled, &c.innovations.innovations)?;
    let post_rows = post
        .iter()
        .map(|p| {
            vec![
                p.label.clone(),
                p.beta.to_string(),
                p.std_error.to_string(),
                finite(p.t_stat),
                p.nobs.to_string(),
            ]
        })
        .collect();
    let mut files = vec![
        file("portfolios.csv", portfolio_rows(&c.portfolios)),
        file("characteristics.csv", table_chars.to_csv()),
        file("table_mean_returns.csv", table(&MEAN_HEADER, c.portfolios.iter().map(mean_row).collect())?),
        file(
            "table_post_ranking_betas.csv",
            table(&["portfolio", "beta", "std_error", "t_stat", "nobs"], post_rows)?,
        ),
    ];
    if let Some(d) = &ctx.cfg.sort.double {
        let cid_keys = keys_by_month(&c.betas);
        let control: Keys = match d.control {
            ControlKey::Size => characteristic_keys(panel, &cid_keys, &Characteristic::Size),
            ControlKey::WidBeta => keys_by_month(&ctx.measure_sort(Measure::Wid)?.betas),
            ControlKey::CsdBeta => keys_by_month(&ctx.measure_sort(Measure::Csd)?.betas),
        };
        let ds = double_sort(
            &control,
            &cid_keys,
            (d.control_groups, &d.control_breakpoints),
            (d.beta_groups, &d.beta_breakpoints),
        )?;
        let mut report = double_sort_returns(panel, &ds, ctx.cfg.sort.weighting);
        report.ls_a.label = format!("L/S {}", d.control.label());
        report.ls_b.label = "L/S CID".into();
        let mut rows: Vec<Vec<String>> = report.cells.iter().map(mean_row).collect();
        rows.push(mean_row(&report.ls_a));
        rows.push(mean_row(&report.ls_b));
        files.push(file("table_double_sort.csv", table(&MEAN_HEADER, rows)?));
        let mut all = report.cells.clone();
        all.push(report.ls_a.clone());
        all.push(report.ls_b.clone());
        files.push(file("double_sort_portfolios.csv", portfolio_rows(&all)));
        files.push(file(
            "double_sort_empty_cells.csv",
            table(
                &["month", "empty_cells"],
                report.empty_cells.iter().map(|(m, n)| vec![m.to_string(), n.to_string()]).collect(),
            )?,
        ));
    }
    Ok(files)
}

fn cov(lags: Option<usize>) -> CovMethod {
    match lags {
        Some(lags) => CovMethod::NeweyWest { lags },
        None => CovMethod::Classical,
    }
}

fn alphas(ctx: &Context) -> Result<Files, CliError> {
    let c = ctx.cid_sort()?;
    let factors = ctx.require_factors()?;
    let models: Vec<ModelSpec> = ctx
        .cfg
        .battery
        .models
        .iter()
        .map(|m| ModelSpec::builtin(m))
        .collect::<Result<_, _>>()?;
    let report = loadings_table(&c.portfolios, &models, factors, cov(ctx.cfg.battery.alpha_nw_lags))?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.portfolio.clone(),
                r.model.clone(),
                r.alpha.to_string(),
                finite(r.t_alpha),
                r.adj_r2.to_string(),
                r.nobs.to_string(),
            ]
        })
        .collect();
    Ok(vec![
        file(
            "table_alphas.csv",
            table(&["portfolio", "model", "alpha", "t_alpha", "adj_r2", "nobs"], rows)?,
        ),
        file("table_loadings.csv", report.to_csv()),
    ])
}

fn fmb(ctx: &Context) -> Result<Files, CliError> {
    let c = ctx.cid_sort()?;
    let panel = ctx.classified()?;
    let lags = ctx.cfg.battery.fmb_nw_lags;
    let portfolio = fama_macbeth(&portfolio_cross_sections(c.quantiles(), &c.sort), lags)?;

    let beta_keys = keys_by_month(&c.betas);
    let mut controls: Vec<(String, Keys)> = Vec::new();
    for name in &ctx.cfg.battery.fmb_controls {
        let ch = Characteristic::builtin(name)?;
        controls.push((name.clone(), characteristic_keys(panel, &beta_keys, &ch)));
    }
    let mut regressors: Vec<(&str, &Keys)> = vec![("beta", &beta_keys)];
    regressors.extend(controls.iter().map(|(n, k)| (n.as_str(), k)));
    let stock = fama_macbeth(&stock_cross_sections(panel, &regressors), lags)?;
    Ok(vec![
        file("table_fmb.csv", portfolio.to_csv()),
        file("table_fmb_stocks.csv", stock.to_csv()),
    ])
}

fn spanning(ctx: &Context) -> Result<Files, CliError> {
    let factors = ctx.require_factors()?;
    let cid = ctx.cid_sort()?.long_short().to_series();
    let measure = ctx.cfg.battery.spanning_candidate;
    let other = ctx.measure_sort(measure)?.long_short().to_series();
    let other_name = match measure {
        Measure::Wid => "WID",
        Measure::Csd => "CSD",
    };
    let base: Vec<&str> = ctx.cfg.battery.spanning_base.iter().map(String::as_str).collect();
    let method = cov(ctx.cfg.battery.alpha_nw_lags);
    let mut text = String::from("target,candidate,spec,term,coef,t_stat,adj_r2,nobs\n");
    for (t, c) in [(("CID", &cid), (other_name, &other)), ((other_name, &other), ("CID", &cid))] {
        let r = spanning_test(t, factors, &base, c, method)?;
        for line in r.to_csv().lines().skip(1) {
            text.push_str(&format!("{},{},{line}\n", r.target, r.candidate));
        }
    }
    Ok(vec![file("table_spanning.csv", text)])
}

fn predict_macro(ctx: &Context) -> Result<Files, CliError> {
    let inputs = &ctx.cfg.inputs;
    let bat = &ctx.cfg.battery;
    let market = ctx.market()?;
    let predictors = [
        Predictor::new("cid", ctx.innovations()?.innovations.clone(), bat.aggregation),
        Predictor::new("mkt", market.clone(), cidlab_core::battery::Aggregation::Sum),
        Predictor::new(
            "vol",
            market_volatility(&market, bat.vol_window),
            cidlab_core::battery::Aggregation::Last,
        ),
    ];
    let config = PredictiveConfig {
        nw_lags: bat.nw_lags,
        filter_dependent: true,
        sample_end: None,
    };
    let mut text = String::from("dependent,term,coef,std_error,t_stat,r2,nobs\n");
    let mut any = false;
    for (label, path) in [
        ("unemployment", &inputs.unemployment),
        ("lt_unemployment", &inputs.lt_unemployment),
        ("st_unemployment", &inputs.st_unemployment),
    ] {
        if let Some(dep) = ctx.macro_series(path, label)? {
            text.push_str(&predictive_regression(&dep, &predictors, &config)?.csv_rows());
            any = true;
        }
    }
    if !any {
        return Err(CliError::Config("inputs: predict-macro needs an unemployment series".into()));
    }
    Ok(vec![file("table_predict_macro.csv", text)])
}

/// Monthly value-weighted return series per industry code.
fn industry_series(panel: &ReturnPanel) -> Result<BTreeMap<u32, Series>, CliError> {
    let mut by: BTreeMap<u32, Vec<(MonthId, f64)>> = BTreeMap::new();
    for m in panel.months() {
        for (code, r) in industry_returns(panel, m)? {
            by.entry(code).or_default().push((m, r.vw_return));
        }
    }
    by.into_iter().map(|(k, v)| Ok((k, Series::from_pairs(v)?))).collect()
}

fn industry_names(scheme: &IndustryScheme) -> BTreeMap<u32, String> {
    match &scheme.kind {
        SchemeKind::Ranges(rs) => rs.iter().map(|r| (r.code, r.name.clone())).collect(),
        SchemeKind::SicDigits(_) => BTreeMap::new(),
    }
}

fn to_periods(monthly: &Series, periods: &[MonthId], step: i64, how: cidlab_core::battery::Aggregation) -> Series {
    Series::from_pairs(
        periods
            .iter()
            .filter_map(|p| aggregate_to_period(monthly, *p, step, how).map(|v| (*p, v))),
    )
    .expect("periods are ordered")
}

fn predict_employment(ctx: &Context) -> Result<Files, CliError> {
    let path = ctx
        .cfg
        .inputs
        .employment
        .as_ref()
        .ok_or_else(|| CliError::Config("inputs.employment: required by this stage".into()))?;
    let employment = load_industry_series(path)?;
    let frequency = employment.first().map(|e| e.1.frequency).unwrap_or(Frequency::Quarterly);
    let step = frequency.step();
    let panel = ctx.classified()?;
    let returns = industry_series(panel)?;
    let names = industry_names(ctx.scheme()?);
    let market = ctx.market()?;
    let how = ctx.cfg.battery.aggregation;

    let mut periods: Vec<MonthId> = employment.iter().flat_map(|(_, s)| s.series.months().to_vec()).collect();
    periods.sort();
    periods.dedup();
    // Returns may lead employment by several periods.
    let max_lag = ctx.cfg.battery.employment_max_lag as i64;
    let mut ret_periods: Vec<MonthId> = Vec::new();
    if let (Some(first), Some(last)) = (periods.first(), periods.last()) {
        let mut p = first.add_months(-step * max_lag);
        while p <= *last {
            ret_periods.push(p);
            p = p.add_months(step);
        }
    }

    let mut emp = Vec::new();
    let mut ret = Vec::new();
    for (label, series) in &employment {
        let code = label
            .parse::<u32>()
            .ok()
            .or_else(|| names.iter().find(|(_, n)| *n == label).map(|(c, _)| *c))
            .ok_or_else(|| CliError::Data(format!("employment industry `{label}` is not in the scheme")))?;
        let r = returns
            .get(&code)
            .ok_or_else(|| CliError::Data(format!("industry `{label}` has no returns")))?;
        emp.push((label.clone(), series.series.clone()));
        ret.push((label.clone(), to_periods(r, &ret_periods, step, how)));
    }
    let aggregate = Series::from_pairs(periods.iter().filter_map(|p| {
        let v: Vec<f64> = employment.iter().filter_map(|(_, s)| s.value(*p)).collect();
        mean(&v).map(|m| (*p, m))
    }))?;
    let input = PanelPredictiveInput {
        employment: emp,
        returns: ret,
        aggregate: Some(aggregate),
        market: Some(to_periods(&market, &ret_periods, step, how)),
        frequency,
    };
    let mut rows = Vec::new();
    for sub in [Subsample::Full, Subsample::Negative, Subsample::Positive] {
        for lag in 1..=ctx.cfg.battery.employment_max_lag {
            let row = match panel_predictive(&input, sub, lag) {
                Ok(r) => {
                    let g = &r.regression;
                    let i = 1;
                    vec![
                        sub.to_string(),
                        lag.to_string(),
                        g.coefficients[i].to_string(),
                        g.std_errors[i].to_string(),
                        finite(g.t_stats[i]),
                        g.nobs.to_string(),
                    ]
                }
                Err(_) => vec![sub.to_string(), lag.to_string(), String::new(), String::new(), String::new(), "0".into()],
            };
            rows.push(row);
        }
    }
    Ok(vec![file(
        "table_predict_employment.csv",
        table(&["subsample", "lag", "coef", "std_error", "t_stat", "nobs"], rows)?,
    )])
}

fn sweep(ctx: &Context) -> Result<Files, CliError> {
    let sw = &ctx.cfg.sweep;
    let panel = &ctx.panel()?.0;
    let mut schemes: Vec<(Result<IndustryScheme, CliError>, String, usize)> = Vec::new();
    for s in &sw.schemes {
        schemes.push((load_scheme(&s.path, &s.name).map_err(CliError::from), s.name.clone(), sw.min_firms_ranges));
    }
    for d in &sw.sic_digits {
        let name = format!("SIC{d}");
        schemes.push((IndustryScheme::builtin(&name).map_err(CliError::from), name, sw.min_firms_sic));
    }
    let mut rows = Vec::new();
    for (scheme, name, min_firms) in schemes {
        let result = scheme.and_then(|scheme| {
            let classified = classify(panel, &scheme);
            let d = dispersion_series(&classified, ctx.factors()?, &ctx.dispersion_options(min_firms))?;
            let used: Vec<f64> = d.industries_used.iter().map(|n| *n as f64).collect();
            let ms = ctx.sort_measure(&classified, &d.cid_series())?;
            Ok((d.months.len(), mean(&used), ms.long_short().mean_t()))
        });
        rows.push(match result {
            Ok((months, industries, Some((m, se, t)))) => vec![
                name,
                min_firms.to_string(),
                months.to_string(),
                opt(industries),
                m.to_string(),
                se.to_string(),
                finite(t),
                String::new(),
            ],
            Ok((months, industries, None)) => vec![
                name,
                min_firms.to_string(),
                months.to_string(),
                opt(industries),
                String::new(),
                String::new(),
                String::new(),
                "long-short series too short".into(),
            ],
            Err(e) => vec![
                name,
                min_firms.to_string(),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ],
        });
    }
    let header = [
        "scheme",
        "min_firms",
        "months",
        "mean_industries",
        "ls_mean",
        "ls_std_error",
        "ls_t_stat",
        "note",
    ];
    Ok(vec![file("table_sweep.csv", table(&header, rows)?)])
}

/// Synthetic economy in the ingestion formats plus a config that runs it.
fn synth(ctx: &Context, bundle: &Bundle) -> Result<Files, CliError> {
    let cfg = &ctx.cfg.synth;
    let sp = generate_panel(cfg)?;
    let market = sp.factors.column("MKT_RF")?;
    let classified = classify(&sp.panel, &sp.scheme);
    let names = industry_names(&sp.scheme);
    let excess: Vec<(u32, Series)> = industry_series(&classified)?
        .into_iter()
        .map(|(code, s)| {
            let pairs = s.iter().filter_map(|(m, r)| market.get(m).map(|x| (m, r - x)));
            Ok((code, Series::from_pairs(pairs)?))
        })
        .collect::<Result<_, CliError>>()?;
    let mac = generate_macro(cfg, &sp.shocks, &market, &excess)?;
    let deflator = generate_deflator(cfg, 0.002)?;
    let employment: Vec<(String, MacroSeries)> = mac
        .employment
        .iter()
        .map(|(code, s)| (names.get(code).cloned().unwrap_or_else(|| code.to_string()), s.clone()))
        .collect();

    // Core writers target paths; stage them in a scratch directory.
    let scratch = bundle.out().join(".cache").join("synth-scratch");
    std::fs::create_dir_all(&scratch).map_err(|e| CliError::Data(format!("{}: {e}", scratch.display())))?;
    write_panel(&sp.panel, scratch.join("panel.csv"))?;
    write_factors(&sp.factors, scratch.join("factors.csv"))?;
    write_scheme(&sp.scheme, scratch.join("scheme.csv"))?;
    write_macro(&deflator, scratch.join("deflator.csv"))?;
    write_macro(&mac.total, scratch.join("unemployment.csv"))?;
    write_macro(&mac.long_term, scratch.join("lt_unemployment.csv"))?;
    write_macro(&mac.short_term, scratch.join("st_unemployment.csv"))?;
    write_industry_series(&employment, scratch.join("employment.csv"))?;
    let mut files = Vec::new();
    for name in [
        "panel.csv",
        "factors.csv",
        "scheme.csv",
        "deflator.csv",
        "unemployment.csv",
        "lt_unemployment.csv",
        "st_unemployment.csv",
        "employment.csv",
    ] {
        let p = scratch.join(name);
        let bytes = std::fs::read(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        files.push(file(name, bytes));
    }
    let _ = std::fs::remove_dir_all(&scratch);

    let stocks = table(
        &["stock_id", "industry", "beta", "market_loading"],
        sp.stocks
            .iter()
            .map(|s| {
                vec![
                    s.stock_id.to_string(),
                    s.industry.to_string(),
                    s.beta.to_string(),
                    s.market_loading.to_string(),
                ]
            })
            .collect(),
    )?;
    files.push(file("truth_betas.csv", stocks));
    let latent = table(
        &["month", "latent", "shock"],
        sp.latent
            .iter()
            .map(|(m, v)| vec![m.to_string(), v.to_string(), opt(sp.shocks.get(m))])
            .collect(),
    )?;
    files.push(file("truth_dispersion.csv", latent));

    let window = ctx.cfg.beta.window;
    let groups = ctx.cfg.sort.groups;
    let truth = serde_json::json!({
        "config": cfg,
        "beta_reliability": beta_reliability(cfg, window),
        "expected_long_short": expected_long_short(cfg, window, groups),
        "expected_long_short_window": window,
        "expected_long_short_groups": groups,
        "clamped_returns": sp.clamped,
        "macro": mac.truth,
    });
    let mut truth_text = serde_json::to_string_pretty(&truth).map_err(|e| CliError::Internal(e.to_string()))?;
    truth_text.push('\n');
    files.push(file("truth.json", truth_text));

    let mut run = RunConfig {
        out_dir: Some("report".into()),
        beta: ctx.cfg.beta.clone(),
        sort: ctx.cfg.sort.clone(),
        battery: ctx.cfg.battery.clone(),
        dispersion: ctx.cfg.dispersion.clone(),
        synth: cfg.clone(),
        ..RunConfig::default()
    };
    run.inputs.panel = Some("panel.csv".into());
    run.inputs.factors = Some("factors.csv".into());
    run.inputs.scheme = Some("scheme.csv".into());
    run.inputs.scheme_name = Some(sp.scheme.name.clone());
    run.inputs.deflator = Some("deflator.csv".into());
    run.inputs.unemployment = Some("unemployment.csv".into());
    run.inputs.lt_unemployment = Some("lt_unemployment.csv".into());
    run.inputs.st_unemployment = Some("st_unemployment.csv".into());
    run.inputs.employment = Some("employment.csv".into());
    run.sweep.schemes = vec![SchemeFile {
        name: sp.scheme.name.clone(),
        path: "scheme.csv".into(),
    }];
    let text = toml::to_string(&run).map_err(|e| CliError::Internal(format!("config to toml: {e}")))?;
    files.push(file("config.toml", text));
    Ok(files)
}
