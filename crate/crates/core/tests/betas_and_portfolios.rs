use std::collections::BTreeMap;
use std::sync::Arc;

use cidlab_core::beta::{rolling_betas, BetaConfig};
use cidlab_core::panel::Frequency;
use cidlab_core::portfolio::{
    double_sort, double_sort_returns, portfolio_returns, sort_by_month, Breakpoints, Weighting,
};
use cidlab_core::synth::SplitMix64;
use cidlab_core::{MonthId, ReturnPanel, Series, StockObservation};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

type Keys = BTreeMap<MonthId, Vec<(Arc<str>, f64)>>;

fn month(i: i64) -> MonthId {
    MonthId::from_yyyymm(200001).unwrap().add_months(i)
}

/// Stocks with random gaps; each return loads on `u` with a stock-specific slope.
fn gappy_panel(g: &mut SplitMix64, u: &Series, stocks: usize) -> ReturnPanel {
    let mut obs = Vec::new();
    for s in 0..stocks {
        let b = g.normal();
        for (m, x) in u.iter() {
            if g.uniform() < 0.15 {
                continue;
            }
            let r = 0.01 + b * x + 0.05 * g.normal();
            obs.push(StockObservation::new(&format!("S{s:03}"), m, r).with_cap(1.0 + g.uniform()));
        }
    }
    ReturnPanel::new(obs).unwrap()
}

fn slope_by_normal_equations(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let xm = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let yv = DVector::from_column_slice(y);
    let b = (xm.transpose() * &xm).try_inverse().unwrap() * xm.transpose() * yv;
    b[1]
}

#[test]
fn rolling_betas_match_window_regressions() {
    let mut g = SplitMix64::new(4);
    let u = Series::new((0..60).map(month).collect(), (0..60).map(|_| 0.02 * g.normal()).collect()).unwrap();
    let panel = gappy_panel(&mut g, &u, 25);
    let cfg = BetaConfig {
        window: 12,
        min_obs: 9,
        winsor: (0.0, 1.0),
        market_control: false,
        frequency: Frequency::Monthly,
    };
    let betas = rolling_betas(&panel, &u, None, &cfg).unwrap();
    let mut checked = 0;
    for (id, idx) in panel.by_stock() {
        let rows: Vec<(MonthId, f64)> = idx.iter().map(|&i| (panel.observations()[i].month, panel.observations()[i].excess_return)).collect();
        for &(end, _) in &rows {
            let start = end.add_months(-11);
            let window: Vec<(f64, f64)> = rows
                .iter()
                .filter(|(m, _)| *m >= start && *m <= end)
                .map(|(m, r)| (u.get(*m).unwrap(), *r))
                .collect();
            let got = betas.get(&id, end);
            if window.len() < 9 {
                assert!(got.is_none(), "{id} {end:?} has only {} observations", window.len());
                continue;
            }
            let (x, y): (Vec<f64>, Vec<f64>) = window.into_iter().unzip();
            let expected = slope_by_normal_equations(&x, &y);
            let got = got.expect("window long enough");
            assert!((got.beta - expected).abs() < 1e-10, "{id} {end:?}");
            assert_eq!(got.nobs, x.len());
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn betas_use_no_future_returns() {
    let mut g = SplitMix64::new(6);
    let u = Series::new((0..48).map(month).collect(), (0..48).map(|_| 0.02 * g.normal()).collect()).unwrap();
    let panel = gappy_panel(&mut g, &u, 10);
    let cut = month(30);
    let truncated = panel.retain(|o| o.month <= cut);
    let cfg = BetaConfig::default();
    let full = rolling_betas(&panel, &u, None, &BetaConfig { winsor: (0.0, 1.0), ..cfg }).unwrap();
    let early = rolling_betas(&truncated, &u, None, &BetaConfig { winsor: (0.0, 1.0), ..cfg }).unwrap();
    for e in early.entries() {
        assert_eq!(full.get(&e.stock_id, e.month).unwrap().beta, e.beta);
    }
}

fn cross_section(g: &mut SplitMix64, months: i64, stocks: usize) -> (ReturnPanel, Keys) {
    let mut obs = Vec::new();
    let mut keys = Keys::new();
    for t in 0..months {
        let mut k = Vec::new();
        for s in 0..stocks {
            let id = format!("S{s:03}");
            obs.push(StockObservation::new(&id, month(t), 0.1 * g.normal()).with_cap(1.0 + 9.0 * g.uniform()));
            k.push((Arc::from(id.as_str()), g.normal()));
        }
        keys.insert(month(t), k);
    }
    (ReturnPanel::new(obs).unwrap(), keys)
}

#[test]
fn group_by_oracle() {
    let mut g = SplitMix64::new(12);
    let (panel, keys) = cross_section(&mut g, 13, 37);
    let sort = sort_by_month(&keys, 5, &Breakpoints::EqualCount).unwrap();
    let vw = portfolio_returns(&panel, &sort, Weighting::Value);
    for (formation, k) in &keys {
        let holding = formation.succ();
        if holding > month(12) {
            continue;
        }
        let mut ranked = k.clone();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        for q in 0..5 {
            // Rank r goes to group floor(r * 5 / n).
            let members: Vec<&str> = ranked
                .iter()
                .enumerate()
                .filter(|(r, _)| r * 5 / ranked.len() == q)
                .map(|(_, (id, _))| id.as_ref())
                .collect();
            let (mut num, mut den) = (0.0, 0.0);
            for id in &members {
                let cap = panel.month(*formation).iter().find(|o| o.stock_id.as_ref() == *id).unwrap().market_cap.unwrap();
                let r = panel.month(holding).iter().find(|o| o.stock_id.as_ref() == *id).unwrap().excess_return;
                num += cap * r;
                den += cap;
            }
            let i = vw[q].months.iter().position(|m| *m == holding).unwrap();
            assert!((vw[q].returns[i].unwrap() - num / den).abs() < 1e-14);
            assert_eq!(vw[q].counts[i], members.len());
        }
    }
}

#[test]
fn two_by_three_double_sort_oracle() {
    // Control key a splits in halves; key b in terciles. Returns make each
    // cell's mean easy to read off.
    let ids = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"];
    let ka = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
    let kb = [3.0, 1.0, 2.0, 6.0, 5.0, 4.0, 9.0, 7.0, 8.0, 12.0, 10.0, 11.0];
    let mut obs = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        obs.push(StockObservation::new(id, month(0), 0.0).with_cap(1.0));
        obs.push(StockObservation::new(id, month(1), i as f64 / 100.0).with_cap(1.0));
    }
    let panel = ReturnPanel::new(obs).unwrap();
    let to_keys = |k: &[f64]| -> Keys {
        let mut m = Keys::new();
        m.insert(month(0), ids.iter().zip(k).map(|(id, v)| (Arc::from(*id), *v)).collect());
        m
    };
    let sort = double_sort(
        &to_keys(&ka),
        &to_keys(&kb),
        (2, &Breakpoints::EqualCount),
        (3, &Breakpoints::EqualCount),
    )
    .unwrap();
    // Halves on a: a..f low, g..l high. Terciles on b: {b,c,a,f} {e,d,h,i} {g,k,l,j}.
    assert_eq!(sort.cell_counts(month(0)), vec![vec![4, 2, 0], vec![0, 2, 4]]);
    let rep = double_sort_returns(&panel, &sort, Weighting::Equal);
    let cell = |label: &str| rep.cells.iter().find(|c| c.label == label).unwrap().returns[0];
    let close = |a: Option<f64>, b: f64| (a.unwrap() - b / 100.0).abs() < 1e-15;
    assert!(close(cell("A1B1"), 2.0));
    assert!(close(cell("A1B2"), 3.5));
    assert!(close(cell("A2B2"), 7.5));
    assert!(close(cell("A2B3"), 9.0));
    assert_eq!(cell("A1B3"), None);
    assert_eq!(cell("A2B1"), None);
    assert_eq!(rep.empty_cells, vec![(month(1), 2)]);

    // Low minus high, each side averaged over its populated cells.
    assert!(close(rep.ls_a.returns[0], (2.0 + 3.5) / 2.0 - (7.5 + 9.0) / 2.0));
    assert!(close(rep.ls_b.returns[0], 2.0 - 9.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn memberships_survive_monotone_transforms(seed in any::<u64>(), q in 2usize..8, a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let mut g = SplitMix64::new(seed);
        let (_, keys) = cross_section(&mut g, 4, 40);
        let moved: Keys = keys
            .iter()
            .map(|(m, k)| (*m, k.iter().map(|(id, v)| (id.clone(), a * v.tanh() + b)).collect()))
            .collect();
        let x = sort_by_month(&keys, q, &Breakpoints::EqualCount).unwrap();
        let y = sort_by_month(&moved, q, &Breakpoints::EqualCount).unwrap();
        for (m, assigned) in &x.assignments {
            let other = &y.assignments[m];
            for (p, r) in assigned.iter().zip(other) {
                prop_assert_eq!(&p.stock_id, &r.stock_id);
                prop_assert_eq!(p.quantile, r.quantile);
            }
        }
    }

    #[test]
    fn weights_and_aggregation(seed in any::<u64>(), q in 2usize..7, stocks in 10usize..60) {
        let mut g = SplitMix64::new(seed);
        let (panel, keys) = cross_section(&mut g, 3, stocks);
        let sort = sort_by_month(&keys, q, &Breakpoints::EqualCount).unwrap();
        let ones = panel.map_returns(|_, _| 1.0).unwrap();
        for p in portfolio_returns(&ones, &sort, Weighting::Value) {
            for r in p.returns.iter().flatten() {
                prop_assert!((r - 1.0).abs() <= 1e-12);
            }
        }
        let ew = portfolio_returns(&panel, &sort, Weighting::Equal);
        for (i, holding) in ew[0].months.iter().enumerate() {
            let all: Vec<f64> = panel.month(*holding).iter().map(|o| o.excess_return).collect();
            let direct = all.iter().sum::<f64>() / all.len() as f64;
            let total: usize = ew.iter().map(|p| p.counts[i]).sum();
            let pooled = ew.iter().map(|p| p.returns[i].unwrap() * p.counts[i] as f64).sum::<f64>() / total as f64;
            prop_assert!((pooled - direct).abs() <= 1e-12);
        }
    }
}
