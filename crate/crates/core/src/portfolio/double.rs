use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::assign::{assign_quantiles, Breakpoints};
use super::returns::{cell_return, PortfolioSeries, Weighting};
use crate::panel::{MonthId, ReturnPanel};
use crate::Result;

/// Independent two-way sort; cell `(a, b)` is 1-based on each margin.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleSort {
    pub groups_a: usize,
    pub groups_b: usize,
    pub assignments: BTreeMap<MonthId, Vec<(Arc<str>, usize, usize)>>,
    pub skipped: Vec<MonthId>,
}

impl DoubleSort {
    pub fn cell_counts(&self, month: MonthId) -> Vec<Vec<usize>> {
        let mut c = vec![vec![0; self.groups_b]; self.groups_a];
        for (_, a, b) in self.assignments.get(&month).map_or(&[][..], Vec::as_slice) {
            c[a - 1][b - 1] += 1;
        }
        c
    }
}

/// Sorts each month independently on both keys; only stocks carrying both
/// keys enter either sort.
pub fn double_sort(
    keys_a: &BTreeMap<MonthId, Vec<(Arc<str>, f64)>>,
    keys_b: &BTreeMap<MonthId, Vec<(Arc<str>, f64)>>,
    (qa, bp_a): (usize, &Breakpoints),
    (qb, bp_b): (usize, &Breakpoints),
) -> Result<DoubleSort> {
    let mut out = DoubleSort {
        groups_a: bp_a.groups(qa),
        groups_b: bp_b.groups(qb),
        assignments: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (m, ka) in keys_a {
        let Some(kb) = keys_b.get(m) else { continue };
        let b_map: HashMap<&str, f64> = kb.iter().map(|(id, v)| (id.as_ref(), *v)).collect();
        let both_a: Vec<(Arc<str>, f64)> = ka.iter().filter(|(id, _)| b_map.contains_key(id.as_ref())).cloned().collect();
        let both_b: Vec<(Arc<str>, f64)> = both_a.iter().map(|(id, _)| (id.clone(), b_map[id.as_ref()])).collect();
        let (Some(ga), Some(gb)) = (
            assign_quantiles(*m, &both_a, qa, bp_a)?,
            assign_quantiles(*m, &both_b, qb, bp_b)?,
        ) else {
            out.skipped.push(*m);
            continue;
        };
        let b_of: HashMap<&str, usize> = gb.iter().map(|x| (x.stock_id.as_ref(), x.quantile)).collect();
        let mut cells: Vec<(Arc<str>, usize, usize)> =
            ga.iter().map(|x| (x.stock_id.clone(), x.quantile, b_of[x.stock_id.as_ref()])).collect();
        cells.sort_by(|x, y| x.0.cmp(&y.0));
        out.assignments.insert(*m, cells);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleSortReport {
    /// Row-major over `(a, b)`, labelled `A{a}B{b}`.
    pub cells: Vec<PortfolioSeries>,
    /// Low-minus-high on the first key, averaged across the second.
    pub ls_a: PortfolioSeries,
    /// Low-minus-high on the second key, averaged across the first.
    pub ls_b: PortfolioSeries,
    /// Empty cells per holding month.
    pub empty_cells: Vec<(MonthId, usize)>,
}

fn row_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Cell returns and the conditional long-short legs. Empty cells are left out
/// of each side's average, which is rescaled to the populated count; a side
/// with no populated cell makes that month's leg missing.
pub fn double_sort_returns(panel: &ReturnPanel, sort: &DoubleSort, weighting: Weighting) -> DoubleSortReport {
    let (ga, gb) = (sort.groups_a, sort.groups_b);
    let series = |label: String| PortfolioSeries {
        label,
        months: Vec::new(),
        returns: Vec::new(),
        weighting,
        counts: Vec::new(),
    };
    let mut cells: Vec<PortfolioSeries> = (0..ga * gb)
        .map(|i| series(format!("A{}B{}", i / gb + 1, i % gb + 1)))
        .collect();
    let mut ls_a = series("L/S A".into());
    let mut ls_b = series("L/S B".into());
    let mut empty_cells = Vec::new();
    let last = panel.month_range().map(|r| r.1);
    for (formation, members) in &sort.assignments {
        let holding = formation.succ();
        if last.is_none_or(|l| holding > l) {
            continue;
        }
        let mut groups: Vec<Vec<&Arc<str>>> = vec![Vec::new(); ga * gb];
        for (id, a, b) in members {
            groups[(a - 1) * gb + (b - 1)].push(id);
        }
        let mut r = vec![None; ga * gb];
        let mut empty = 0;
        for (i, g) in groups.iter().enumerate() {
            let (ret, n) = cell_return(panel, holding, g, weighting);
            cells[i].months.push(holding);
            cells[i].returns.push(ret);
            cells[i].counts.push(n);
            r[i] = ret;
            if ret.is_none() {
                empty += 1;
            }
        }
        empty_cells.push((holding, empty));
        let cell = |a: usize, b: usize| r[a * gb + b];
        let a_leg = match (row_mean((0..gb).map(|b| cell(0, b))), row_mean((0..gb).map(|b| cell(ga - 1, b)))) {
            (Some(lo), Some(hi)) => Some(lo - hi),
            _ => None,
        };
        let b_leg = match (row_mean((0..ga).map(|a| cell(a, 0))), row_mean((0..ga).map(|a| cell(a, gb - 1)))) {
            (Some(lo), Some(hi)) => Some(lo - hi),
            _ => None,
        };
        for (leg, v) in [(&mut ls_a, a_leg), (&mut ls_b, b_leg)] {
            leg.months.push(holding);
            leg.returns.push(v);
            leg.counts.push(members.len());
        }
    }
    DoubleSortReport {
        cells,
        ls_a,
        ls_b,
        empty_cells,
    }
}
