use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::econometrics::quantile_sorted;
use crate::panel::MonthId;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Breakpoints {
    /// Balanced split of the ranked cross-section.
    #[default]
    EqualCount,
    /// Interior cut percentiles, e.g. `[0.3, 0.7]` for terciles. A key equal
    /// to a cut falls in the lower group.
    Percentiles(Vec<f64>),
}

impl Breakpoints {
    pub fn groups(&self, q: usize) -> usize {
        match self {
            Breakpoints::EqualCount => q,
            Breakpoints::Percentiles(p) => p.len() + 1,
        }
    }

    fn validate(&self, q: usize) -> Result<()> {
        match self {
            Breakpoints::EqualCount if q == 0 => Err(Error::invalid("quantile count must be positive")),
            Breakpoints::Percentiles(p) => {
                if p.windows(2).any(|w| w[0] >= w[1]) || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::invalid(format!("percentile cuts must increase inside [0, 1], got {p:?}")));
                }
                if p.len() + 1 != q {
                    return Err(Error::invalid(format!("{} cuts give {} groups, not {q}", p.len(), p.len() + 1)));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileAssignment {
    pub month: MonthId,
    pub stock_id: Arc<str>,
    /// 1-based; 1 holds the lowest keys.
    pub quantile: usize,
    pub key: f64,
}

/// Assigns one cross-section to `q` groups. Returns `None` when fewer than `q`
/// stocks are available. Ties are broken by `stock_id`.
pub fn assign_quantiles(
    month: MonthId,
    keys: &[(Arc<str>, f64)],
    q: usize,
    breakpoints: &Breakpoints,
) -> Result<Option<Vec<QuantileAssignment>>> {
    breakpoints.validate(q)?;
    if keys.len() < q {
        return Ok(None);
    }
    let mut sorted: Vec<&(Arc<str>, f64)> = keys.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n = sorted.len();
    let out = match breakpoints {
        Breakpoints::EqualCount => sorted
            .iter()
            .enumerate()
            .map(|(rank, (id, k))| QuantileAssignment {
                month,
                stock_id: id.clone(),
                quantile: rank * q / n + 1,
                key: *k,
            })
            .collect(),
        Breakpoints::Percentiles(p) => {
            let values: Vec<f64> = sorted.iter().map(|x| x.1).collect();
            let cuts: Vec<f64> = p.iter().map(|p| quantile_sorted(&values, *p)).collect();
            sorted
                .iter()
                .map(|(id, k)| QuantileAssignment {
                    month,
                    stock_id: id.clone(),
                    quantile: cuts.iter().filter(|c| *k > **c).count() + 1,
                    key: *k,
                })
                .collect()
        }
    };
    Ok(Some(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortResult {
    pub groups: usize,
    /// Grouped by formation month, each sorted by key.
    pub assignments: BTreeMap<MonthId, Vec<QuantileAssignment>>,
    /// Formation months with fewer stocks than groups.
    pub skipped: Vec<MonthId>,
}

impl SortResult {
    pub fn month(&self, m: MonthId) -> &[QuantileAssignment] {
        self.assignments.get(&m).map_or(&[], Vec::as_slice)
    }
}

/// Runs [`assign_quantiles`] on every formation month.
pub fn sort_by_month(
    keys: &BTreeMap<MonthId, Vec<(Arc<str>, f64)>>,
    q: usize,
    breakpoints: &Breakpoints,
) -> Result<SortResult> {
    let mut out = SortResult {
        groups: breakpoints.groups(q),
        assignments: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (m, k) in keys {
        match assign_quantiles(*m, k, q, breakpoints)? {
            Some(a) => {
                out.assignments.insert(*m, a);
            }
            None => out.skipped.push(*m),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m() -> MonthId {
        MonthId::from_yyyymm(200001).unwrap()
    }

    fn keys(values: &[f64]) -> Vec<(Arc<str>, f64)> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (Arc::from(format!("S{i:03}").as_str()), *v))
            .collect()
    }

    fn groups(a: &[QuantileAssignment]) -> Vec<(String, usize)> {
        let mut v: Vec<_> = a.iter().map(|x| (x.stock_id.to_string(), x.quantile)).collect();
        v.sort();
        v
    }

    #[test]
    fn quintiles_of_ten() {
        let k = keys(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let a = assign_quantiles(m(), &k, 5, &Breakpoints::EqualCount).unwrap().unwrap();
        let q: Vec<usize> = a.iter().map(|x| x.quantile).collect();
        assert_eq!(q, vec![1, 1, 2, 2, 3, 3, 4, 4, 5, 5]);
        assert_eq!(a[0].key, 1.0);
    }

    #[test]
    fn ties_broken_by_id() {
        let k = keys(&[0.5; 10]);
        let a = assign_quantiles(m(), &k, 5, &Breakpoints::EqualCount).unwrap().unwrap();
        let g = groups(&a);
        assert_eq!(g[0], ("S000".into(), 1));
        assert_eq!(g[1], ("S001".into(), 1));
        assert_eq!(g[9], ("S009".into(), 5));
    }

    #[test]
    fn tercile_30_70() {
        let k = keys(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let a = assign_quantiles(m(), &k, 3, &Breakpoints::Percentiles(vec![0.3, 0.7])).unwrap().unwrap();
        let q: Vec<usize> = a.iter().map(|x| x.quantile).collect();
        assert_eq!(q, vec![1, 1, 1, 2, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn too_few_stocks() {
        let k = keys(&[1.0, 2.0, 3.0]);
        assert!(assign_quantiles(m(), &k, 5, &Breakpoints::EqualCount).unwrap().is_none());
        let mut map = BTreeMap::new();
        map.insert(m(), k);
        let s = sort_by_month(&map, 5, &Breakpoints::EqualCount).unwrap();
        assert_eq!(s.skipped, vec![m()]);
    }

    #[test]
    fn bad_cuts_rejected() {
        let k = keys(&[1.0, 2.0, 3.0]);
        assert!(assign_quantiles(m(), &k, 3, &Breakpoints::Percentiles(vec![0.7, 0.3])).is_err());
        assert!(assign_quantiles(m(), &k, 4, &Breakpoints::Percentiles(vec![0.3, 0.7])).is_err());
    }

    proptest! {
        #[test]
        fn balanced_counts(v in prop::collection::vec(-5.0f64..5.0, 5..200), q in 1usize..11) {
            prop_assume!(v.len() >= q);
            let a = assign_quantiles(m(), &keys(&v), q, &Breakpoints::EqualCount).unwrap().unwrap();
            let mut counts = vec![0usize; q];
            for x in &a { counts[x.quantile - 1] += 1; }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }

        #[test]
        fn monotone_transform_keeps_membership(v in prop::collection::vec(-5.0f64..5.0, 10..100)) {
            let a = assign_quantiles(m(), &keys(&v), 5, &Breakpoints::EqualCount).unwrap().unwrap();
            let w: Vec<f64> = v.iter().map(|x| (0.7 * x).exp() * 3.0 + 1.0).collect();
            let b = assign_quantiles(m(), &keys(&w), 5, &Breakpoints::EqualCount).unwrap().unwrap();
            prop_assert_eq!(groups(&a), groups(&b));
        }
    }
}
