//! Month-indexed scalar series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, MonthId, Result};

/// A month-indexed series with strictly increasing months and finite values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    months: Vec<MonthId>,
    values: Vec<f64>,
}

impl Series {
    pub fn new(months: Vec<MonthId>, values: Vec<f64>) -> Result<Self> {
        if months.len() != values.len() {
            return Err(Error::Misaligned(format!(
                "{} months vs {} values",
                months.len(),
                values.len()
            )));
        }
        if let Some(w) = months.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Misaligned(format!(
                "months not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at {}", months[i])));
        }
        Ok(Series { months, values })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (MonthId, f64)>) -> Result<Self> {
        let (months, values) = pairs.into_iter().unzip();
        Self::new(months, values)
    }

    pub fn from_map(map: &BTreeMap<MonthId, f64>) -> Result<Self> {
        Self::from_pairs(map.iter().map(|(m, v)| (*m, *v)))
    }

    pub fn months(&self) -> &[MonthId] {
        &self.months
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MonthId, f64)> + '_ {
        self.months.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, month: MonthId) -> Option<f64> {
        self.months
            .binary_search(&month)
            .ok()
            .map(|i| self.values[i])
    }

    pub fn to_map(&self) -> BTreeMap<MonthId, f64> {
        self.iter().collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Series> {
        Series::new(self.months.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Restricts to months within `[start, end]`.
    pub fn window(&self, start: MonthId, end: MonthId) -> Series {
        let (months, values) = self
            .iter()
            .filter(|(m, _)| *m >= start && *m <= end)
            .unzip();
        Series { months, values }
    }

    /// Splits into runs of consecutive calendar months.
    pub fn contiguous_blocks(&self) -> Vec<Series> {
        self.contiguous_blocks_step(1)
    }

    /// Splits into runs whose months are `step` apart (3 for quarterly data).
    pub fn contiguous_blocks_step(&self, step: i64) -> Vec<Series> {
        let mut out: Vec<Series> = Vec::new();
        for (m, v) in self.iter() {
            match out.last_mut() {
                Some(block) if block.months.last().map(|l| l.add_months(step)) == Some(m) => {
                    block.months.push(m);
                    block.values.push(v);
                }
                _ => out.push(Series {
                    months: vec![m],
                    values: vec![v],
                }),
            }
        }
        out
    }
}

/// Months present in every series, in order.
pub fn common_months(series: &[&Series]) -> Vec<MonthId> {
    let Some((first, rest)) = series.split_first() else {
        return Vec::new();
    };
    first
        .months()
        .iter()
        .copied()
        .filter(|m| rest.iter().all(|s| s.get(*m).is_some()))
        .collect()
}
