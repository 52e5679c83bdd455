use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{header_positions, open_csv, parse_f64};
use super::MonthId;
use crate::{Error, Result, Series};

/// Columns accepted in a factor file.
pub const FACTOR_COLUMNS: [&str; 8] = ["MKT_RF", "SMB", "HML", "RMW", "CMA", "MOM", "STR", "RF"];

/// Month-indexed factor returns. Every column has a value at every month.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    months: Vec<MonthId>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FactorTable {
    pub fn new(months: Vec<MonthId>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::invalid("column names and data differ in length"));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::invalid(format!("duplicate factor column `{n}`")));
            }
        }
        if let Some(w) = months.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Misaligned(format!(
                "factor months not strictly increasing at {}",
                w[1]
            )));
        }
        for (n, c) in names.iter().zip(&columns) {
            if c.len() != months.len() {
                return Err(Error::Misaligned(format!("column `{n}` has {} values", c.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("column `{n}` has non-finite values")));
            }
        }
        Ok(FactorTable {
            months,
            names,
            columns,
        })
    }

    /// A single-column table, e.g. a long-short portfolio registered as a factor.
    pub fn from_series(name: &str, series: &Series) -> Result<Self> {
        Self::new(
            series.months().to_vec(),
            vec![name.to_string()],
            vec![series.values().to_vec()],
        )
    }

    pub fn months(&self) -> &[MonthId] {
        &self.months
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Fails with [`Error::MissingColumn`] naming the first absent column.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        match names.iter().find(|n| !self.has(n)) {
            Some(n) => Err(Error::MissingColumn(n.to_string())),
            None => Ok(()),
        }
    }

    pub fn column(&self, name: &str) -> Result<Series> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Series::new(self.months.clone(), self.columns[i].clone())
    }

    pub fn value(&self, name: &str, month: MonthId) -> Option<f64> {
        let c = self.names.iter().position(|n| n == name)?;
        let r = self.months.binary_search(&month).ok()?;
        Some(self.columns[c][r])
    }

    /// Joins on common months. Column names must not collide.
    pub fn join(&self, other: &FactorTable) -> Result<FactorTable> {
        let rows: Vec<(usize, usize)> = self
            .months
            .iter()
            .enumerate()
            .filter_map(|(i, m)| other.months.binary_search(m).ok().map(|j| (i, j)))
            .collect();
        let months = rows.iter().map(|(i, _)| self.months[*i]).collect();
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut columns: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|(i, _)| c[*i]).collect())
            .collect();
        columns.extend(
            other
                .columns
                .iter()
                .map(|c| rows.iter().map(|(_, j)| c[*j]).collect()),
        );
        FactorTable::new(months, names, columns)
    }

    pub fn with_column(&self, name: &str, series: &Series) -> Result<FactorTable> {
        self.join(&FactorTable::from_series(name, series)?)
    }
}

/// Reads `month,MKT_RF,SMB,HML,RMW,CMA,MOM,STR,RF` (any non-empty subset of
/// factor columns).
pub fn load_factors(path: impl AsRef<Path>) -> Result<FactorTable> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let pos = header_positions(path, &mut reader, &["month"], &FACTOR_COLUMNS)?;
    let names: Vec<String> = FACTOR_COLUMNS
        .iter()
        .filter(|c| pos.contains_key(**c))
        .map(|c| c.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Header {
            path: path.into(),
            message: "no factor columns".into(),
        });
    }
    let mut months = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let row_err = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        let month: MonthId = record
            .get(pos["month"])
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| row_err(e.to_string()))?;
        if months.last().is_some_and(|last| *last >= month) {
            return Err(row_err(format!("month {month} out of order or repeated")));
        }
        months.push(month);
        for (c, name) in names.iter().enumerate() {
            let v = parse_f64(record.get(pos[name]).unwrap_or(""), name).map_err(row_err)?;
            columns[c].push(v);
        }
    }
    FactorTable::new(months, names, columns)
}

pub fn write_factors(table: &FactorTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("month");
    for n in table.names() {
        text.push(',');
        text.push_str(n);
    }
    text.push('\n');
    for (r, m) in table.months().iter().enumerate() {
        text.push_str(&m.to_string());
        for c in &table.columns {
            text.push_str(&format!(",{}", c[r]));
        }
        text.push('\n');
    }
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    #[default]
    Monthly,
    Quarterly,
}

impl Frequency {
    /// Calendar months per period.
    pub fn step(self) -> i64 {
        match self {
            Frequency::Monthly => 1,
            Frequency::Quarterly => 3,
        }
    }
}

/// A labelled macro series. Quarterly periods are stored at the quarter's
/// last month.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroSeries {
    pub label: String,
    pub frequency: Frequency,
    pub series: Series,
}

impl MacroSeries {
    pub fn new(label: &str, frequency: Frequency, series: Series) -> Result<Self> {
        if frequency == Frequency::Quarterly {
            if let Some(m) = series.months().iter().find(|m| !m.is_quarter_end()) {
                return Err(Error::Misaligned(format!(
                    "quarterly series `{label}` has non quarter-end period {m}"
                )));
            }
        }
        Ok(MacroSeries {
            label: label.to_string(),
            frequency,
            series,
        })
    }

    pub fn value(&self, period: MonthId) -> Option<f64> {
        self.series.get(period)
    }

    pub fn format_period(&self, m: MonthId) -> String {
        match self.frequency {
            Frequency::Monthly => m.to_string(),
            Frequency::Quarterly => m.format_quarter(),
        }
    }
}

/// Reads `period,value` with `YYYYMM` or `YYYYQn` periods (not mixed).
pub fn load_macro(path: impl AsRef<Path>, label: &str) -> Result<MacroSeries> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let pos = header_positions(path, &mut reader, &["period", "value"], &[])?;
    let mut freq = None;
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let row_err = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        let (period, quarterly) = MonthId::parse_period(record.get(pos["period"]).unwrap_or(""))
            .map_err(|e| row_err(e.to_string()))?;
        let f = if quarterly {
            Frequency::Quarterly
        } else {
            Frequency::Monthly
        };
        if *freq.get_or_insert(f) != f {
            return Err(row_err("mixed monthly and quarterly periods".into()));
        }
        let value = parse_f64(record.get(pos["value"]).unwrap_or(""), "value").map_err(row_err)?;
        if pairs
            .last()
            .is_some_and(|(last, _): &(MonthId, f64)| *last >= period)
        {
            return Err(row_err(format!("period {period} out of order or repeated")));
        }
        pairs.push((period, value));
    }
    MacroSeries::new(label, freq.unwrap_or_default(), Series::from_pairs(pairs)?)
}

pub fn write_macro(series: &MacroSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::from("period,value\n");
    for (m, v) in series.series.iter() {
        text.push_str(&format!("{},{}\n", series.format_period(m), v));
    }
    write_text(path.as_ref(), &text)
}

/// Reads a long `period,industry,value` file into one series per industry,
/// ordered by industry label.
pub fn load_industry_series(path: impl AsRef<Path>) -> Result<Vec<(String, MacroSeries)>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let pos = header_positions(path, &mut reader, &["period", "industry", "value"], &[])?;
    let mut freq = None;
    let mut by: std::collections::BTreeMap<String, Vec<(MonthId, f64)>> = Default::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let row_err = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        let (period, quarterly) = MonthId::parse_period(record.get(pos["period"]).unwrap_or(""))
            .map_err(|e| row_err(e.to_string()))?;
        let f = if quarterly { Frequency::Quarterly } else { Frequency::Monthly };
        if *freq.get_or_insert(f) != f {
            return Err(row_err("mixed monthly and quarterly periods".into()));
        }
        let industry = record.get(pos["industry"]).unwrap_or("").trim().to_string();
        if industry.is_empty() {
            return Err(row_err("empty industry".into()));
        }
        let value = parse_f64(record.get(pos["value"]).unwrap_or(""), "value").map_err(row_err)?;
        let rows = by.entry(industry.clone()).or_default();
        if rows.last().is_some_and(|(last, _)| *last >= period) {
            return Err(row_err(format!("period {period} out of order or repeated for `{industry}`")));
        }
        rows.push((period, value));
    }
    let freq = freq.unwrap_or_default();
    by.into_iter()
        .map(|(k, v)| Ok((k.clone(), MacroSeries::new(&k, freq, Series::from_pairs(v)?)?)))
        .collect()
}

/// Writes series in the long `period,industry,value` layout.
pub fn write_industry_series(series: &[(String, MacroSeries)], path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::from("period,industry,value\n");
    for (name, s) in series {
        for (m, v) in s.series.iter() {
            text.push_str(&format!("{},{},{}\n", s.format_period(m), name, v));
        }
    }
    write_text(path.as_ref(), &text)
}
