use std::path::Path;

use serde::{Deserialize, Serialize};

use super::factors::write_text;
use super::io::{header_positions, open_csv};
use super::ReturnPanel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SicRange {
    pub low: u16,
    pub high: u16,
    pub code: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Explicit inclusive SIC ranges (Fama-French style definitions).
    Ranges(Vec<SicRange>),
    /// Industry = leading `digits` digits of the 4-digit SIC code.
    SicDigits(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndustryScheme {
    pub name: String,
    pub kind: SchemeKind,
}

impl IndustryScheme {
    /// Validates that ranges are well formed, non-overlapping and use codes
    /// in `1..=num_industries`.
    pub fn from_ranges(name: &str, mut ranges: Vec<SicRange>) -> Result<Self> {
        ranges.sort_by_key(|r| (r.low, r.high));
        for r in &ranges {
            if r.low > r.high || r.high > 9999 {
                return Err(Error::invalid(format!(
                    "scheme {name}: bad range {}-{}",
                    r.low, r.high
                )));
            }
            if r.code == 0 {
                return Err(Error::invalid(format!(
                    "scheme {name}: industry codes start at 1"
                )));
            }
        }
        if let Some(w) = ranges.windows(2).find(|w| w[1].low <= w[0].high) {
            return Err(Error::invalid(format!(
                "scheme {name}: ranges {}-{} and {}-{} overlap",
                w[0].low, w[0].high, w[1].low, w[1].high
            )));
        }
        let scheme = IndustryScheme {
            name: name.to_string(),
            kind: SchemeKind::Ranges(ranges),
        };
        let n = scheme.num_industries();
        let mut used = vec![false; n as usize + 1];
        if let SchemeKind::Ranges(rs) = &scheme.kind {
            for r in rs {
                used[r.code as usize] = true;
            }
        }
        if let Some(gap) = (1..=n as usize).find(|c| !used[*c]) {
            return Err(Error::invalid(format!(
                "scheme {name}: industry code {gap} has no SIC range"
            )));
        }
        Ok(scheme)
    }

    /// Builtin `SIC1`..`SIC4` truncation schemes.
    pub fn builtin(name: &str) -> Result<Self> {
        let digits = name
            .strip_prefix("SIC")
            .and_then(|d| d.parse::<u8>().ok())
            .filter(|d| (1..=4).contains(d))
            .ok_or_else(|| Error::invalid(format!("unknown builtin scheme `{name}`")))?;
        Ok(IndustryScheme {
            name: name.to_string(),
            kind: SchemeKind::SicDigits(digits),
        })
    }

    pub fn num_industries(&self) -> u32 {
        match &self.kind {
            SchemeKind::Ranges(rs) => rs.iter().map(|r| r.code).max().unwrap_or(0),
            SchemeKind::SicDigits(d) => 10u32.pow(*d as u32),
        }
    }

    pub fn industry_of(&self, sic: u16) -> Option<u32> {
        match &self.kind {
            SchemeKind::SicDigits(d) => Some(sic as u32 / 10u32.pow(4 - *d as u32)),
            SchemeKind::Ranges(rs) => {
                let i = rs.partition_point(|r| r.low <= sic);
                let r = rs.get(i.checked_sub(1)?)?;
                (sic <= r.high).then_some(r.code)
            }
        }
    }
}

/// Annotates every observation with its industry under `scheme`. Missing or
/// unmapped SIC codes leave the observation unclassified.
pub fn classify(panel: &ReturnPanel, scheme: &IndustryScheme) -> ReturnPanel {
    let industries = panel
        .observations()
        .iter()
        .map(|o| o.sic.and_then(|s| scheme.industry_of(s)))
        .collect();
    panel.with_industries(industries, &scheme.name)
}

/// Reads `sic_low,sic_high,industry_code,industry_name` rows.
pub fn load_scheme(path: impl AsRef<Path>, name: &str) -> Result<IndustryScheme> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let pos = header_positions(
        path,
        &mut reader,
        &["sic_low", "sic_high", "industry_code"],
        &["industry_name"],
    )?;
    let mut ranges = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let row_err = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        let int = |col: &str| -> std::result::Result<u32, String> {
            let f = record.get(pos[col]).unwrap_or("");
            f.parse().map_err(|_| format!("{col}: cannot parse `{f}`"))
        };
        let low = int("sic_low").map_err(row_err)?;
        let high = int("sic_high").map_err(row_err)?;
        if low > 9999 || high > 9999 {
            return Err(row_err("SIC codes have at most 4 digits".into()));
        }
        ranges.push(SicRange {
            low: low as u16,
            high: high as u16,
            code: int("industry_code").map_err(row_err)?,
            name: pos
                .get("industry_name")
                .and_then(|p| record.get(*p))
                .unwrap_or("")
                .to_string(),
        });
    }
    IndustryScheme::from_ranges(name, ranges)
}

pub fn write_scheme(scheme: &IndustryScheme, path: impl AsRef<Path>) -> Result<()> {
    let SchemeKind::Ranges(ranges) = &scheme.kind else {
        return Err(Error::invalid("only range schemes are written to file"));
    };
    let mut text = String::from("sic_low,sic_high,industry_code,industry_name\n");
    for r in ranges {
        text.push_str(&format!("{},{},{},{}\n", r.low, r.high, r.code, r.name));
    }
    write_text(path.as_ref(), &text)
}
