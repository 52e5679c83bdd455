use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Calendar month encoded as `year * 100 + month` (e.g. `196307`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct MonthId(u32);

impl MonthId {
    pub fn new(year: u32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) || year > 9999 {
            return Err(Error::InvalidMonth(format!("{year:04}-{month:02}")));
        }
        Ok(MonthId(year * 100 + month))
    }

    pub fn from_yyyymm(value: u32) -> Result<Self> {
        Self::new(value / 100, value % 100)
    }

    pub fn yyyymm(self) -> u32 {
        self.0
    }

    pub fn year(self) -> u32 {
        self.0 / 100
    }

    pub fn month(self) -> u32 {
        self.0 % 100
    }

    /// Months since year 0; differences of ordinals count calendar months.
    pub fn ordinal(self) -> i64 {
        self.year() as i64 * 12 + self.month() as i64 - 1
    }

    pub fn from_ordinal(ordinal: i64) -> Result<Self> {
        if ordinal < 0 {
            return Err(Error::InvalidMonth(ordinal.to_string()));
        }
        Self::new((ordinal / 12) as u32, (ordinal % 12) as u32 + 1)
    }

    pub fn add_months(self, delta: i64) -> Self {
        Self::from_ordinal(self.ordinal() + delta).expect("month arithmetic out of range")
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    pub fn months_between(self, later: MonthId) -> i64 {
        later.ordinal() - self.ordinal()
    }

    /// Quarter number 1..=4.
    pub fn quarter(self) -> u32 {
        (self.month() - 1) / 3 + 1
    }

    /// Last month of the quarter containing `self`.
    pub fn quarter_end(self) -> Self {
        MonthId(self.year() * 100 + self.quarter() * 3)
    }

    pub fn is_quarter_end(self) -> bool {
        self.month() % 3 == 0
    }

    /// Parses `YYYYMM` or `YYYYQn`; quarters map to their last month.
    pub fn parse_period(text: &str) -> Result<(Self, bool)> {
        let t = text.trim();
        if let Some(pos) = t.find(['Q', 'q']) {
            let (y, q) = (&t[..pos], &t[pos + 1..]);
            let year: u32 = y.parse().map_err(|_| Error::InvalidMonth(t.to_string()))?;
            let quarter: u32 = q.parse().map_err(|_| Error::InvalidMonth(t.to_string()))?;
            if !(1..=4).contains(&quarter) || y.len() != 4 {
                return Err(Error::InvalidMonth(t.to_string()));
            }
            return Ok((Self::new(year, quarter * 3)?, true));
        }
        Ok((t.parse()?, false))
    }

    pub fn format_quarter(self) -> String {
        format!("{:04}Q{}", self.year(), self.quarter())
    }
}

impl FromStr for MonthId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.len() != 6 || !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidMonth(t.to_string()));
        }
        Self::from_yyyymm(t.parse().map_err(|_| Error::InvalidMonth(t.to_string()))?)
    }
}

impl TryFrom<u32> for MonthId {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Self::from_yyyymm(value)
    }
}

impl From<MonthId> for u32 {
    fn from(m: MonthId) -> u32 {
        m.0
    }
}

impl fmt::Display for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06}", self.0)
    }
}

impl fmt::Debug for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonthId({:06})", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_months() {
        assert!(MonthId::from_yyyymm(196313).is_err());
        assert!(MonthId::from_yyyymm(196300).is_err());
        assert!("19631".parse::<MonthId>().is_err());
        assert_eq!("196307".parse::<MonthId>().unwrap().month(), 7);
    }

    #[test]
    fn crosses_year_boundaries() {
        let dec = MonthId::new(1999, 12).unwrap();
        assert_eq!(dec.succ(), MonthId::new(2000, 1).unwrap());
        assert_eq!(dec.succ().pred(), dec);
        assert_eq!(dec.add_months(-12), MonthId::new(1998, 12).unwrap());
    }

    #[test]
    fn parses_quarters() {
        let (m, q) = MonthId::parse_period("1948Q2").unwrap();
        assert!(q);
        assert_eq!(m.yyyymm(), 194806);
        assert_eq!(m.format_quarter(), "1948Q2");
        assert!(MonthId::parse_period("1948Q5").is_err());
        assert_eq!(MonthId::new(2001, 5).unwrap().quarter_end().yyyymm(), 200106);
    }

    proptest! {
        #[test]
        fn ordering_matches_ordinal(a in 0i64..30_000, b in 0i64..30_000) {
            let ma = MonthId::from_ordinal(a).unwrap();
            let mb = MonthId::from_ordinal(b).unwrap();
            prop_assert_eq!(ma.cmp(&mb), a.cmp(&b));
            prop_assert_eq!(ma.succ().pred(), ma);
            prop_assert_eq!(ma.months_between(mb), b - a);
        }
    }
}
