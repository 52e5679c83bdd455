use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Frequency, MacroSeries, MonthId, ReturnPanel};
use crate::{Error, Result};

/// Price and real-size screens. `min_real_cap` is expressed in currency units
/// of `base_month` as measured by the deflator index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub min_price: f64,
    pub min_real_cap: f64,
    pub base_month: MonthId,
}

/// Keeps `(stock, t)` iff the stock's previous-year-end price exceeds
/// `min_price` and its deflated cap at `t` exceeds `min_real_cap`.
///
/// The year-end price is the December observation when present, else the
/// latest priced observation of that calendar year. Stocks without one are
/// dropped for the following year, as are observations without a cap.
pub fn apply_screens(
    panel: &ReturnPanel,
    config: &ScreenConfig,
    deflator: &MacroSeries,
) -> Result<ReturnPanel> {
    if deflator.frequency != Frequency::Monthly {
        return Err(Error::invalid("deflator must be a monthly series"));
    }
    let base = deflator
        .value(config.base_month)
        .ok_or_else(|| Error::Misaligned(format!("deflator has no value at base month {}", config.base_month)))?;
    for m in panel.months() {
        match deflator.value(m) {
            Some(v) if v > 0.0 => {}
            Some(v) => return Err(Error::invalid(format!("deflator must be positive, got {v} at {m}"))),
            None => return Err(Error::Misaligned(format!("deflator gap at {m}"))),
        }
    }

    // Observations are sorted by month, so the last write per (stock, year) wins.
    let mut year_end: HashMap<(&str, u32), f64> = HashMap::new();
    for o in panel.observations() {
        if let Some(p) = o.price {
            year_end.insert((&o.stock_id, o.month.year()), p);
        }
    }
    let keep: std::collections::HashSet<usize> = panel
        .observations()
        .iter()
        .enumerate()
        .filter(|(_, o)| {
            let price_ok = o
                .month
                .year()
                .checked_sub(1)
                .and_then(|y| year_end.get(&(&*o.stock_id, y)))
                .is_some_and(|p| *p > config.min_price);
            let cap_ok = o.market_cap.is_some_and(|c| {
                let index = deflator.value(o.month).unwrap_or(f64::NAN);
                c * base / index > config.min_real_cap
            });
            price_ok && cap_ok
        })
        .map(|(i, _)| i)
        .collect();
    let mut i = 0;
    Ok(panel.retain(|_| {
        let k = keep.contains(&i);
        i += 1;
        k
    }))
}
