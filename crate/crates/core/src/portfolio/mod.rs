//! Quantile sorts, portfolio returns, long-short legs and characteristics.
//!
//! Portfolios are formed at the end of month `m` from information through `m`
//! and held over `m + 1`. Value weights are market caps at `m`.

mod assign;
mod characteristics;
mod double;
mod returns;

pub use assign::{assign_quantiles, sort_by_month, Breakpoints, QuantileAssignment, SortResult};
pub use characteristics::{characteristic_keys, characteristics, Characteristic, CharacteristicsTable};
pub use double::{double_sort, double_sort_returns, DoubleSort, DoubleSortReport};
pub use returns::{long_short, portfolio_returns, PortfolioSeries, Weighting};
