use crate::{Error, Result};

/// Name of the quantile convention used by [`quantile_sorted`] and
/// [`winsorize`]; recorded in output metadata.
pub const QUANTILE_CONVENTION: &str = "linear interpolation between order statistics, h = (n-1)p";

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample variance with an `n - 1` denominator.
pub fn variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    Some(values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64)
}

pub fn std_dev(values: &[f64]) -> Option<f64> {
    variance(values).map(f64::sqrt)
}

/// Pearson correlation; `None` when either side has no variation.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a)?, mean(b)?);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Quantile of ascending-sorted data by linear interpolation of order
/// statistics at position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile_sorted(&sorted, p))
}

/// Clamps values to the `[lo, hi]` quantiles of the collection.
pub fn winsorize(values: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::insufficient("cannot winsorize an empty collection"));
    }
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::invalid(format!(
            "winsor bounds must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (qlo, qhi) = (quantile_sorted(&sorted, lo), quantile_sorted(&sorted, hi));
    Ok(values.iter().map(|v| v.clamp(qlo, qhi)).collect())
}

/// Correlation between `x_t` and `x_{t-lag}` over the overlapping pairs.
pub fn autocorrelation(values: &[f64], lag: usize) -> Result<f64> {
    if values.len() <= lag + 2 {
        return Err(Error::insufficient(format!(
            "autocorrelation at lag {lag} needs more than {} observations",
            lag + 2
        )));
    }
    correlation(&values[lag..], &values[..values.len() - lag])
        .ok_or_else(|| Error::invalid("autocorrelation undefined for a series without variation"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force quantile: enumerate the two order statistics around
    /// position (n-1)p by counting ranks, without index arithmetic shortcuts.
    fn brute_quantile(values: &[f64], p: f64) -> f64 {
        let n = values.len();
        let pos = (n - 1) as f64 * p;
        let kth = |k: usize| {
            *values
                .iter()
                .find(|v| {
                    let below = values.iter().filter(|w| w < v).count();
                    let equal = values.iter().filter(|w| w == v).count();
                    below <= k && k < below + equal
                })
                .unwrap()
        };
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        if frac == 0.0 {
            kth(k)
        } else {
            kth(k) * (1.0 - frac) + kth(k + 1) * frac
        }
    }

    #[test]
    fn winsorize_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((brute_quantile(&v, 0.01) - 1.99).abs() < 1e-12);
        assert!((brute_quantile(&v, 0.99) - 99.01).abs() < 1e-12);
        let w = winsorize(&v, 0.01, 0.99).unwrap();
        assert!((w[0] - 1.99).abs() < 1e-12);
        assert!((w[99] - 99.01).abs() < 1e-12);
        assert_eq!(&w[1..99], &v[1..99]);
    }

    #[test]
    fn winsorize_degenerate_cases() {
        assert_eq!(winsorize(&[3.0; 7], 0.01, 0.99).unwrap(), vec![3.0; 7]);
        let v = [5.0, -1.0, 2.0];
        assert_eq!(winsorize(&v, 0.0, 1.0).unwrap(), v.to_vec());
        assert!(winsorize(&[], 0.01, 0.99).is_err());
        assert!(winsorize(&v, 0.5, 0.5).is_err());
    }

    #[test]
    fn alternating_series_has_autocorr_minus_one() {
        let v: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((autocorrelation(&v, 1).unwrap() + 1.0).abs() < 1e-12);
        assert!(autocorrelation(&[2.0; 10], 1).is_err());
        assert!(autocorrelation(&[1.0, 2.0, 3.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn quantile_matches_brute_force(v in prop::collection::vec(-100.0f64..100.0, 1..40), p in 0.0f64..1.0) {
            let q = quantile(&v, p).unwrap();
            prop_assert!((q - brute_quantile(&v, p)).abs() < 1e-9);
        }

        #[test]
        fn winsorize_is_monotone_and_settles(v in prop::collection::vec(-10.0f64..10.0, 2..60), lo in 0.0f64..0.3, hi in 0.7f64..1.0) {
            let w = winsorize(&v, lo, hi).unwrap();
            let (qlo, qhi) = (quantile(&v, lo).unwrap(), quantile(&v, hi).unwrap());
            // Interpolated quantiles of clamped data move inward, so a second
            // pass only touches values already sitting on a bound.
            let w2 = winsorize(&w, lo, hi).unwrap();
            for (a, b) in w.iter().zip(&w2) {
                prop_assert!(*b >= qlo && *b <= qhi);
                if *a > qlo && *a < qhi {
                    prop_assert_eq!(a, b);
                }
            }
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] <= v[j] {
                        prop_assert!(w[i] <= w[j]);
                    }
                }
            }
        }
    }
}
