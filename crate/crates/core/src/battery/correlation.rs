use crate::econometrics::{correlation, innovation_filter};
use crate::{Result, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// `None` where the pair has under three common months or no variation.
    pub values: Vec<Vec<Option<f64>>>,
    pub nobs: Vec<Vec<usize>>,
}

impl CorrelationMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            out.push_str(n);
            for v in row {
                out.push(',');
                out.push_str(&super::field(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise correlations over common months, optionally after passing every
/// series through the innovation filter.
pub fn correlation_matrix(series: &[(String, Series)], filter: bool) -> Result<CorrelationMatrix> {
    let transformed: Vec<Series> = series
        .iter()
        .map(|(_, s)| if filter { innovation_filter(s).map(|f| f.innovations) } else { Ok(s.clone()) })
        .collect::<Result<_>>()?;
    let k = series.len();
    let mut values = vec![vec![None; k]; k];
    let mut nobs = vec![vec![0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let (a, b): (Vec<f64>, Vec<f64>) = transformed[i]
                .iter()
                .filter_map(|(m, v)| transformed[j].get(m).map(|w| (v, w)))
                .unzip();
            nobs[i][j] = a.len();
            values[i][j] = if a.len() >= 3 { correlation(&a, &b) } else { None };
        }
    }
    Ok(CorrelationMatrix {
        names: series.iter().map(|(n, _)| n.clone()).collect(),
        values,
        nobs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MonthId;

    #[test]
    fn self_and_mirror() {
        let s = MonthId::from_yyyymm(199001).unwrap();
        let a = Series::from_pairs((0..30).map(|i| (s.add_months(i), ((i * 7) % 5) as f64))).unwrap();
        let b = a.map(|x| -x).unwrap();
        let c = correlation_matrix(&[("a".into(), a), ("b".into(), b)], false).unwrap();
        assert!((c.values[0][0].unwrap() - 1.0).abs() < 1e-12);
        assert!((c.values[0][1].unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(c.nobs[0][1], 30);
    }
}
