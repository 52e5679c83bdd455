use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

/// Relative tolerance on the diagonal of R below which a column is treated
/// as a linear combination of the preceding ones.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub const INTERCEPT: &str = "const";

/// Named regressor columns for [`ols`].
#[derive(Debug, Clone, Default)]
pub struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    nobs: usize,
}

impl Design {
    pub fn new(nobs: usize) -> Self {
        Design {
            names: Vec::new(),
            columns: Vec::new(),
            nobs,
        }
    }

    pub fn with_intercept(nobs: usize) -> Self {
        Self::new(nobs).column(INTERCEPT, vec![1.0; nobs])
    }

    /// Appends a column. Panics if its length differs from `nobs`.
    pub fn column(mut self, name: &str, values: impl Into<Vec<f64>>) -> Self {
        let values = values.into();
        assert_eq!(values.len(), self.nobs, "column `{name}` has wrong length");
        self.names.push(name.to_string());
        self.columns.push(values);
        self
    }

    pub fn nobs(&self) -> usize {
        self.nobs
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_intercept(&self) -> bool {
        self.names.iter().any(|n| n == INTERCEPT)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nobs, self.columns.len(), |i, j| self.columns[j][i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMethod {
    Classical,
    NeweyWest { lags: usize },
}

impl std::fmt::Display for CovMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovMethod::Classical => write!(f, "classical"),
            CovMethod::NeweyWest { lags } => write!(f, "newey_west({lags})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `coefficient / std_error`; NaN where the standard error is zero.
    pub t_stats: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub nobs: usize,
    pub cov_method: CovMethod,
    pub covariance: DMatrix<f64>,
    design: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.coefficients[i])
    }

    pub fn t_stat(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.t_stats[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.std_errors[i])
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }

    fn with_covariance(mut self, cov: DMatrix<f64>, method: CovMethod) -> Self {
        self.std_errors = (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        self.t_stats = t_stats(&self.coefficients, &self.std_errors);
        self.covariance = cov;
        self.cov_method = method;
        self
    }
}

fn t_stats(coef: &[f64], se: &[f64]) -> Vec<f64> {
    coef.iter()
        .zip(se)
        .map(|(c, s)| if *s > 0.0 { c / s } else { f64::NAN })
        .collect()
}

/// Householder QR of an `n x p` matrix (n >= p). Returns the reflectors packed
/// below the diagonal, their scale factors, and R.
struct Qr {
    packed: DMatrix<f64>,
    taus: Vec<f64>,
    r: DMatrix<f64>,
}

fn householder_qr(x: &DMatrix<f64>, names: &[String]) -> Result<Qr> {
    let (n, p) = x.shape();
    let mut a = x.clone();
    let mut taus = vec![0.0; p];
    let col_norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    for j in 0..p {
        let norm = a.view((j, j), (n - j, 1)).norm();
        if col_norms[j] == 0.0 || norm <= RANK_TOLERANCE * col_norms[j] {
            return Err(collinearity_error(&a, j, names));
        }
        let alpha = if a[(j, j)] > 0.0 { -norm } else { norm };
        // Reflector v with v[0] = 1 stored below the diagonal.
        let v0 = a[(j, j)] - alpha;
        let mut vtv = 1.0;
        for i in (j + 1)..n {
            a[(i, j)] /= v0;
            vtv += a[(i, j)] * a[(i, j)];
        }
        let tau = 2.0 / vtv;
        for k in (j + 1)..p {
            let mut dot = a[(j, k)];
            for i in (j + 1)..n {
                dot += a[(i, j)] * a[(i, k)];
            }
            let s = tau * dot;
            a[(j, k)] -= s;
            for i in (j + 1)..n {
                let vi = a[(i, j)];
                a[(i, k)] -= s * vi;
            }
        }
        a[(j, j)] = alpha;
        taus[j] = tau;
    }
    let r = DMatrix::from_fn(p, p, |i, k| if i <= k { a[(i, k)] } else { 0.0 });
    Ok(Qr { packed: a, taus, r })
}

fn collinearity_error(a: &DMatrix<f64>, j: usize, names: &[String]) -> Error {
    if j == 0 {
        return Error::Singular(format!("column `{}` is identically zero", names[0]));
    }
    // Column j lies (numerically) in the span of columns 0..j: solve R c = r_j.
    let r = DMatrix::from_fn(j, j, |i, k| if i <= k { a[(i, k)] } else { 0.0 });
    let rhs = DVector::from_fn(j, |i, _| a[(i, j)]);
    let partners: Vec<&str> = match r.solve_upper_triangular(&rhs) {
        Some(c) => {
            let scale = c.amax().max(f64::MIN_POSITIVE);
            (0..j)
                .filter(|k| c[*k].abs() > 1e-8 * scale)
                .map(|k| names[k].as_str())
                .collect()
        }
        None => Vec::new(),
    };
    if partners.is_empty() {
        Error::Singular(format!("column `{}` is identically zero", names[j]))
    } else {
        Error::Singular(format!(
            "column `{}` is collinear with {}",
            names[j],
            partners
                .iter()
                .map(|p| format!("`{p}`"))
                .collect::<Vec<_>>()
                .join(", ")
        ))
    }
}

impl Qr {
    /// Applies Q' to `y`.
    fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        let (n, p) = self.packed.shape();
        let mut out = y.to_vec();
        for j in 0..p {
            let mut dot = out[j];
            for i in (j + 1)..n {
                dot += self.packed[(i, j)] * out[i];
            }
            let s = self.taus[j] * dot;
            out[j] -= s;
            for i in (j + 1)..n {
                out[i] -= s * self.packed[(i, j)];
            }
        }
        out
    }
}

/// Ordinary least squares via Householder QR with classical covariance.
///
/// Rank deficiency (relative tolerance [`RANK_TOLERANCE`]) is an error that
/// names the offending column and the columns it is collinear with.
pub fn ols(y: &[f64], design: &Design) -> Result<RegressionResult> {
    let n = y.len();
    let p = design.names.len();
    if design.nobs != n {
        return Err(Error::Misaligned(format!(
            "{} observations vs {} design rows",
            n, design.nobs
        )));
    }
    if p == 0 {
        return Err(Error::invalid("design has no columns"));
    }
    if n <= p {
        return Err(Error::insufficient(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || design.columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in regression data"));
    }
    let x = design.matrix();
    let qr = householder_qr(&x, &design.names)?;
    let qty = qr.qt_mul(y);
    let rhs = DVector::from_column_slice(&qty[..p]);
    let beta = qr
        .r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let r_inv = qr
        .r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("R is not invertible".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let fitted = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let intercept = design.has_intercept();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = if intercept {
        y.iter().map(|v| (v - ybar).powi(2)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let dof_total = if intercept { n - 1 } else { n } as f64;
    let adj_r2 = 1.0 - (1.0 - r2) * dof_total / (n - p) as f64;
    let sigma2 = ssr / (n - p) as f64;
    let result = RegressionResult {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors: Vec::new(),
        t_stats: Vec::new(),
        residuals,
        r2,
        adj_r2,
        nobs: n,
        cov_method: CovMethod::Classical,
        covariance: DMatrix::zeros(p, p),
        design: x,
        xtx_inv: xtx_inv.clone(),
    };
    Ok(result.with_covariance(xtx_inv * sigma2, CovMethod::Classical))
}

/// Replaces the covariance with the Bartlett-kernel HAC estimator
/// `(X'X)^-1 S (X'X)^-1`, weights `1 - j/(lags+1)`, no small-sample scaling.
/// With `lags = 0` this is White's HC0.
pub fn newey_west(result: &RegressionResult, lags: usize) -> Result<RegressionResult> {
    let n = result.nobs;
    if lags >= n {
        return Err(Error::invalid(format!(
            "Newey-West lags must be below nobs ({n}), got {lags}"
        )));
    }
    let x = &result.design;
    let p = x.ncols();
    let e = &result.residuals;
    let mut s = DMatrix::<f64>::zeros(p, p);
    for t in 0..n {
        let w = e[t] * e[t];
        for a in 0..p {
            for b in 0..p {
                s[(a, b)] += w * x[(t, a)] * x[(t, b)];
            }
        }
    }
    for j in 1..=lags {
        let weight = 1.0 - j as f64 / (lags + 1) as f64;
        let mut g = DMatrix::<f64>::zeros(p, p);
        for t in j..n {
            let w = e[t] * e[t - j];
            for a in 0..p {
                for b in 0..p {
                    g[(a, b)] += w * x[(t, a)] * x[(t - j, b)];
                }
            }
        }
        s += (&g + g.transpose()) * weight;
    }
    let cov = &result.xtx_inv * s * &result.xtx_inv;
    Ok(result
        .clone()
        .with_covariance(cov, CovMethod::NeweyWest { lags }))
}

/// Applies the requested covariance to a classical fit.
pub fn with_cov(result: RegressionResult, method: CovMethod) -> Result<RegressionResult> {
    match method {
        CovMethod::Classical => Ok(result),
        CovMethod::NeweyWest { lags } => newey_west(&result, lags),
    }
}
