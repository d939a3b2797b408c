//! Ordinary least squares with an intercept, solved by QR decomposition.

use nalgebra::{DMatrix, DVector};

use super::dist::{f_upper, t_two_tailed};
use super::{clamp_p, Method, StatsError, TestResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    /// Intercept first, then one slope per predictor column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub coefficient_p: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    /// Overall F test of all slopes being zero.
    pub overall: TestResult,
}

/// Fits `y = b0 + X b`. `x` holds one row per observation.
pub fn linear_regression(x: &[Vec<f64>], y: &[f64]) -> Result<Regression, StatsError> {
    let n = y.len();
    if x.len() != n {
        return Err(StatsError::Input(format!(
            "{} predictor rows for {} responses",
            x.len(),
            n
        )));
    }
    let p = x.first().map_or(0, |r| r.len());
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(StatsError::Input(
            "predictor rows must share a non-zero width".into(),
        ));
    }
    if n <= p + 1 {
        return Err(StatsError::Input(format!(
            "need more than {} rows for {} predictors",
            p + 1,
            p
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::Input("non-finite value".into()));
    }
    let k = p + 1;
    let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let yv = DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(StatsError::Singular(
            "predictor columns are linearly dependent".into(),
        ));
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| StatsError::Singular("triangular solve failed".into()))?;
    let fitted = &design * &beta;
    let resid = &yv - &fitted;
    let sse = resid.norm_squared();
    let ybar = yv.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if !(sst > 0.0) {
        return Err(StatsError::Degenerate("response is constant".into()));
    }
    let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
    let (nf, pf) = (n as f64, p as f64);
    let df_err = nf - pf - 1.0;
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / df_err;
    let mse = sse / df_err;
    let f = if sse > 0.0 {
        ((sst - sse) / pf) / mse
    } else {
        f64::INFINITY
    };
    let overall = TestResult {
        statistic: f,
        p: clamp_p(f_upper(f, pf, df_err)),
        df: vec![pf, df_err],
        n: (n, p),
        method: Method::RegressionF,
    };
    // (X'X)^-1 = R^-1 R^-T
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| StatsError::Singular("R is not invertible".into()))?;
    let cov = &r_inv * r_inv.transpose();
    let std_errors: Vec<f64> = (0..k).map(|j| (mse * cov[(j, j)]).sqrt()).collect();
    let coefficient_p = (0..k)
        .map(|j| {
            if std_errors[j] > 0.0 {
                clamp_p(t_two_tailed(beta[j] / std_errors[j], df_err))
            } else {
                f64::MIN_POSITIVE
            }
        })
        .collect();
    Ok(Regression {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        coefficient_p,
        residuals: resid.iter().copied().collect(),
        r2,
        adj_r2,
        overall,
    })
}
