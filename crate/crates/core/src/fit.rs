//! Weighted least-squares fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the weights (`1/σ²`), rescaled by
    /// the reduced chi-square when it exceeds one.
    pub slope_stderr: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `y = intercept + slope·x` with weights `w` (inverse variances).
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if y.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch("fit arrays differ in length".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples("a line needs at least two points".into()));
    }
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("fit data must be finite with positive weights".into()));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let syy: f64 = y.iter().zip(w).map(|(c, b)| b * (c - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (c - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let dof = n.saturating_sub(2).max(1) as f64;
    let scale = (rss / dof).max(1.0);
    Ok(LinearFit { slope, intercept, slope_stderr: (scale / sxx).sqrt(), r_squared, points: n })
}

/// Coefficients of a weighted multi-regressor fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Standard errors, rescaled by the reduced chi-square when it exceeds one.
    pub stderr: Vec<f64>,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `y ≈ Σ_k c_k rows[i][k]` with weights `w`.
pub fn weighted_least_squares(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<LeastSquares> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if y.len() != n || w.len() != n || rows.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch("fit arrays differ in length".into()));
    }
    if k == 0 || n < k + 1 {
        return Err(Error::InsufficientSamples(format!("{n} points cannot fit {k} coefficients")));
    }
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) || rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("fit data must be finite with positive weights".into()));
    }
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j] * w[i].sqrt());
    let b = DVector::from_fn(n, |i, _| y[i] * w[i].sqrt());
    let normal = x.transpose() * &x;
    let inverse = normal
        .try_inverse()
        .ok_or_else(|| Error::Numerical("fit design matrix is singular".into()))?;
    let coef = &inverse * x.transpose() * &b;
    let resid = &b - &x * &coef;
    let rss = resid.norm_squared();
    let sw: f64 = w.iter().sum();
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let syy: f64 = y.iter().zip(w).map(|(c, b)| b * (c - my).powi(2)).sum();
    let scale = (rss / (n - k).max(1) as f64).max(1.0);
    Ok(LeastSquares {
        coefficients: coef.iter().copied().collect(),
        stderr: (0..k).map(|j| (scale * inverse[(j, j)]).sqrt()).collect(),
        r_squared: if syy > 0.0 { 1.0 - rss / syy } else { 1.0 },
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = weighted_linear_fit(&x, &y, &[1.0; 4]).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weights_pull_the_line() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 1.0, 0.0];
        let even = weighted_linear_fit(&x, &y, &[1.0, 1.0, 1.0]).unwrap();
        let skew = weighted_linear_fit(&x, &y, &[100.0, 100.0, 1.0]).unwrap();
        assert!(even.slope.abs() < 1e-14);
        assert!(skew.slope > 0.5);
        assert!(weighted_linear_fit(&[1.0], &[1.0], &[1.0]).is_err());
        assert!(weighted_linear_fit(&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn least_squares_recovers_planted_coefficients() {
        let rows: Vec<Vec<f64>> = (1..10).map(|i| vec![1.0, (i as f64).ln(), i as f64 / 32.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.3 - 0.25 * r[1] + 0.5 * r[2]).collect();
        let fit = weighted_least_squares(&rows, &y, &[1.0; 9]).unwrap();
        for (c, t) in fit.coefficients.iter().zip([0.3, -0.25, 0.5]) {
            assert!((c - t).abs() < 1e-12);
        }
        let line = weighted_linear_fit(&[1.0, 2.0, 3.0], &[1.0, 3.0, 4.0], &[1.0, 2.0, 1.0]).unwrap();
        let rows: Vec<Vec<f64>> = [1.0, 2.0, 3.0].iter().map(|&x| vec![1.0, x]).collect();
        let general = weighted_least_squares(&rows, &[1.0, 3.0, 4.0], &[1.0, 2.0, 1.0]).unwrap();
        assert!((general.coefficients[1] - line.slope).abs() < 1e-12);
        assert!((general.stderr[1] - line.slope_stderr).abs() < 1e-12);
    }
}
