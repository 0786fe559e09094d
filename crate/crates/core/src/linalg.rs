//! Small dense least-squares helpers.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Linear-interpolation (type 7) quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sums used by every simple-regression estimator. Centering both variables
/// keeps `sxy` free of cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    /// `sum (x - mean_x)^2`
    pub sxx: f64,
    /// `sum (x - mean_x)(y - mean_y)`
    pub sxy: f64,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with an `n - 1` denominator.
pub fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Sample standard deviation with an `n - 1` denominator.
pub fn sample_sd(v: &[f64]) -> f64 {
    libm::sqrt(sample_variance(v))
}

impl Moments {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        debug_assert_eq!(x.len(), y.len());
        let mean_x = mean(x);
        let mean_y = mean(y);
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            let dx = xi - mean_x;
            sxx += dx * dx;
            sxy += dx * (yi - mean_y);
        }
        Self { n: x.len(), mean_x, mean_y, sxx, sxy }
    }
}

/// Ordinary least squares fit of `y` on the columns of `design`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// HC1 heteroskedasticity-robust covariance of the coefficients.
    pub robust_cov: DMatrix<f64>,
    pub condition_number: f64,
}

/// Ratio of extreme singular values; infinite for rank-deficient designs.
pub fn condition_number(design: &DMatrix<f64>) -> f64 {
    let sv = design.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Least squares with HC1 robust covariance, rejecting designs whose
/// condition number exceeds `max_condition`.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64], max_condition: f64) -> Result<LeastSquares> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if n <= p {
        return Err(Error::InsufficientData { required: p + 1, got: n });
    }
    let condition_number = condition_number(design);
    if !(condition_number <= max_condition) {
        return Err(Error::IllConditioned(condition_number));
    }
    let yv = DVector::from_column_slice(y);
    let xtx = design.transpose() * design;
    let xtx_inv = xtx.try_inverse().ok_or(Error::DegenerateRegression)?;
    let beta = &xtx_inv * design.transpose() * &yv;
    let resid = &yv - design * &beta;

    let mut meat = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let row = design.row(i);
        let e2 = resid[i] * resid[i];
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += e2 * row[a] * row[b];
            }
        }
    }
    let scale = n as f64 / (n - p) as f64;
    let robust_cov = (&xtx_inv * meat * &xtx_inv) * scale;
    Ok(LeastSquares {
        coefficients: beta.iter().cloned().collect(),
        residuals: resid.iter().cloned().collect(),
        robust_cov,
        condition_number,
    })
}

/// Design matrix with a leading intercept column followed by `columns`.
pub fn design_with_intercept(columns: &[&[f64]]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}
