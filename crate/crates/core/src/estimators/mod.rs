//! Estimators of the slope `beta` in `tau_k = E[delta_k] + beta * gamma_k + eps_k`.
//!
//! The naive slope of observed `tau_hat` on `gamma_hat` is attenuated by the
//! sampling error in `gamma_hat`. [`attenuation_corrected`], [`bces_estimate`]
//! and [`simex_estimate`] each remove that bias in a different way.

use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::Moments;
use crate::{Error, Result};

mod adjusted;
mod attenuation;
mod bces;
mod polynomial;
mod simex;

pub use adjusted::{adjusted_fit, AdjustMethod};
pub use attenuation::{attenuation_corrected, attenuation_corrected_with, attenuation_lambda, inter_study_variance, VarianceMethod};
pub use bces::{bces_bootstrap, bces_estimate, BootstrapMode, MIN_BOOTSTRAP_REPLICATES};
pub use polynomial::{polynomial_fit, MAX_CONDITION_NUMBER};
pub use simex::{simex_estimate, Extrapolant, SimexConfig, SimexFit, SimexVariance};

/// Which estimator produced a [`SlopeFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NaiveOls,
    Attenuation,
    Bces,
    BcesPairsBoot,
    BcesWildBoot,
    Simex,
    Adjusted,
    Polynomial,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::NaiveOls => "naive_ols",
            Method::Attenuation => "attenuation",
            Method::Bces => "bces",
            Method::BcesPairsBoot => "bces_pairs_boot",
            Method::BcesWildBoot => "bces_wild_boot",
            Method::Simex => "simex",
            Method::Adjusted => "adjusted",
            Method::Polynomial => "polynomial",
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Names of well-known diagnostics.
pub mod diag {
    pub const LAMBDA: &str = "lambda";
    pub const SIGMA2_GAMMA: &str = "sigma2_gamma";
    pub const RESIDUAL_VARIANCE: &str = "residual_variance";
    pub const NAIVE_BETA: &str = "naive_beta";
    /// p-value computed directly from a bootstrap null distribution.
    pub const BOOT_P_VALUE: &str = "boot_p_value";
    pub const BOOT_CI_LOWER: &str = "boot_ci_lower";
    pub const BOOT_CI_UPPER: &str = "boot_ci_upper";
    pub const BOOT_VALID: &str = "boot_valid";
    pub const BOOT_INVALID: &str = "boot_invalid";
    pub const CONDITION_NUMBER: &str = "condition_number";
    pub const DROPPED_COLUMNS: &str = "dropped_columns";
    /// Negative SIMEX jackknife variance replaced by the pairs bootstrap.
    pub const REJECTED_JACKKNIFE_VARIANCE: &str = "rejected_jackknife_variance";
}

/// An estimate of `beta` (and any companion coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub beta_hat: f64,
    pub se_beta: f64,
    /// Estimate of `E[delta_k]`.
    pub intercept_hat: f64,
    pub method: Method,
    /// Covariate coefficients for adjusted fits; `theta0..theta2` for the
    /// polynomial-slope model.
    pub extra_coefs: Vec<(String, f64)>,
    pub diagnostics: Vec<(String, f64)>,
}

impl SlopeFit {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.extra_coefs.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub(crate) fn push_diag(&mut self, name: &str, value: f64) {
        self.diagnostics.push((String::from(name), value));
    }
}

pub(crate) fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < crate::model::MIN_SUBGROUPS {
        return Err(Error::InsufficientSubgroups { required: crate::model::MIN_SUBGROUPS, got: x.len() });
    }
    Ok(())
}

/// HC1 standard error of a simple-regression slope.
pub(crate) fn hc1_slope_se(x: &[f64], y: &[f64], m: &Moments, beta: f64, intercept: f64) -> (f64, f64) {
    let mut meat = 0.0;
    let mut rss = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let e = yi - intercept - beta * xi;
        let dx = xi - m.mean_x;
        meat += dx * dx * e * e;
        rss += e * e;
    }
    let n = m.n as f64;
    let var = n / (n - 2.0) * meat / (m.sxx * m.sxx);
    (libm::sqrt(var), rss / (n - 2.0))
}

/// Least-squares slope of `y` on `x` with an HC1 robust standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    check_lengths(x, y)?;
    let m = Moments::new(x, y);
    if !(m.sxx > 0.0) {
        return Err(Error::DegenerateRegressor);
    }
    let beta = m.sxy / m.sxx;
    let intercept = m.mean_y - beta * m.mean_x;
    let (se, resid_var) = hc1_slope_se(x, y, &m, beta, intercept);
    let mut fit = SlopeFit {
        beta_hat: beta,
        se_beta: se,
        intercept_hat: intercept,
        method: Method::NaiveOls,
        extra_coefs: Vec::new(),
        diagnostics: Vec::new(),
    };
    fit.push_diag(diag::RESIDUAL_VARIANCE, resid_var);
    Ok(fit)
}

/// Naive slope of observed `tau_hat` on `gamma_hat`.
pub fn naive_fit(dataset: &crate::EffectDataset) -> Result<SlopeFit> {
    ols_slope(&dataset.gamma_hats(), &dataset.tau_hats())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data() {
        let fit = ols_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(fit.beta_hat, 2.0);
        assert_eq!(fit.intercept_hat, 0.0);
        assert_eq!(fit.se_beta, 0.0);
        assert_eq!(fit.method, Method::NaiveOls);
    }

    #[test]
    fn exact_affine_data() {
        let fit = ols_slope(&[1.0, 2.0, 3.0], &[5.0, 7.0, 9.0]).unwrap();
        assert_eq!(fit.beta_hat, 2.0);
        assert_eq!(fit.intercept_hat, 3.0);
    }

    #[test]
    fn hand_computed_least_squares() {
        // xbar = 2, ybar = 13/3, sxy = 5, sxx = 2.
        let fit = ols_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((fit.beta_hat - 2.5).abs() < 1e-12);
        assert!((fit.intercept_hat + 2.0 / 3.0).abs() < 1e-12);
        // residuals (1/6, -1/3, 1/6): HC1 = 3 * (1/36 + 1/36) / 4
        let want = libm::sqrt(3.0 * (2.0 / 36.0) / 4.0);
        assert!((fit.se_beta - want).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_regressor() {
        assert_eq!(ols_slope(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateRegressor));
    }
}
