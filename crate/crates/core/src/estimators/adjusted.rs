//! Slope adjusted for subgroup covariate means `E[X_k]`.

use alloc::format;
use alloc::vec;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::simex::{run_simex, NaiveModel};
use super::{diag, ols_slope, simex_estimate, Method, SimexConfig, SlopeFit};
use crate::linalg::{design_with_intercept, least_squares};
use crate::{EffectDataset, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum AdjustMethod {
    Naive,
    /// Perturbs `gamma_hat` only; covariate means are treated as exact.
    Simex(SimexConfig),
}

/// Regression of `tau_hat` on `gamma_hat` and covariate columns;
/// coefficients `[beta, intercept, b_1..b_p]`.
struct AdjustedModel {
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl AdjustedModel {
    fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let mut cols: Vec<&[f64]> = Vec::with_capacity(self.columns.len() + 1);
        cols.push(x);
        cols.extend(self.columns.iter().map(Vec::as_slice));
        design_with_intercept(&cols)
    }
}

impl NaiveModel for AdjustedModel {
    fn fit(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.design(x);
        let xty = d.transpose() * DVector::from_column_slice(&self.y);
        let coef = (d.transpose() * &d).cholesky()?.solve(&xty);
        let mut out = Vec::with_capacity(coef.len());
        out.push(coef[1]);
        out.push(coef[0]);
        out.extend(coef.iter().skip(2));
        Some(out)
    }

    fn beta_variance(&self, x: &[f64], coefs: &[f64]) -> Option<f64> {
        let d = self.design(x);
        let (n, p) = (d.nrows(), d.ncols());
        if n <= p {
            return None;
        }
        let inv = (d.transpose() * &d).try_inverse()?;
        let mut ordered = Vec::with_capacity(p);
        ordered.push(coefs[1]);
        ordered.push(coefs[0]);
        ordered.extend_from_slice(&coefs[2..]);
        let fitted = &d * DVector::from_vec(ordered);
        let rss: f64 = self.y.iter().zip(fitted.iter()).map(|(y, f)| (y - f) * (y - f)).sum();
        Some(rss / (n - p) as f64 * inv[(1, 1)])
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self { y: pick(&self.y), columns: self.columns.iter().map(|c| pick(c)).collect() }
    }

    fn failure(&self) -> Error {
        Error::CollinearCovariates
    }
}

/// `tau_k = E[delta] + beta gamma_k + sum_j b_j E[X_kj] + e_k`.
///
/// Covariate columns with zero variance are dropped (recorded in the
/// diagnostics as `dropped:<name>`); if none remain the unadjusted estimator
/// is returned, relabelled.
pub fn adjusted_fit(dataset: &EffectDataset, method: &AdjustMethod) -> Result<SlopeFit> {
    let p = dataset.covariate_count();
    if p == 0 {
        return Err(Error::InvalidData("adjusted fit needs covariate means on every record".into()));
    }
    let k = dataset.len();
    if k < p + 3 {
        return Err(Error::InsufficientSubgroups { required: p + 3, got: k });
    }
    let names = dataset.covariate_names();
    let mut kept_names = Vec::new();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let col: Vec<f64> = dataset.effects().iter().map(|e| e.covariate_means.as_ref().map_or(0.0, |m| m[j])).collect();
        if col.iter().all(|v| *v == col[0]) {
            dropped.push(names[j].clone());
        } else {
            kept_names.push(names[j].clone());
            columns.push(col);
        }
    }

    let gammas = dataset.gamma_hats();
    let taus = dataset.tau_hats();
    let mut fit = if columns.is_empty() {
        match method {
            AdjustMethod::Naive => ols_slope(&gammas, &taus)?,
            AdjustMethod::Simex(cfg) => simex_estimate(dataset, cfg)?.fit,
        }
    } else {
        let mut cols: Vec<&[f64]> = vec![gammas.as_slice()];
        cols.extend(columns.iter().map(Vec::as_slice));
        let design = design_with_intercept(&cols);
        let ls = least_squares(&design, &taus, super::MAX_CONDITION_NUMBER).map_err(|e| match e {
            Error::IllConditioned(_) | Error::DegenerateRegression => Error::CollinearCovariates,
            other => other,
        })?;
        let model = AdjustedModel { y: taus.clone(), columns };
        match method {
            AdjustMethod::Naive => {
                let c = &ls.coefficients;
                let mut fit = SlopeFit {
                    beta_hat: c[1],
                    se_beta: libm::sqrt(ls.robust_cov[(1, 1)].max(0.0)),
                    intercept_hat: c[0],
                    method: Method::Adjusted,
                    extra_coefs: kept_names.iter().zip(&c[2..]).map(|(n, v)| (format!("beta_{n}"), *v)).collect(),
                    diagnostics: Vec::new(),
                };
                fit.push_diag(diag::CONDITION_NUMBER, ls.condition_number);
                fit
            }
            AdjustMethod::Simex(cfg) => {
                let out = run_simex(&model, &gammas, &dataset.se_gammas(), cfg)?;
                let est = &out.point.estimate;
                let mut fit = SlopeFit {
                    beta_hat: est[0],
                    se_beta: out.se[0],
                    intercept_hat: est[1],
                    method: Method::Adjusted,
                    extra_coefs: kept_names.iter().zip(&est[2..]).map(|(n, v)| (format!("beta_{n}"), *v)).collect(),
                    diagnostics: Vec::new(),
                };
                fit.push_diag(diag::NAIVE_BETA, out.point.curve[0][0]);
                fit.push_diag(diag::BOOT_VALID, out.valid as f64);
                fit.push_diag(diag::BOOT_INVALID, out.invalid as f64);
                if let Some(v) = out.rejected_jackknife {
                    fit.push_diag(diag::REJECTED_JACKKNIFE_VARIANCE, v);
                }
                fit
            }
        }
    };
    fit.method = Method::Adjusted;
    fit.push_diag(diag::DROPPED_COLUMNS, dropped.len() as f64);
    for name in dropped {
        fit.diagnostics.push((format!("dropped:{name}"), 1.0));
    }
    if matches!(method, AdjustMethod::Simex(_)) {
        fit.diagnostics.push((String::from("simex"), 1.0));
    }
    Ok(fit)
}
