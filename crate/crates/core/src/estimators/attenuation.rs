//! Attenuation factor and its plug-in correction.

use alloc::format;
use alloc::vec::Vec;

use super::{diag, ols_slope, Method, SlopeFit};
use crate::linalg::{mean, sample_variance};
use crate::{EffectDataset, Error, Result};

/// Estimator of the between-subgroup variance of the true `gamma_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMethod {
    #[default]
    DerSimonianLaird,
    PauleMandel,
}

const PM_TOLERANCE: f64 = 1e-8;
const PM_MAX_ITER: usize = 100;

/// `lambda = sigma2_gamma / (sigma2_gamma + mean(se^2))`.
pub fn attenuation_lambda(sigma2_gamma: f64, se_gammas: &[f64]) -> Result<f64> {
    if se_gammas.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(sigma2_gamma >= 0.0) || !sigma2_gamma.is_finite() {
        return Err(Error::InvalidConfig(format!("sigma2_gamma must be finite and >= 0, got {sigma2_gamma}")));
    }
    let noise = se_gammas.iter().map(|s| s * s).sum::<f64>() / se_gammas.len() as f64;
    if noise == 0.0 {
        return Ok(1.0);
    }
    if sigma2_gamma == 0.0 {
        return Err(Error::ZeroSignalVariance);
    }
    Ok(sigma2_gamma / (sigma2_gamma + noise))
}

fn inverse_variance_weights(se: &[f64]) -> Result<Vec<f64>> {
    se.iter()
        .enumerate()
        .map(|(k, s)| if *s > 0.0 { Ok(1.0 / (s * s)) } else { Err(Error::InfiniteWeight(format!("#{k}"))) })
        .collect()
}

/// Weighted mean and the generalized Q statistic `sum w (y - mu)^2`.
fn weighted_q(y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mu = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let q = y.iter().zip(w).map(|(y, w)| w * (y - mu) * (y - mu)).sum();
    (mu, q)
}

/// Between-subgroup ("inter-study") variance of the true effects.
pub fn inter_study_variance(gammas: &[f64], se_gammas: &[f64], method: VarianceMethod) -> Result<f64> {
    super::check_lengths(gammas, se_gammas)?;
    let w = inverse_variance_weights(se_gammas)?;
    let k = gammas.len() as f64;
    let (_, q) = weighted_q(gammas, &w);
    match method {
        VarianceMethod::DerSimonianLaird => {
            let sw: f64 = w.iter().sum();
            let sw2: f64 = w.iter().map(|w| w * w).sum();
            Ok(((q - (k - 1.0)) / (sw - sw2 / sw)).max(0.0))
        }
        VarianceMethod::PauleMandel => {
            if q <= k - 1.0 {
                return Ok(0.0);
            }
            let v: Vec<f64> = se_gammas.iter().map(|s| s * s).collect();
            let mut tau2 = 0.0_f64;
            let mut trace = Vec::new();
            for _ in 0..PM_MAX_ITER {
                let w: Vec<f64> = v.iter().map(|v| 1.0 / (v + tau2)).collect();
                let (mu, q) = weighted_q(gammas, &w);
                let slope: f64 = gammas.iter().zip(&w).map(|(y, w)| w * w * (y - mu) * (y - mu)).sum();
                let step = (q - (k - 1.0)) / slope;
                let next = (tau2 + step).max(0.0);
                trace.push(next);
                if (next - tau2).abs() < PM_TOLERANCE {
                    return Ok(next);
                }
                tau2 = next;
            }
            Err(Error::NoConvergence { trace })
        }
    }
}

fn named_infinite_weight(dataset: &EffectDataset) -> Result<()> {
    match dataset.effects().iter().find(|e| e.se_gamma == 0.0) {
        Some(e) => Err(Error::InfiniteWeight(e.group_id.clone())),
        None => Ok(()),
    }
}

/// Naive slope divided by the estimated attenuation factor, with
/// `sigma2_gamma` from the DerSimonian-Laird estimator.
pub fn attenuation_corrected(dataset: &EffectDataset) -> Result<SlopeFit> {
    attenuation_corrected_with(dataset, VarianceMethod::default())
}

/// As [`attenuation_corrected`] with a chosen variance estimator.
///
/// The standard error is the naive one scaled by `1 / lambda`; the sampling
/// error of `lambda` itself is ignored, so it is understated.
pub fn attenuation_corrected_with(dataset: &EffectDataset, method: VarianceMethod) -> Result<SlopeFit> {
    let gammas = dataset.gamma_hats();
    let taus = dataset.tau_hats();
    let se = dataset.se_gammas();
    let mut fit = ols_slope(&gammas, &taus)?;
    fit.method = Method::Attenuation;

    if se.iter().all(|s| *s == 0.0) {
        fit.push_diag(diag::LAMBDA, 1.0);
        fit.push_diag(diag::SIGMA2_GAMMA, sample_variance(&gammas));
        return Ok(fit);
    }
    named_infinite_weight(dataset)?;
    let sigma2 = inter_study_variance(&gammas, &se, method)?;
    let lambda = attenuation_lambda(sigma2, &se)?;
    let naive = fit.beta_hat;
    fit.beta_hat = naive / lambda;
    fit.se_beta /= lambda;
    fit.intercept_hat = mean(&taus) - fit.beta_hat * mean(&gammas);
    fit.push_diag(diag::NAIVE_BETA, naive);
    fit.push_diag(diag::LAMBDA, lambda);
    fit.push_diag(diag::SIGMA2_GAMMA, sigma2);
    Ok(fit)
}
