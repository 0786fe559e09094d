//! Aggregation, intersection-union testing, conservative intervals and
//! heterogeneity diagnostics.
//!
//! The overall mediation effect is `beta * gamma0` with
//! `gamma0 = sum_k w_k gamma_k`. Its null is the union `beta = 0 or
//! gamma0 = 0`, so it is rejected only when both component tests reject, and
//! the overall p-value is the larger of the two.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::estimators::{diag, Method, SlopeFit};
use crate::special::{chi_square_sf, normal_cdf, normal_quantile};
use crate::{EffectDataset, Error, Result};

/// Weighted average of the subgroup mediator effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaAggregate {
    pub gamma0_hat: f64,
    /// `sum_k w_k^2 se_gamma_k^2`, assuming independent subgroup estimates.
    pub var_gamma0: f64,
    pub k: usize,
}

impl GammaAggregate {
    pub fn from_dataset(dataset: &EffectDataset) -> Self {
        aggregate_gamma(&dataset.gamma_hats(), &dataset.se_gammas(), dataset.weights())
            .expect("validated dataset has consistent columns")
    }

    pub fn se(&self) -> f64 {
        libm::sqrt(self.var_gamma0)
    }
}

pub fn aggregate_gamma(gammas: &[f64], se_gammas: &[f64], weights: &[f64]) -> Result<GammaAggregate> {
    if gammas.is_empty() {
        return Err(Error::EmptyInput);
    }
    for len in [se_gammas.len(), weights.len()] {
        if len != gammas.len() {
            return Err(Error::LengthMismatch { expected: gammas.len(), got: len });
        }
    }
    let gamma0_hat = gammas.iter().zip(weights).map(|(g, w)| g * w).sum();
    let var_gamma0 = se_gammas.iter().zip(weights).map(|(s, w)| w * w * s * s).sum();
    Ok(GammaAggregate { gamma0_hat, var_gamma0, k: gammas.len() })
}

/// Two-sided normal p-value of `estimate / se`. A zero estimate gives 1.
pub fn z_test_p_value(estimate: f64, se: f64) -> Result<f64> {
    if estimate == 0.0 {
        return Ok(1.0);
    }
    if !(se > 0.0) {
        return Err(Error::DegenerateTest);
    }
    Ok(2.0 * normal_cdf(-(estimate / se).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IuTest {
    pub p_beta: f64,
    pub p_gamma: f64,
    pub p_overall: f64,
    pub reject: bool,
}

/// Combines two component p-values by the intersection-union rule.
pub fn iu_combine(p_beta: f64, p_gamma: f64, alpha: f64) -> IuTest {
    IuTest { p_beta, p_gamma, p_overall: p_beta.max(p_gamma), reject: p_beta <= alpha && p_gamma <= alpha }
}

/// p-value for `beta = 0`: the bootstrap null distribution when the fit
/// carries one, otherwise the normal approximation.
pub fn beta_p_value(fit: &SlopeFit) -> Result<f64> {
    match fit.diagnostic(diag::BOOT_P_VALUE) {
        Some(p) => Ok(p),
        None => z_test_p_value(fit.beta_hat, fit.se_beta),
    }
}

/// Intersection-union test of `beta * gamma0 = 0`.
///
/// `p_gamma` standardizes `gamma0_hat` by the square root of its variance.
pub fn iu_test(fit: &SlopeFit, agg: &GammaAggregate, alpha: f64) -> Result<IuTest> {
    let p_beta = beta_p_value(fit)?;
    let p_gamma = z_test_p_value(agg.gamma0_hat, agg.se())?;
    Ok(iu_combine(p_beta, p_gamma, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMode {
    /// `[min, max]` over the four endpoint values themselves.
    PaperLiteral,
    /// `[min, max]` over the four products of component endpoints.
    #[default]
    EndpointProduct,
}

impl CiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CiMode::PaperLiteral => "paper_literal",
            CiMode::EndpointProduct => "endpoint_product",
        }
    }
}

/// Normal multiplier giving each component interval coverage `sqrt(1 - alpha)`.
pub fn component_multiplier(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    normal_quantile((1.0 + libm::sqrt(1.0 - alpha)) / 2.0)
}

fn interval_from_components(gamma: (f64, f64), beta: (f64, f64), mode: CiMode) -> (f64, f64) {
    let (a1, a2) = gamma;
    let (a3, a4) = beta;
    // A factor pinned at exactly zero makes the product exactly zero.
    if (a1 == 0.0 && a2 == 0.0) || (a3 == 0.0 && a4 == 0.0) {
        return (0.0, 0.0);
    }
    let values = match mode {
        CiMode::EndpointProduct => [a1 * a3, a1 * a4, a2 * a3, a2 * a4],
        CiMode::PaperLiteral => [a1, a2, a3, a4],
    };
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Conservative `(1 - alpha)` interval for `beta * gamma0` built from two
/// `sqrt(1 - alpha)` component intervals.
///
/// `EndpointProduct` bounds the product over the rectangle of component
/// intervals; `PaperLiteral` takes the extremes of the four component
/// endpoints, which need not contain the product.
pub fn conservative_ci(fit: &SlopeFit, agg: &GammaAggregate, alpha: f64, mode: CiMode) -> Result<(f64, f64)> {
    let q = component_multiplier(alpha)?;
    let gamma = (agg.gamma0_hat - q * agg.se(), agg.gamma0_hat + q * agg.se());
    let beta = (fit.beta_hat - q * fit.se_beta, fit.beta_hat + q * fit.se_beta);
    Ok(interval_from_components(gamma, beta, mode))
}

/// Average mediation effect: `beta_hat * sum w_k gamma_k`, or for the
/// polynomial-slope model `sum w_k beta(gamma_k) gamma_k`.
pub fn acme(fit: &SlopeFit, gammas: &[f64], weights: &[f64]) -> f64 {
    if fit.method == Method::Polynomial {
        let theta = |name| fit.coef(name).unwrap_or(0.0);
        let (t0, t1, t2) = (theta("theta0"), theta("theta1"), theta("theta2"));
        return gammas.iter().zip(weights).map(|(g, w)| w * (t0 + t1 * g + t2 * g * g) * g).sum();
    }
    fit.beta_hat * gammas.iter().zip(weights).map(|(g, w)| g * w).sum::<f64>()
}

/// Cochran's Q and Higgins-Thompson I^2 for the mediator effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heterogeneity {
    pub q: f64,
    pub df: usize,
    pub p_q: f64,
    pub i2: f64,
}

pub fn heterogeneity_stats(gammas: &[f64], se_gammas: &[f64]) -> Result<Heterogeneity> {
    if gammas.len() != se_gammas.len() {
        return Err(Error::LengthMismatch { expected: gammas.len(), got: se_gammas.len() });
    }
    if gammas.len() < 2 {
        return Err(Error::InsufficientSubgroups { required: 2, got: gammas.len() });
    }
    if let Some(k) = se_gammas.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::InfiniteWeight(format!("#{k}")));
    }
    let w: Vec<f64> = se_gammas.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let fixed = gammas.iter().zip(&w).map(|(g, w)| g * w).sum::<f64>() / sw;
    let q: f64 = gammas.iter().zip(&w).map(|(g, w)| w * (g - fixed) * (g - fixed)).sum();
    let df = gammas.len() - 1;
    let i2 = if q > 0.0 { ((q - df as f64) / q).max(0.0) } else { 0.0 };
    Ok(Heterogeneity { q, df, p_q: chi_square_sf(q, df as f64), i2 })
}

/// Everything reported for one estimator on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MediationResult {
    pub beta_fit: SlopeFit,
    pub gamma_agg: GammaAggregate,
    pub acme_hat: f64,
    pub p_beta: f64,
    pub p_gamma: f64,
    pub p_overall: f64,
    pub reject: bool,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub ci_mode: CiMode,
    pub alpha: f64,
    /// Absent when some subgroup has a zero mediator standard error.
    pub heterogeneity: Option<Heterogeneity>,
}

/// Aggregates, tests and bounds the mediation effect implied by `fit`.
pub fn analyze(dataset: &EffectDataset, fit: SlopeFit, alpha: f64, ci_mode: CiMode) -> Result<MediationResult> {
    let agg = GammaAggregate::from_dataset(dataset);
    let test = iu_test(&fit, &agg, alpha)?;
    let (ci_lower, ci_upper) = conservative_ci(&fit, &agg, alpha, ci_mode)?;
    let acme_hat = acme(&fit, &dataset.gamma_hats(), dataset.weights());
    let heterogeneity = heterogeneity_stats(&dataset.gamma_hats(), &dataset.se_gammas()).ok();
    Ok(MediationResult {
        beta_fit: fit,
        gamma_agg: agg,
        acme_hat,
        p_beta: test.p_beta,
        p_gamma: test.p_gamma,
        p_overall: test.p_overall,
        reject: test.reject,
        ci_lower,
        ci_upper,
        ci_mode,
        alpha,
        heterogeneity,
    })
}

/// Per-subgroup mediation effect `beta * gamma_k` with an interval combining
/// the slope interval and that subgroup's own `gamma_k` interval.
///
/// Experimental: exchangeability conditions for discovered subgroups are not
/// established.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupInterval {
    pub group_id: String,
    pub acme: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn subgroup_intervals(dataset: &EffectDataset, fit: &SlopeFit, alpha: f64, mode: CiMode) -> Result<Vec<SubgroupInterval>> {
    let q = component_multiplier(alpha)?;
    let beta = (fit.beta_hat - q * fit.se_beta, fit.beta_hat + q * fit.se_beta);
    Ok(dataset
        .effects()
        .iter()
        .map(|e| {
            let gamma = (e.gamma_hat - q * e.se_gamma, e.gamma_hat + q * e.se_gamma);
            let (lower, upper) = interval_from_components(gamma, beta, mode);
            SubgroupInterval { group_id: e.group_id.clone(), acme: fit.beta_hat * e.gamma_hat, lower, upper }
        })
        .collect())
}
