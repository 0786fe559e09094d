//! Bivariate correlated errors and intrinsic scatter (BCES) slope, with pairs
//! and null-restricted wild bootstraps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{diag, Method, SlopeFit};
use crate::linalg::{quantile_sorted, sample_sd, Moments};
use crate::rng::{label, rademacher, resample_indices, substream};
use crate::{EffectDataset, Error, Result};

pub const MIN_BOOTSTRAP_REPLICATES: usize = 199;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMode {
    /// Resample subgroups with replacement.
    Pairs,
    /// Impose `beta = 0` and flip restricted residuals with Rademacher signs.
    WildRestricted,
}

struct BcesCore {
    beta: f64,
    intercept: f64,
    se: f64,
}

/// `beta = (sxy - sum cov_uv) / (sxx - sum var_u)` with the Akritas-Bershady
/// sandwich variance.
fn bces_core(x: &[f64], y: &[f64], var_u: &[f64], cov_uv: &[f64]) -> Result<BcesCore> {
    let m = Moments::new(x, y);
    if !(m.sxx > 0.0) {
        return Err(Error::DegenerateRegressor);
    }
    let sum_var: f64 = var_u.iter().sum();
    let sum_cov: f64 = cov_uv.iter().sum();
    let denominator = m.sxx - sum_var;
    if !(denominator > 0.0) {
        return Err(Error::NoiseDominatesSignal { denominator });
    }
    let beta = (m.sxy - sum_cov) / denominator;
    let intercept = m.mean_y - beta * m.mean_x;

    let n = x.len() as f64;
    let scale = denominator / n;
    let xi: Vec<f64> = (0..x.len())
        .map(|i| ((x[i] - m.mean_x) * (y[i] - beta * x[i] - intercept) + beta * var_u[i] - cov_uv[i]) / scale)
        .collect();
    let xi_mean = xi.iter().sum::<f64>() / n;
    let var = xi.iter().map(|v| (v - xi_mean) * (v - xi_mean)).sum::<f64>() / (n * n);
    Ok(BcesCore { beta, intercept, se: libm::sqrt(var) })
}

struct Columns {
    x: Vec<f64>,
    y: Vec<f64>,
    var_u: Vec<f64>,
    cov_uv: Vec<f64>,
}

impl Columns {
    fn of(dataset: &EffectDataset) -> Self {
        Self {
            x: dataset.gamma_hats(),
            y: dataset.tau_hats(),
            var_u: dataset.se_gammas().iter().map(|s| s * s).collect(),
            cov_uv: dataset.cov_uvs(),
        }
    }

    fn pick(&self, idx: &[usize]) -> Self {
        let take = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self { x: take(&self.x), y: take(&self.y), var_u: take(&self.var_u), cov_uv: take(&self.cov_uv) }
    }
}

/// BCES slope of `tau_hat` on `gamma_hat`, subtracting the summed mediator
/// error variances from the denominator and the error covariances from the
/// numerator.
///
/// Fails with [`Error::NoiseDominatesSignal`] when the measurement variance
/// exceeds the observed spread of `gamma_hat`; SIMEX still works there.
pub fn bces_estimate(dataset: &EffectDataset) -> Result<SlopeFit> {
    let c = Columns::of(dataset);
    let core = bces_core(&c.x, &c.y, &c.var_u, &c.cov_uv)?;
    Ok(SlopeFit {
        beta_hat: core.beta,
        se_beta: core.se,
        intercept_hat: core.intercept,
        method: Method::Bces,
        extra_coefs: Vec::new(),
        diagnostics: Vec::new(),
    })
}

/// BCES with a bootstrap standard error (pairs) or a bootstrap null
/// distribution (restricted wild).
///
/// Replicates whose corrected denominator is not positive are dropped and
/// counted; more than half dropped is an error.
pub fn bces_bootstrap(dataset: &EffectDataset, mode: BootstrapMode, replicates: usize, seed: u64) -> Result<SlopeFit> {
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {replicates}"
        )));
    }
    let cols = Columns::of(dataset);
    let mut fit = bces_estimate(dataset)?;
    let k = cols.x.len();
    let mut draws = Vec::with_capacity(replicates);
    let mut invalid = 0usize;

    match mode {
        BootstrapMode::Pairs => {
            for b in 0..replicates {
                let mut rng = substream(seed, &[label::PAIRS, b as u64]);
                let idx = resample_indices(&mut rng, k);
                let s = cols.pick(&idx);
                match bces_core(&s.x, &s.y, &s.var_u, &s.cov_uv) {
                    Ok(c) => draws.push(c.beta),
                    Err(_) => invalid += 1,
                }
            }
        }
        BootstrapMode::WildRestricted => {
            let tau_bar = cols.y.iter().sum::<f64>() / k as f64;
            let resid: Vec<f64> = cols.y.iter().map(|t| t - tau_bar).collect();
            let mut y_star = vec![0.0; k];
            for b in 0..replicates {
                let mut rng = substream(seed, &[label::WILD, b as u64]);
                for (ys, r) in y_star.iter_mut().zip(&resid) {
                    *ys = tau_bar + r * rademacher(&mut rng);
                }
                match bces_core(&cols.x, &y_star, &cols.var_u, &cols.cov_uv) {
                    Ok(c) => draws.push(c.beta),
                    Err(_) => invalid += 1,
                }
            }
        }
    }

    if 2 * invalid > replicates || draws.len() < 2 {
        return Err(Error::BootstrapUnstable { invalid, total: replicates });
    }
    fit.se_beta = sample_sd(&draws);
    match mode {
        BootstrapMode::Pairs => {
            fit.method = Method::BcesPairsBoot;
            let mut sorted = draws.clone();
            sorted.sort_by(f64::total_cmp);
            fit.push_diag(diag::BOOT_CI_LOWER, quantile_sorted(&sorted, 0.025));
            fit.push_diag(diag::BOOT_CI_UPPER, quantile_sorted(&sorted, 0.975));
        }
        BootstrapMode::WildRestricted => {
            fit.method = Method::BcesWildBoot;
            let observed = fit.beta_hat.abs();
            let extreme = draws.iter().filter(|b| b.abs() >= observed).count();
            fit.push_diag(diag::BOOT_P_VALUE, extreme as f64 / draws.len() as f64);
        }
    }
    fit.push_diag(diag::BOOT_VALID, draws.len() as f64);
    fit.push_diag(diag::BOOT_INVALID, invalid as f64);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ols_slope;
    use crate::SubgroupEffect;

    fn ds(g: &[f64], t: &[f64], se: &[f64]) -> EffectDataset {
        let raw = (0..g.len()).map(|k| SubgroupEffect::new(format!("g{k}"), g[k], se[k], t[k], 0.2, 10)).collect();
        EffectDataset::new(raw).unwrap()
    }

    #[test]
    fn hand_evaluated_formula() {
        // sxy = 4, sxx = 2, sum var_u = 1.5
        let se = libm::sqrt(0.5);
        let d = ds(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[se; 3]);
        let fit = bces_estimate(&d).unwrap();
        assert!((fit.beta_hat - 8.0).abs() < 1e-12, "{}", fit.beta_hat);
    }

    #[test]
    fn noise_dominated_denominator() {
        let d = ds(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[1.0; 3]);
        let err = bces_estimate(&d).unwrap_err();
        assert!(matches!(err, Error::NoiseDominatesSignal { denominator } if denominator == -1.0));
    }

    #[test]
    fn zero_noise_matches_ols_bitwise() {
        let g = [0.3, 1.7, 2.2, 5.9, 4.1];
        let t = [1.0, 2.5, 2.4, 8.8, 5.0];
        let d = ds(&g, &t, &[0.0; 5]);
        let b = bces_estimate(&d).unwrap();
        let o = ols_slope(&g, &t).unwrap();
        assert_eq!(b.beta_hat.to_bits(), o.beta_hat.to_bits());
        assert_eq!(b.intercept_hat.to_bits(), o.intercept_hat.to_bits());
        // the sandwich is HC0 here: HC1 scaled back by (n - 2) / n
        assert!((b.se_beta - o.se_beta * libm::sqrt(3.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn covariance_corrects_numerator() {
        let raw = (0..4)
            .map(|k| {
                let g = k as f64;
                SubgroupEffect::new(format!("g{k}"), g, 0.1, 2.0 * g, 0.2, 10).with_cov_uv(0.01)
            })
            .collect();
        let d = EffectDataset::new(raw).unwrap();
        // sxy = 10, sxx = 5, sum var = 0.04, sum cov = 0.04
        let fit = bces_estimate(&d).unwrap();
        assert!((fit.beta_hat - (10.0 - 0.04) / (5.0 - 0.04)).abs() < 1e-12);
    }

    #[test]
    fn wild_bootstrap_constant_outcome_gives_unit_p() {
        let d = ds(&[0.0, 1.0, 2.5, 3.0, 4.5], &[3.0; 5], &[0.1; 5]);
        let fit = bces_bootstrap(&d, BootstrapMode::WildRestricted, 199, 11).unwrap();
        assert_eq!(fit.diagnostic(diag::BOOT_P_VALUE), Some(1.0));
        assert_eq!(fit.method, Method::BcesWildBoot);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let d = ds(&[0.0, 1.0, 2.5, 3.0, 4.5, 6.0], &[1.0, 2.0, 6.0, 5.0, 9.0, 13.0], &[0.2; 6]);
        for mode in [BootstrapMode::Pairs, BootstrapMode::WildRestricted] {
            let a = bces_bootstrap(&d, mode, 299, 5).unwrap();
            let b = bces_bootstrap(&d, mode, 299, 5).unwrap();
            assert_eq!(a, b);
            assert!(a.se_beta > 0.0);
        }
        let a = bces_bootstrap(&d, BootstrapMode::Pairs, 299, 5).unwrap();
        let lo = a.diagnostic(diag::BOOT_CI_LOWER).unwrap();
        let hi = a.diagnostic(diag::BOOT_CI_UPPER).unwrap();
        assert!(lo <= hi);
    }

    #[test]
    fn too_few_replicates() {
        let d = ds(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], &[0.1; 3]);
        assert!(matches!(bces_bootstrap(&d, BootstrapMode::Pairs, 50, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unstable_pairs_bootstrap() {
        // only resamples with exactly two of the x = 10 points keep a positive
        // denominator (sxx = 20 j (5 - j) against 3*20 + 2*29 etc.)
        let (a, b) = (libm::sqrt(20.0), libm::sqrt(29.0));
        let d = ds(&[0.0, 0.0, 0.0, 10.0, 10.0], &[0.0, 0.0, 0.0, 10.0, 10.0], &[a, a, a, b, b]);
        assert!(bces_estimate(&d).is_ok());
        let err = bces_bootstrap(&d, BootstrapMode::Pairs, 199, 3).unwrap_err();
        assert!(matches!(err, Error::BootstrapUnstable { .. }), "{err:?}");
    }
}
