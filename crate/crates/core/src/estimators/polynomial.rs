use alloc::string::String;
use alloc::vec::Vec;

use super::{diag, ols_slope, Method, SlopeFit};
use crate::linalg::{design_with_intercept, least_squares};
use crate::{EffectDataset, Error, Result};

/// Designs with a larger condition number are rejected as ill-conditioned.
pub const MAX_CONDITION_NUMBER: f64 = 1e10;

/// Slope allowed to vary with the mediator effect:
/// `beta(gamma) = theta0 + theta1 gamma + theta2 gamma^2`.
///
/// Degree 2 regresses `tau_hat` on `(gamma, gamma^2, gamma^3)` with an
/// intercept; degree 1 is the plain naive slope. `beta_hat` reports `theta0`
/// and `extra_coefs` carries all thetas. No measurement-error correction is
/// applied.
pub fn polynomial_fit(dataset: &EffectDataset, degree: usize) -> Result<SlopeFit> {
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidConfig(alloc::format!("polynomial degree must be 1 or 2, got {degree}")));
    }
    let k = dataset.len();
    if k < degree + 3 {
        return Err(Error::InsufficientSubgroups { required: degree + 3, got: k });
    }
    let g = dataset.gamma_hats();
    let t = dataset.tau_hats();
    if degree == 1 {
        let mut fit = ols_slope(&g, &t)?;
        fit.method = Method::Polynomial;
        fit.extra_coefs.push((String::from("theta0"), fit.beta_hat));
        return Ok(fit);
    }
    let g2: Vec<f64> = g.iter().map(|v| v * v).collect();
    let g3: Vec<f64> = g.iter().map(|v| v * v * v).collect();
    let design = design_with_intercept(&[&g, &g2, &g3]);
    let ls = least_squares(&design, &t, MAX_CONDITION_NUMBER)?;
    let c = &ls.coefficients;
    let mut fit = SlopeFit {
        beta_hat: c[1],
        se_beta: libm::sqrt(ls.robust_cov[(1, 1)].max(0.0)),
        intercept_hat: c[0],
        method: Method::Polynomial,
        extra_coefs: ["theta0", "theta1", "theta2"].iter().zip(&c[1..]).map(|(n, v)| (String::from(*n), *v)).collect(),
        diagnostics: Vec::new(),
    };
    fit.push_diag(diag::CONDITION_NUMBER, ls.condition_number);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SubgroupEffect;

    fn ds(g: &[f64], t: &[f64]) -> EffectDataset {
        let raw = (0..g.len()).map(|k| SubgroupEffect::new(alloc::format!("g{k}"), g[k], 0.1, t[k], 0.1, 10)).collect();
        EffectDataset::new(raw).unwrap()
    }

    #[test]
    fn nested_linear_model() {
        let g = [0.5, 1.0, 2.0, 3.5, 4.0, 5.5];
        let t: Vec<f64> = g.iter().map(|v| 1.0 + 2.0 * v).collect();
        let fit = polynomial_fit(&ds(&g, &t), 2).unwrap();
        for (name, want) in [("theta0", 2.0), ("theta1", 0.0), ("theta2", 0.0)] {
            assert!((fit.coef(name).unwrap() - want).abs() < 1e-8, "{name}");
        }
    }

    #[test]
    fn cubic_outcome_recovers_theta2() {
        let g = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t: Vec<f64> = g.iter().map(|v| v * v * v).collect();
        let fit = polynomial_fit(&ds(&g, &t), 2).unwrap();
        assert!((fit.coef("theta2").unwrap() - 1.0).abs() < 1e-8);
        assert!(fit.coef("theta0").unwrap().abs() < 1e-7);
    }

    #[test]
    fn too_few_subgroups_for_quadratic() {
        let g = [1.0, 2.0, 3.0, 4.0];
        let err = polynomial_fit(&ds(&g, &g), 2).unwrap_err();
        assert_eq!(err, Error::InsufficientSubgroups { required: 5, got: 4 });
    }

    #[test]
    fn tiny_spread_is_ill_conditioned() {
        let g: Vec<f64> = (0..6).map(|k| 1.0 + 1e-5 * k as f64).collect();
        let err = polynomial_fit(&ds(&g, &g), 2).unwrap_err();
        assert!(matches!(err, Error::IllConditioned(c) if c > 1e10), "{err:?}");
    }

    #[test]
    fn degree_one_is_naive_slope() {
        let g = [1.0, 2.0, 3.0, 4.0];
        let t = [2.0, 4.1, 5.9, 8.2];
        let fit = polynomial_fit(&ds(&g, &t), 1).unwrap();
        assert_eq!(fit.beta_hat, ols_slope(&g, &t).unwrap().beta_hat);
        assert_eq!(fit.method, Method::Polynomial);
    }
}
