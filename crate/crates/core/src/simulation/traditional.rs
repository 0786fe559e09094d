//! Product-of-coefficients mediation estimate under sequential ignorability.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::estimators::{MAX_CONDITION_NUMBER, MIN_BOOTSTRAP_REPLICATES};
use crate::linalg::quantile_sorted;
use crate::rng::{label, substream};
use crate::{Error, IndividualDataset, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraditionalFit {
    pub estimate: f64,
    /// Coefficient of `M` in the regression of `Y` on `(1, T, M)`.
    pub outcome_coef: f64,
    /// Coefficient of `T` in the regression of `M` on `(1, T)`.
    pub mediator_coef: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Gram-matrix eigenvalues within the condition-number limit (squared).
fn well_posed(eigenvalues: &[f64]) -> bool {
    let max = eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > max / (MAX_CONDITION_NUMBER * MAX_CONDITION_NUMBER)
}

/// Pooled product of coefficients for the units in `idx`.
fn product(t: &[f64], m: &[f64], y: &[f64], idx: impl Iterator<Item = usize> + Clone) -> Option<(f64, f64)> {
    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for i in idx {
        let row = Vector3::new(1.0, t[i], m[i]);
        xtx += row * row.transpose();
        xty += row * y[i];
    }
    let a = Matrix2::new(xtx[(0, 0)], xtx[(0, 1)], xtx[(1, 0)], xtx[(1, 1)]);
    if !(well_posed(a.symmetric_eigenvalues().as_slice()) && well_posed(xtx.symmetric_eigenvalues().as_slice())) {
        return None;
    }
    let gamma = a.cholesky()?.solve(&Vector2::new(xtx[(0, 2)], xtx[(1, 2)]))[1];
    let beta = xtx.cholesky()?.solve(&xty)[2];
    (gamma.is_finite() && beta.is_finite()).then_some((beta, gamma))
}

/// Fits `M ~ T` and `Y ~ T + M` by least squares pooled over all units and
/// reports `beta * gamma` with a percentile interval from a nonparametric
/// bootstrap over units.
pub fn traditional_acme(data: &IndividualDataset, replicates: usize, alpha: f64, seed: u64) -> Result<TraditionalFit> {
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (t, m, y) = (data.treatment(), data.mediator(), data.outcome());
    let n = data.len();
    let (beta, gamma) = product(t, m, y, 0..n).ok_or(Error::DegenerateRegression)?;
    let mut draws = Vec::with_capacity(replicates);
    let mut idx = alloc::vec![0usize; n];
    for b in 0..replicates {
        let mut rng = substream(seed, &[label::TRADITIONAL, b as u64]);
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        if let Some((bb, gb)) = product(t, m, y, idx.iter().copied()) {
            draws.push(bb * gb);
        }
    }
    if 2 * draws.len() < replicates {
        return Err(Error::BootstrapUnstable { invalid: replicates - draws.len(), total: replicates });
    }
    draws.sort_by(f64::total_cmp);
    Ok(TraditionalFit {
        estimate: beta * gamma,
        outcome_coef: beta,
        mediator_coef: gamma,
        ci_lower: quantile_sorted(&draws, alpha / 2.0),
        ci_upper: quantile_sorted(&draws, 1.0 - alpha / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;

    #[test]
    fn null_product() {
        let mut rng = substream(1, &[0]);
        let n = 2000;
        let t: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let m: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let y: Vec<f64> = t.iter().map(|v| v + standard_normal(&mut rng)).collect();
        let d = IndividualDataset::new(t, m, y).unwrap();
        let fit = traditional_acme(&d, 199, 0.05, 3).unwrap();
        assert!(fit.estimate.abs() < 0.01, "{}", fit.estimate);
        assert!(fit.ci_lower <= fit.estimate && fit.estimate <= fit.ci_upper);
    }

    #[test]
    fn exact_coefficients() {
        let t: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let m: Vec<f64> = t.iter().enumerate().map(|(i, v)| 2.0 * v + (i % 3) as f64).collect();
        let y: Vec<f64> = t.iter().zip(&m).map(|(t, m)| 1.0 + t + 3.0 * m).collect();
        let d = IndividualDataset::new(t, m, y).unwrap();
        let fit = traditional_acme(&d, 199, 0.05, 3).unwrap();
        assert!((fit.outcome_coef - 3.0).abs() < 1e-9);
        assert!((fit.mediator_coef - 2.0).abs() < 0.05);
    }

    #[test]
    fn singular_design() {
        let d = IndividualDataset::new(alloc::vec![1.0; 10], (0..10).map(f64::from).collect(), alloc::vec![0.0; 10]).unwrap();
        assert_eq!(traditional_acme(&d, 199, 0.05, 0), Err(Error::DegenerateRegression));
    }
}
