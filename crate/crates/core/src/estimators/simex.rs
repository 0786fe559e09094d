//! Simulation-extrapolation (SIMEX).
//!
//! Extra noise with variance `zeta * se_k^2` is added to each `gamma_hat_k`,
//! the naive fit is averaged over replicates at every `zeta`, a quadratic in
//! `zeta` is fitted to those means, and the quadratic is evaluated at
//! `zeta = -1`, where the total measurement variance would be zero.
//!
//! Standard errors come from the Stefanski-Cook variance (at every `zeta`
//! the mean naive variance minus the between-replicate variance of the
//! slope, extrapolated the same way) or from a pairs bootstrap of the whole
//! procedure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{diag, Method, SlopeFit};
use crate::linalg::sample_sd;
use crate::rng::{derive_seed, label, resample_indices, standard_normal, substream};
use crate::{EffectDataset, Error, Result};

/// How the SIMEX standard error is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimexVariance {
    /// Nonparametric pairs bootstrap of the whole procedure over subgroups.
    PairsBootstrap,
    /// Stefanski-Cook extrapolation of `mean naive variance - replicate variance`.
    /// A negative extrapolated variance falls back to the pairs bootstrap.
    #[default]
    Jackknife,
}

impl SimexVariance {
    pub fn as_str(self) -> &'static str {
        match self {
            SimexVariance::PairsBootstrap => "pairs_bootstrap",
            SimexVariance::Jackknife => "jackknife",
        }
    }
}

/// Functional form fitted to the SIMEX curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extrapolant {
    #[default]
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimexConfig {
    /// Added-noise multipliers; strictly increasing and starting at 0.
    pub zeta_grid: Vec<f64>,
    /// Simulated datasets per nonzero grid point.
    pub replicates: usize,
    pub extrapolant: Extrapolant,
    pub seed: u64,
    /// Pairs-bootstrap replicates of the whole procedure for the standard error.
    pub outer_bootstrap: usize,
    pub variance: SimexVariance,
}

impl Default for SimexConfig {
    fn default() -> Self {
        Self {
            zeta_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            replicates: 200,
            extrapolant: Extrapolant::Quadratic,
            seed: 0,
            outer_bootstrap: 100,
            variance: SimexVariance::Jackknife,
        }
    }
}

impl SimexConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.zeta_grid.len() < 3 {
            return Err(Error::UnderdeterminedExtrapolant(self.zeta_grid.len()));
        }
        if self.zeta_grid[0] != 0.0 {
            return Err(Error::InvalidConfig(format!("zeta grid must start at 0, got {}", self.zeta_grid[0])));
        }
        if self.zeta_grid.iter().any(|z| !z.is_finite()) || self.zeta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("zeta grid must be finite and strictly increasing".into()));
        }
        if self.replicates < 50 {
            return Err(Error::InvalidConfig(format!("SIMEX needs at least 50 replicates, got {}", self.replicates)));
        }
        if self.variance == SimexVariance::PairsBootstrap && self.outer_bootstrap < 2 {
            return Err(Error::InvalidConfig("SIMEX standard error needs at least 2 outer bootstrap replicates".into()));
        }
        Ok(())
    }
}

/// A SIMEX slope together with the simulated curve behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimexFit {
    pub fit: SlopeFit,
    /// `(zeta, mean naive slope)` per grid point; the first entry is the
    /// naive slope on the observed data.
    pub curve: Vec<(f64, f64)>,
    /// Coefficients `(a, b, c)` of `a + b zeta + c zeta^2` fitted to the curve.
    pub extrapolant_coefs: [f64; 3],
}

impl SimexFit {
    /// `(zeta, value)` of the extrapolated point.
    pub fn extrapolated_point(&self) -> (f64, f64) {
        (-1.0, self.fit.beta_hat)
    }
}

/// A naive estimator that SIMEX can re-run on perturbed mediator effects.
pub(crate) trait NaiveModel: Sized {
    /// Coefficients of the naive fit given (possibly perturbed) `gamma_hat`.
    /// The first coefficient is `beta`.
    fn fit(&self, x: &[f64]) -> Option<Vec<f64>>;
    /// Classical (homoskedastic) variance of `beta` for the fit `coefs`.
    fn beta_variance(&self, x: &[f64], coefs: &[f64]) -> Option<f64>;
    fn subset(&self, idx: &[usize]) -> Self;
    fn failure(&self) -> Error;
}

/// Simple regression of `tau_hat` on `gamma_hat`; coefficients `[beta, intercept]`.
pub(crate) struct SlopeModel {
    mean_y: f64,
    y_centered: Vec<f64>,
    y: Vec<f64>,
}

impl SlopeModel {
    pub(crate) fn new(y: &[f64]) -> Self {
        let mean_y = crate::linalg::mean(y);
        Self { mean_y, y_centered: y.iter().map(|v| v - mean_y).collect(), y: y.to_vec() }
    }
}

impl NaiveModel for SlopeModel {
    fn fit(&self, x: &[f64]) -> Option<Vec<f64>> {
        // Same arithmetic as `Moments::new`, so the unperturbed fit is bit-identical to OLS.
        let mean_x = crate::linalg::mean(x);
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (xi, yc) in x.iter().zip(&self.y_centered) {
            let dx = xi - mean_x;
            sxx += dx * dx;
            sxy += dx * yc;
        }
        if !(sxx > 0.0) {
            return None;
        }
        let beta = sxy / sxx;
        Some(vec![beta, self.mean_y - beta * mean_x])
    }

    fn beta_variance(&self, x: &[f64], coefs: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        let mean_x = crate::linalg::mean(x);
        let mut sxx = 0.0;
        let mut rss = 0.0;
        for (xi, yi) in x.iter().zip(&self.y) {
            sxx += (xi - mean_x) * (xi - mean_x);
            let e = yi - coefs[1] - coefs[0] * xi;
            rss += e * e;
        }
        (sxx > 0.0 && n > 2.0).then(|| rss / (n - 2.0) / sxx)
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let y: Vec<f64> = idx.iter().map(|&i| self.y[i]).collect();
        Self::new(&y)
    }

    fn failure(&self) -> Error {
        Error::DegenerateRegressor
    }
}

pub(crate) struct SimexPoint {
    /// `curve[j][c]`: mean of coefficient `c` at grid point `j`.
    pub curve: Vec<Vec<f64>>,
    pub extrapolants: Vec<[f64; 3]>,
    pub estimate: Vec<f64>,
    /// Stefanski-Cook variance of `beta`, when requested.
    pub jackknife_variance: Option<f64>,
}

pub(crate) struct SimexOutcome {
    pub point: SimexPoint,
    pub se: Vec<f64>,
    pub valid: usize,
    pub invalid: usize,
    /// Negative jackknife variance that forced the bootstrap fallback.
    pub rejected_jackknife: Option<f64>,
}

/// Rows of `(Z^T Z)^{-1} Z^T` for `Z = [1, zeta, zeta^2]`.
fn quadratic_projector(grid: &[f64]) -> Result<DMatrix<f64>> {
    let z = DMatrix::from_fn(grid.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => grid[i],
        _ => grid[i] * grid[i],
    });
    let ztz_inv = (z.transpose() * &z).try_inverse().ok_or(Error::UnderdeterminedExtrapolant(grid.len()))?;
    Ok(ztz_inv * z.transpose())
}

fn simex_point<M: NaiveModel>(
    model: &M,
    x: &[f64],
    se: &[f64],
    config: &SimexConfig,
    projector: &DMatrix<f64>,
    seed: u64,
) -> Option<SimexPoint> {
    let naive = model.fit(x)?;
    let n_coef = naive.len();
    let grid = &config.zeta_grid;
    let jackknife = config.variance == SimexVariance::Jackknife;
    let naive_var = if jackknife { Some(model.beta_variance(x, &naive)?) } else { None };

    if se.iter().all(|s| *s == 0.0) {
        return Some(SimexPoint {
            curve: vec![naive.clone(); grid.len()],
            extrapolants: naive.iter().map(|&v| [v, 0.0, 0.0]).collect(),
            estimate: naive,
            jackknife_variance: naive_var,
        });
    }

    let mut curve = Vec::with_capacity(grid.len());
    curve.push(naive);
    // mean naive variance minus replicate variance of beta, per grid point
    let mut var_curve = Vec::with_capacity(grid.len());
    var_curve.push(naive_var.unwrap_or(0.0));
    let mut x_star = vec![0.0; x.len()];
    let mut betas = Vec::with_capacity(config.replicates);
    for (j, &zeta) in grid.iter().enumerate().skip(1) {
        let scale = libm::sqrt(zeta);
        let mut sums = vec![0.0; n_coef];
        let mut var_sum = 0.0;
        let mut ok = 0usize;
        betas.clear();
        for b in 0..config.replicates {
            let mut rng = substream(seed, &[label::SIMEX, j as u64, b as u64]);
            for ((xs, xi), s) in x_star.iter_mut().zip(x).zip(se) {
                *xs = xi + scale * s * standard_normal(&mut rng);
            }
            if let Some(coefs) = model.fit(&x_star) {
                if jackknife {
                    match model.beta_variance(&x_star, &coefs) {
                        Some(v) => var_sum += v,
                        None => continue,
                    }
                    betas.push(coefs[0]);
                }
                for (acc, c) in sums.iter_mut().zip(coefs) {
                    *acc += c;
                }
                ok += 1;
            }
        }
        if ok == 0 {
            return None;
        }
        curve.push(sums.into_iter().map(|s| s / ok as f64).collect());
        if jackknife {
            let spread = if betas.len() > 1 { crate::linalg::sample_variance(&betas) } else { 0.0 };
            var_curve.push(var_sum / ok as f64 - spread);
        }
    }
    let extrapolate = |values: &dyn Fn(usize) -> f64| -> [f64; 3] {
        let mut coefs = [0.0; 3];
        for (r, coef) in coefs.iter_mut().enumerate() {
            *coef = (0..grid.len()).map(|j| projector[(r, j)] * values(j)).sum();
        }
        coefs
    };
    let jackknife_variance = jackknife.then(|| {
        let c = extrapolate(&|j| var_curve[j]);
        c[0] - c[1] + c[2]
    });

    let mut extrapolants = Vec::with_capacity(n_coef);
    let mut estimate = Vec::with_capacity(n_coef);
    // `c` indexes the inner vectors of `curve`
    #[allow(clippy::needless_range_loop)]
    for c in 0..n_coef {
        let coefs = extrapolate(&|j| curve[j][c]);
        estimate.push(coefs[0] - coefs[1] + coefs[2]);
        extrapolants.push(coefs);
    }
    Some(SimexPoint { curve, extrapolants, estimate, jackknife_variance })
}

/// SIMEX point estimate plus the outer pairs bootstrap.
pub(crate) fn run_simex<M: NaiveModel>(model: &M, x: &[f64], se: &[f64], config: &SimexConfig) -> Result<SimexOutcome> {
    config.validate()?;
    let projector = quadratic_projector(&config.zeta_grid)?;
    let point = simex_point(model, x, se, config, &projector, config.seed).ok_or_else(|| model.failure())?;
    let mut rejected_jackknife = None;
    if let Some(var) = point.jackknife_variance {
        if var >= 0.0 {
            let mut se_out = vec![f64::NAN; point.estimate.len()];
            se_out[0] = libm::sqrt(var);
            return Ok(SimexOutcome { point, se: se_out, valid: 0, invalid: 0, rejected_jackknife });
        }
        if config.outer_bootstrap < 2 {
            return Err(Error::NegativeVariance(var));
        }
        rejected_jackknife = Some(var);
    }
    let config = &SimexConfig { variance: SimexVariance::PairsBootstrap, ..config.clone() };

    let k = x.len();
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(config.outer_bootstrap);
    let mut invalid = 0usize;
    let mut xs = vec![0.0; k];
    let mut ss = vec![0.0; k];
    for ob in 0..config.outer_bootstrap {
        let mut rng = substream(config.seed, &[label::SIMEX_OUTER, ob as u64]);
        let idx = resample_indices(&mut rng, k);
        for (pos, &i) in idx.iter().enumerate() {
            xs[pos] = x[i];
            ss[pos] = se[i];
        }
        let sub = model.subset(&idx);
        let inner_seed = derive_seed(config.seed, &[label::SIMEX_OUTER, ob as u64, 1]);
        match simex_point(&sub, &xs, &ss, config, &projector, inner_seed) {
            Some(p) => draws.push(p.estimate),
            None => invalid += 1,
        }
    }
    if 2 * invalid > config.outer_bootstrap || draws.len() < 2 {
        return Err(Error::BootstrapUnstable { invalid, total: config.outer_bootstrap });
    }
    let se_out = (0..point.estimate.len())
        .map(|c| sample_sd(&draws.iter().map(|d| d[c]).collect::<Vec<_>>()))
        .collect();
    Ok(SimexOutcome { point, se: se_out, valid: draws.len(), invalid, rejected_jackknife })
}

/// SIMEX slope of `tau_hat` on `gamma_hat`.
pub fn simex_estimate(dataset: &EffectDataset, config: &SimexConfig) -> Result<SimexFit> {
    let x = dataset.gamma_hats();
    let se = dataset.se_gammas();
    let model = SlopeModel::new(&dataset.tau_hats());
    let out = run_simex(&model, &x, &se, config)?;
    let naive_beta = out.point.curve[0][0];
    let mut fit = SlopeFit {
        beta_hat: out.point.estimate[0],
        se_beta: out.se[0],
        intercept_hat: out.point.estimate[1],
        method: Method::Simex,
        extra_coefs: Vec::new(),
        diagnostics: Vec::new(),
    };
    fit.push_diag(diag::NAIVE_BETA, naive_beta);
    fit.push_diag(diag::BOOT_VALID, out.valid as f64);
    fit.push_diag(diag::BOOT_INVALID, out.invalid as f64);
    if let Some(v) = out.rejected_jackknife {
        fit.push_diag(diag::REJECTED_JACKKNIFE_VARIANCE, v);
    }
    Ok(SimexFit {
        fit,
        curve: config.zeta_grid.iter().zip(&out.point.curve).map(|(&z, c)| (z, c[0])).collect(),
        extrapolant_coefs: out.point.extrapolants[0],
    })
}
