use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::{gamma, label, standard_normal, substream};
use crate::{EffectDataset, Error, IndividualDataset, LatentEffects, Result, SubgroupEffect};

/// Unit-level DGP with an unobserved confounder `u` of mediator and outcome:
///
/// `M = 1 + gamma_g T + kappa u + e_M`, `Y = 1 + T + M + kappa u + e_Y`,
/// with `T`, `u`, `e_M`, `e_Y` independent standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundedDgpConfig {
    pub kappa: f64,
    pub gamma_set: Vec<f64>,
    pub n_per_group: usize,
    pub seed: u64,
}

impl Default for ConfoundedDgpConfig {
    fn default() -> Self {
        Self { kappa: 0.0, gamma_set: (1..=10).map(f64::from).collect(), n_per_group: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundedSample {
    /// Group labels are `g01`, `g02`, ... in `gamma_set` order.
    pub data: IndividualDataset,
    /// Mean of `gamma_set`: the coefficient of `M` in `Y` is one.
    pub true_acme: f64,
}

pub fn dgp_confounded(config: &ConfoundedDgpConfig) -> Result<ConfoundedSample> {
    if config.gamma_set.is_empty() {
        return Err(Error::InvalidConfig("gamma_set must not be empty".into()));
    }
    if !(config.kappa >= 0.0) {
        return Err(Error::InvalidConfig(format!("kappa must be non-negative, got {}", config.kappa)));
    }
    if config.n_per_group < 3 {
        return Err(Error::InvalidConfig("n_per_group must be at least 3".into()));
    }
    let total = config.gamma_set.len() * config.n_per_group;
    let (mut t, mut m, mut y) = (Vec::with_capacity(total), Vec::with_capacity(total), Vec::with_capacity(total));
    let mut labels: Vec<String> = Vec::with_capacity(total);
    let width = format!("{}", config.gamma_set.len()).len().max(2);
    for (g, &gamma_g) in config.gamma_set.iter().enumerate() {
        let mut rng = substream(config.seed, &[label::DGP, g as u64]);
        let id = format!("g{:0width$}", g + 1);
        for _ in 0..config.n_per_group {
            let ti = standard_normal(&mut rng);
            let u = standard_normal(&mut rng);
            let em = standard_normal(&mut rng);
            let ey = standard_normal(&mut rng);
            let mi = 1.0 + gamma_g * ti + config.kappa * u + em;
            t.push(ti);
            m.push(mi);
            y.push(1.0 + ti + mi + config.kappa * u + ey);
            labels.push(id.clone());
        }
    }
    let data = IndividualDataset::new(t, m, y)?.with_group_labels(labels)?;
    let true_acme = config.gamma_set.iter().sum::<f64>() / config.gamma_set.len() as f64;
    Ok(ConfoundedSample { data, true_acme })
}

/// Aggregate-level DGP: `gamma_k ~ N(gamma_mean, gamma_sd^2)`,
/// `tau_k = delta_mean + beta gamma_k + N(0, 1)`, standard errors
/// `sigma_u, sigma_v ~ Gamma(se_shape, se_rate)` and observed
/// `gamma_hat = gamma + N(0, sigma_u^2)`, `tau_hat = tau + N(0, sigma_v^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDgpConfig {
    pub k: usize,
    pub beta: f64,
    pub delta_mean: f64,
    pub gamma_mean: f64,
    pub gamma_sd: f64,
    pub se_shape: f64,
    pub se_rate: f64,
    /// Multiplies both drawn standard errors; zero gives exact latent data.
    pub se_scale: f64,
    /// Replaces the gamma draws with fixed `(sigma_u, sigma_v)`.
    pub fixed_se: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for AggregateDgpConfig {
    fn default() -> Self {
        Self {
            k: 10,
            beta: 0.0,
            delta_mean: 4.0,
            gamma_mean: 2.0,
            gamma_sd: 1.0,
            se_shape: 1.0,
            se_rate: 1.0,
            se_scale: 1.0,
            fixed_se: None,
            seed: 0,
        }
    }
}

/// Group `k` uses its own substream, so the first `K` groups of a larger
/// draw coincide with a draw of `K` groups under the same seed.
pub fn dgp_aggregate(config: &AggregateDgpConfig) -> Result<(EffectDataset, LatentEffects)> {
    if config.k < crate::model::MIN_SUBGROUPS {
        return Err(Error::InsufficientSubgroups { required: crate::model::MIN_SUBGROUPS, got: config.k });
    }
    if !(config.se_shape > 0.0 && config.se_rate > 0.0 && config.se_scale >= 0.0 && config.gamma_sd >= 0.0) {
        return Err(Error::InvalidConfig("standard-error distribution parameters must be positive".into()));
    }
    let mut raw = Vec::with_capacity(config.k);
    let mut latent = LatentEffects { gamma: Vec::new(), delta: Vec::new(), tau: Vec::new(), beta: config.beta };
    for k in 0..config.k {
        let mut rng = substream(config.seed, &[label::DGP, k as u64]);
        let g = config.gamma_mean + config.gamma_sd * standard_normal(&mut rng);
        let delta = config.delta_mean + standard_normal(&mut rng);
        let tau = delta + config.beta * g;
        let (mut su, mut sv) = (gamma(&mut rng, config.se_shape, config.se_rate), gamma(&mut rng, config.se_shape, config.se_rate));
        if let Some((u, v)) = config.fixed_se {
            su = u;
            sv = v;
        }
        su *= config.se_scale;
        sv *= config.se_scale;
        let g_hat = g + su * standard_normal(&mut rng);
        let t_hat = tau + sv * standard_normal(&mut rng);
        raw.push(SubgroupEffect::new(format!("k{}", k + 1), g_hat, su, t_hat, sv, 1));
        latent.gamma.push(g);
        latent.delta.push(delta);
        latent.tau.push(tau);
    }
    Ok((EffectDataset::new(raw)?, latent))
}

/// Unit-level DGP with one moderator of the treatment effect on the
/// mediator: `x_j ~ U(0, 1)`, `T ~ Bernoulli(1/2)`,
/// `M = 1 + g(x_1) T + e_M` with `g = 1 + 2 [x_1 > 0.5]` (or `g = 2` when
/// homogeneous) and `Y = 1 + T + M + e_Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeratorDgpConfig {
    pub n: usize,
    pub covariates: usize,
    pub heterogeneous: bool,
    pub seed: u64,
}

impl Default for ModeratorDgpConfig {
    fn default() -> Self {
        Self { n: 5000, covariates: 3, heterogeneous: true, seed: 0 }
    }
}

pub fn dgp_moderator(config: &ModeratorDgpConfig) -> Result<IndividualDataset> {
    if config.covariates == 0 {
        return Err(Error::InvalidConfig("at least one covariate is required".into()));
    }
    let mut rng = substream(config.seed, &[label::DGP]);
    let mut x: Vec<Vec<f64>> = (0..config.covariates).map(|_| Vec::with_capacity(config.n)).collect();
    let (mut t, mut m, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..config.n {
        for col in x.iter_mut() {
            col.push(rng.random::<f64>());
        }
        let ti = if rng.random::<bool>() { 1.0 } else { 0.0 };
        let g = match (config.heterogeneous, x[0].last().copied().unwrap_or(0.0) > 0.5) {
            (true, true) => 3.0,
            (true, false) => 1.0,
            (false, _) => 2.0,
        };
        let mi = 1.0 + g * ti + standard_normal(&mut rng);
        t.push(ti);
        m.push(mi);
        y.push(1.0 + ti + mi + standard_normal(&mut rng));
    }
    let names = (1..=config.covariates).map(|j| format!("x{j}")).collect();
    IndividualDataset::new(t, m, y)?.with_covariates(names, x)
}
