use alloc::format;
use alloc::vec::Vec;

use super::{dgp_aggregate, dgp_confounded, traditional_acme, AggregateDgpConfig, ConfoundedDgpConfig};
use crate::estimators::{bces_bootstrap, bces_estimate, naive_fit, simex_estimate, BootstrapMode, SimexConfig, SlopeFit};
use crate::inference::{analyze, iu_test, CiMode, GammaAggregate, MediationResult};
use crate::rng::{derive_seed, label};
use crate::subgroups::{estimate_group_effects, group_by_rules};
use crate::{EffectDataset, Error, IndividualDataset, Result};

/// Labelled unit data to a SIMEX mediation result: per-group effects, SIMEX
/// slope, then aggregation, testing and the conservative interval.
pub fn hte_pipeline(data: &IndividualDataset, simex: &SimexConfig, alpha: f64, ci_mode: CiMode) -> Result<MediationResult> {
    let partition = group_by_rules(data, &[])?;
    let effects = estimate_group_effects(data, &partition)?;
    let fit = simex_estimate(&effects, simex)?.fit;
    analyze(&effects, fit, alpha, ci_mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Config {
    pub kappas: Vec<f64>,
    pub reps: usize,
    pub n_per_group: usize,
    pub gamma_set: Vec<f64>,
    pub alpha: f64,
    pub ci_mode: CiMode,
    /// Its seed is replaced per replication.
    pub simex: SimexConfig,
    pub traditional_replicates: usize,
    pub seed: u64,
}

impl Default for Table2Config {
    fn default() -> Self {
        Self {
            kappas: alloc::vec![0.0, 1.0, 2.0, 3.0, 4.0],
            reps: 200,
            n_per_group: 500,
            gamma_set: (1..=10).map(f64::from).collect(),
            alpha: 0.05,
            ci_mode: CiMode::EndpointProduct,
            simex: SimexConfig::default(),
            traditional_replicates: 499,
            seed: 0,
        }
    }
}

/// Averages over replications for one confounding strength.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub kappa: f64,
    pub true_acme: f64,
    pub reps: usize,
    pub hte_acme: f64,
    pub hte_ci_lower: f64,
    pub hte_ci_upper: f64,
    /// Share of all replications whose interval covers the truth; failed
    /// replications count as not covering.
    pub hte_coverage: f64,
    pub hte_failures: usize,
    pub trad_acme: f64,
    pub trad_ci_lower: f64,
    pub trad_ci_upper: f64,
    pub trad_coverage: f64,
    pub trad_failures: usize,
}

#[derive(Default)]
struct Averager {
    sums: [f64; 4],
    n: usize,
    failures: usize,
}

impl Averager {
    fn push(&mut self, estimate: f64, lo: f64, hi: f64, truth: f64) {
        let covered = (lo <= truth && truth <= hi) as u8 as f64;
        for (s, v) in self.sums.iter_mut().zip([estimate, lo, hi, covered]) {
            *s += v;
        }
        self.n += 1;
    }

    /// Mean estimate and bounds over successes; coverage over all attempts.
    fn means(&self) -> [f64; 4] {
        if self.n == 0 {
            return [f64::NAN, f64::NAN, f64::NAN, 0.0];
        }
        let n = self.n as f64;
        let [e, l, h, c] = self.sums;
        [e / n, l / n, h / n, c / (self.n + self.failures) as f64]
    }
}

/// HTE (SIMEX) against the pooled product of coefficients on the confounded
/// DGP. Replication `r` uses the same draws for every `kappa`.
pub fn run_table2(config: &Table2Config) -> Result<Vec<Table2Row>> {
    if config.reps == 0 {
        return Err(Error::InvalidConfig("reps must be positive".into()));
    }
    let mut rows = Vec::with_capacity(config.kappas.len());
    for &kappa in &config.kappas {
        let mut hte = Averager::default();
        let mut trad = Averager::default();
        let mut truth = 0.0;
        for r in 0..config.reps {
            let rep_seed = derive_seed(config.seed, &[label::TABLE2, r as u64]);
            let dgp = ConfoundedDgpConfig {
                kappa,
                gamma_set: config.gamma_set.clone(),
                n_per_group: config.n_per_group,
                seed: rep_seed,
            };
            let sample = dgp_confounded(&dgp)?;
            truth = sample.true_acme;
            match hte_pipeline(&sample.data, &config.simex.clone().with_seed(rep_seed), config.alpha, config.ci_mode) {
                Ok(res) => hte.push(res.acme_hat, res.ci_lower, res.ci_upper, truth),
                Err(_) => hte.failures += 1,
            }
            match traditional_acme(&sample.data, config.traditional_replicates, config.alpha, rep_seed) {
                Ok(fit) => trad.push(fit.estimate, fit.ci_lower, fit.ci_upper, truth),
                Err(_) => trad.failures += 1,
            }
        }
        let [ha, hl, hu, hc] = hte.means();
        let [ta, tl, tu, tc] = trad.means();
        rows.push(Table2Row {
            kappa,
            true_acme: truth,
            reps: config.reps,
            hte_acme: ha,
            hte_ci_lower: hl,
            hte_ci_upper: hu,
            hte_coverage: hc,
            hte_failures: hte.failures,
            trad_acme: ta,
            trad_ci_lower: tl,
            trad_ci_upper: tu,
            trad_coverage: tc,
            trad_failures: trad.failures,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationEstimator {
    Naive,
    /// BCES with its asymptotic sandwich standard error.
    Bces,
    /// BCES with a pairs-bootstrap standard error.
    BcesPairs,
    /// BCES with a restricted wild-bootstrap p-value.
    BcesWild,
    Simex,
}

impl CalibrationEstimator {
    pub const ALL: [CalibrationEstimator; 5] = [Self::Naive, Self::Bces, Self::BcesPairs, Self::BcesWild, Self::Simex];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Bces => "bces",
            Self::BcesPairs => "bces_pairs",
            Self::BcesWild => "bces_wild",
            Self::Simex => "simex",
        }
    }

    fn fit(self, data: &EffectDataset, simex: &SimexConfig, replicates: usize, seed: u64) -> Result<SlopeFit> {
        match self {
            Self::Naive => naive_fit(data),
            Self::Bces => bces_estimate(data),
            Self::BcesPairs => bces_bootstrap(data, BootstrapMode::Pairs, replicates, seed),
            Self::BcesWild => bces_bootstrap(data, BootstrapMode::WildRestricted, replicates, seed),
            Self::Simex => simex_estimate(data, &simex.clone().with_seed(seed)).map(|f| f.fit),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub beta: f64,
    pub ks: Vec<usize>,
    pub reps: usize,
    pub estimators: Vec<CalibrationEstimator>,
    pub alpha: f64,
    pub simex: SimexConfig,
    pub bootstrap_replicates: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            ks: alloc::vec![5, 10, 30, 50, 100],
            reps: 500,
            estimators: CalibrationEstimator::ALL.to_vec(),
            alpha: 0.05,
            simex: SimexConfig::default(),
            bootstrap_replicates: 999,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub k: usize,
    pub estimator: CalibrationEstimator,
    pub beta: f64,
    pub reps: usize,
    /// Rejections over all replications; a failed fit counts as a
    /// non-rejection.
    pub rejection_rate: f64,
    pub failures: usize,
}

fn rejects(fit: &SlopeFit, data: &EffectDataset, alpha: f64) -> Result<bool> {
    Ok(iu_test(fit, &GammaAggregate::from_dataset(data), alpha)?.p_overall <= alpha)
}

/// Rejection rates of the intersection-union test on the aggregate DGP.
/// All estimators see the same datasets.
pub fn run_calibration(config: &CalibrationConfig) -> Result<Vec<CalibrationRow>> {
    if config.reps < 200 {
        return Err(Error::InvalidConfig(format!("calibration needs at least 200 reps, got {}", config.reps)));
    }
    let mut rows = Vec::new();
    for &k in &config.ks {
        let mut rejections = alloc::vec![0usize; config.estimators.len()];
        let mut failures = alloc::vec![0usize; config.estimators.len()];
        for r in 0..config.reps {
            let rep_seed = derive_seed(config.seed, &[label::CALIBRATION, k as u64, r as u64]);
            let (data, _) = dgp_aggregate(&AggregateDgpConfig { k, beta: config.beta, seed: rep_seed, ..AggregateDgpConfig::default() })?;
            for (e, est) in config.estimators.iter().enumerate() {
                match est.fit(&data, &config.simex, config.bootstrap_replicates, rep_seed).and_then(|f| rejects(&f, &data, config.alpha)) {
                    Ok(true) => rejections[e] += 1,
                    Ok(false) => {}
                    Err(_) => failures[e] += 1,
                }
            }
        }
        for (e, &estimator) in config.estimators.iter().enumerate() {
            rows.push(CalibrationRow {
                k,
                estimator,
                beta: config.beta,
                reps: config.reps,
                rejection_rate: rejections[e] as f64 / config.reps as f64,
                failures: failures[e],
            });
        }
    }
    Ok(rows)
}

/// Standard-error multiplier after adding `k n / 10` units to each of ten
/// groups of size `n`: `sqrt(n / (n + k n / 10))`.
pub fn grow_se_multiplier(n: usize, k: usize) -> f64 {
    let n = n as f64;
    libm::sqrt(n / (n + k as f64 * n / 10.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    pub base_groups: usize,
    pub n: usize,
    pub k_max: usize,
    pub reps: usize,
    pub beta: f64,
    pub alpha: f64,
    pub simex: SimexConfig,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            base_groups: 10,
            n: 100,
            k_max: 10,
            reps: 500,
            beta: 2.0,
            alpha: 0.05,
            simex: SimexConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub k: usize,
    /// `k` more groups of the original size.
    pub add_power: f64,
    /// The same units spread over the existing groups.
    pub grow_power: f64,
    pub add_failures: usize,
    pub grow_failures: usize,
}

/// SIMEX power of adding `k` groups against growing every existing group,
/// for `k = 0..=k_max`, on the aggregate DGP.
///
/// Within a replication every arm shares the latent draws of the existing
/// groups and the SIMEX seed, so differences between arms and across `k`
/// are not blurred by independent noise.
pub fn power_curve(config: &PowerConfig) -> Result<Vec<PowerPoint>> {
    if config.base_groups < crate::model::MIN_SUBGROUPS {
        return Err(Error::InsufficientSubgroups { required: crate::model::MIN_SUBGROUPS, got: config.base_groups });
    }
    if config.reps == 0 || config.n == 0 {
        return Err(Error::InvalidConfig("reps and n must be positive".into()));
    }
    let ks = config.k_max + 1;
    let mut add = alloc::vec![(0usize, 0usize); ks];
    let mut grow = alloc::vec![(0usize, 0usize); ks];
    let estimator = CalibrationEstimator::Simex;
    let tally = |slot: &mut (usize, usize), outcome: Result<bool>| match outcome {
        Ok(true) => slot.0 += 1,
        Ok(false) => {}
        Err(_) => slot.1 += 1,
    };
    for r in 0..config.reps {
        let rep_seed = derive_seed(config.seed, &[label::POWER, r as u64]);
        let base = AggregateDgpConfig { k: config.base_groups, beta: config.beta, seed: rep_seed, ..AggregateDgpConfig::default() };
        let run = |cfg: &AggregateDgpConfig| -> Result<bool> {
            let (data, _) = dgp_aggregate(cfg)?;
            let fit = estimator.fit(&data, &config.simex, 0, rep_seed)?;
            rejects(&fit, &data, config.alpha)
        };
        let baseline = run(&base);
        for k in 0..ks {
            if k == 0 {
                tally(&mut add[0], baseline.clone());
                tally(&mut grow[0], baseline.clone());
                continue;
            }
            tally(&mut add[k], run(&AggregateDgpConfig { k: config.base_groups + k, ..base.clone() }));
            tally(&mut grow[k], run(&AggregateDgpConfig { se_scale: grow_se_multiplier(config.n, k), ..base.clone() }));
        }
    }
    let reps = config.reps as f64;
    Ok((0..ks)
        .map(|k| PowerPoint {
            k,
            add_power: add[k].0 as f64 / reps,
            grow_power: grow[k].0 as f64 / reps,
            add_failures: add[k].1,
            grow_failures: grow[k].1,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grow_multiplier() {
        assert_eq!(grow_se_multiplier(100, 10), core::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(grow_se_multiplier(37, 10), core::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(grow_se_multiplier(100, 0), 1.0);
    }

    #[test]
    fn alpha_one_always_rejects() {
        let cfg = CalibrationConfig {
            ks: alloc::vec![5],
            reps: 200,
            estimators: alloc::vec![CalibrationEstimator::Naive],
            alpha: 1.0,
            ..CalibrationConfig::default()
        };
        let rows = run_calibration(&cfg).unwrap();
        assert_eq!(rows[0].rejection_rate, 1.0);
        assert_eq!(rows[0].failures, 0);
    }

    #[test]
    fn calibration_requires_reps() {
        let cfg = CalibrationConfig { reps: 10, ..CalibrationConfig::default() };
        assert!(matches!(run_calibration(&cfg), Err(Error::InvalidConfig(_))));
    }

    fn small_simex() -> SimexConfig {
        SimexConfig { replicates: 50, outer_bootstrap: 20, ..SimexConfig::default() }
    }

    #[test]
    fn power_arms_agree_at_zero() {
        let cfg = PowerConfig { k_max: 1, reps: 6, simex: small_simex(), ..PowerConfig::default() };
        let curve = power_curve(&cfg).unwrap();
        assert_eq!(curve[0].add_power, curve[0].grow_power);
        assert_eq!(curve.len(), 2);
    }

    #[test]
    fn table2_is_deterministic() {
        let cfg = Table2Config {
            kappas: alloc::vec![0.0],
            reps: 1,
            n_per_group: 100,
            simex: small_simex(),
            traditional_replicates: 199,
            seed: 8,
            ..Table2Config::default()
        };
        let a = run_table2(&cfg).unwrap();
        assert_eq!(a, run_table2(&cfg).unwrap());
        assert_eq!(a[0].hte_failures, 0);
        assert!((a[0].hte_acme - 5.5).abs() < 1.0, "{:?}", a[0]);
    }
}
