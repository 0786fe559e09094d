//! Cross-module properties and Monte Carlo oracles.

use proptest::prelude::*;

use hte_mediation_core::estimators::{
    adjusted_fit, attenuation_corrected, bces_bootstrap, bces_estimate, naive_fit, ols_slope, simex_estimate,
    AdjustMethod, BootstrapMode, SimexConfig,
};
use hte_mediation_core::inference::CiMode;
use hte_mediation_core::rng::{standard_normal, substream};
use hte_mediation_core::simulation::{
    dgp_aggregate, dgp_confounded, dgp_moderator, hte_pipeline, run_calibration, AggregateDgpConfig,
    CalibrationConfig, CalibrationEstimator, ConfoundedDgpConfig, ModeratorDgpConfig,
};
use hte_mediation_core::subgroups::{fit_causal_tree, TreeConfig, TreeTarget};
use hte_mediation_core::{EffectDataset, SubgroupEffect};

fn dataset(gamma_hat: &[f64], se_gamma: &[f64], tau_hat: &[f64]) -> EffectDataset {
    let raw = (0..gamma_hat.len())
        .map(|k| SubgroupEffect::new(format!("g{k}"), gamma_hat[k], se_gamma[k], tau_hat[k], 0.0, 1))
        .collect();
    EffectDataset::new(raw).unwrap()
}

fn rates(ks: Vec<usize>, estimators: Vec<CalibrationEstimator>) -> Vec<(usize, &'static str, f64)> {
    run_calibration(&CalibrationConfig { ks, estimators, ..CalibrationConfig::default() })
        .unwrap()
        .into_iter()
        .map(|r| (r.k, r.estimator.as_str(), r.rejection_rate))
        .collect()
}

fn data_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|k| {
        (
            proptest::collection::vec(-10.0f64..10.0, k),
            proptest::collection::vec(0.01f64..2.0, k),
            proptest::collection::vec(-10.0f64..10.0, k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn simex_curve_starts_at_naive_slope((g, se, t) in data_strategy(), seed in any::<u64>()) {
        prop_assume!(g.iter().any(|v| *v != g[0]));
        let d = dataset(&g, &se, &t);
        let naive = naive_fit(&d).unwrap();
        let cfg = SimexConfig { replicates: 50, ..SimexConfig::default() }.with_seed(seed);
        if let Ok(fit) = simex_estimate(&d, &cfg) {
            prop_assert_eq!(fit.curve[0].1.to_bits(), naive.beta_hat.to_bits());
        }
    }

    #[test]
    fn bces_without_noise_is_ols((g, _, t) in data_strategy()) {
        prop_assume!(g.iter().any(|v| *v != g[0]));
        let d = dataset(&g, &vec![0.0; g.len()], &t);
        let ols = ols_slope(&g, &t).unwrap();
        let bces = bces_estimate(&d).unwrap();
        prop_assert_eq!(bces.beta_hat.to_bits(), ols.beta_hat.to_bits());
        prop_assert_eq!(bces.intercept_hat.to_bits(), ols.intercept_hat.to_bits());
    }

    #[test]
    fn randomized_routines_are_pure_in_seed(seed in any::<u64>()) {
        let cfg = AggregateDgpConfig { k: 12, beta: 1.0, seed, ..AggregateDgpConfig::default() };
        let (d, latent) = dgp_aggregate(&cfg).unwrap();
        prop_assert_eq!(dgp_aggregate(&cfg).unwrap(), (d.clone(), latent));

        let pairs = bces_bootstrap(&d, BootstrapMode::Pairs, 199, seed);
        prop_assert_eq!(&pairs, &bces_bootstrap(&d, BootstrapMode::Pairs, 199, seed));
        let simex = SimexConfig { replicates: 50, ..SimexConfig::default() }.with_seed(seed);
        prop_assert_eq!(simex_estimate(&d, &simex), simex_estimate(&d, &simex));

        let conf = ConfoundedDgpConfig { kappa: 1.0, n_per_group: 40, seed, ..ConfoundedDgpConfig::default() };
        prop_assert_eq!(dgp_confounded(&conf).unwrap(), dgp_confounded(&conf).unwrap());

        let units = dgp_moderator(&ModeratorDgpConfig { n: 800, seed, ..ModeratorDgpConfig::default() }).unwrap();
        let tree = TreeConfig { seed, ..TreeConfig::default() };
        prop_assert_eq!(
            fit_causal_tree(&units, TreeTarget::Mediator, &tree).unwrap(),
            fit_causal_tree(&units, TreeTarget::Mediator, &tree).unwrap()
        );
    }
}

#[test]
fn attenuation_correction_at_large_k() {
    // sigma_gamma^2 = 1 and sigma_u = 1: lambda = 0.5
    let cfg = AggregateDgpConfig { k: 10_000, beta: 2.0, fixed_se: Some((1.0, 1.0)), seed: 11, ..AggregateDgpConfig::default() };
    let (d, _) = dgp_aggregate(&cfg).unwrap();
    let naive = naive_fit(&d).unwrap().beta_hat;
    let corrected = attenuation_corrected(&d).unwrap().beta_hat;
    assert!((naive - 1.0).abs() < 0.05, "{naive}");
    assert!((corrected - 2.0).abs() < 0.05, "{corrected}");
}

#[test]
fn simex_removes_attenuation() {
    // gamma ~ N(2, 1), tau = 4 + 2 gamma, sigma_u = 0.5: lambda = 0.8
    let (k, reps) = (200, 20);
    let (mut naive, mut simex) = (0.0, 0.0);
    for r in 0..reps {
        let mut rng = substream(r, &[0]);
        let gamma: Vec<f64> = (0..k).map(|_| 2.0 + standard_normal(&mut rng)).collect();
        let tau: Vec<f64> = gamma.iter().map(|g| 4.0 + 2.0 * g).collect();
        let gamma_hat: Vec<f64> = gamma.iter().map(|g| g + 0.5 * standard_normal(&mut rng)).collect();
        let d = dataset(&gamma_hat, &vec![0.5; k], &tau);
        naive += naive_fit(&d).unwrap().beta_hat / reps as f64;
        simex += simex_estimate(&d, &SimexConfig::default().with_seed(r)).unwrap().fit.beta_hat / reps as f64;
    }
    assert!((naive - 1.6).abs() < 0.05, "{naive}");
    assert!((simex - 2.0).abs() < 0.1, "{simex}");
}

#[test]
fn estimators_on_latent_effects_are_consistent() {
    let cfg = AggregateDgpConfig { k: 10_000, beta: 2.0, se_scale: 0.0, seed: 3, ..AggregateDgpConfig::default() };
    let (d, latent) = dgp_aggregate(&cfg).unwrap();
    assert_eq!(d.gamma_hats(), latent.gamma);
    for beta in [
        naive_fit(&d).unwrap().beta_hat,
        bces_estimate(&d).unwrap().beta_hat,
        simex_estimate(&d, &SimexConfig::default()).unwrap().fit.beta_hat,
    ] {
        assert!((beta - 2.0).abs() < 0.05, "{beta}");
    }
}

#[test]
fn adjustment_removes_confounding_by_a_moderator() {
    // E[X_k] raises both the mediator effect and the direct effect
    let (k, beta) = (500, 2.0);
    let mut rng = substream(21, &[0]);
    let mut raw = Vec::with_capacity(k);
    for i in 0..k {
        let x = standard_normal(&mut rng);
        let gamma = 2.0 + x + 0.5 * standard_normal(&mut rng);
        let delta = 4.0 + 1.5 * x + 0.3 * standard_normal(&mut rng);
        let g_hat = gamma + 0.05 * standard_normal(&mut rng);
        let t_hat = delta + beta * gamma + 0.05 * standard_normal(&mut rng);
        raw.push(SubgroupEffect::new(format!("g{i}"), g_hat, 0.05, t_hat, 0.05, 100).with_covariate_means(vec![x]));
    }
    let d = EffectDataset::new(raw).unwrap().with_covariate_names(vec!["x".into()]).unwrap();
    let plain = naive_fit(&d).unwrap().beta_hat;
    let adjusted = adjusted_fit(&d, &AdjustMethod::Naive).unwrap().beta_hat;
    assert!(plain - beta > 0.5, "unadjusted slope should be biased upwards: {plain}");
    assert!((adjusted - beta).abs() < 0.05 * beta, "{adjusted}");
    let simex = adjusted_fit(&d, &AdjustMethod::Simex(SimexConfig::default())).unwrap().beta_hat;
    assert!((simex - beta).abs() < 0.05 * beta, "{simex}");
}

#[test]
fn pipeline_recovers_acme_with_given_labels() {
    let sample = dgp_confounded(&ConfoundedDgpConfig { kappa: 0.0, seed: 4, ..ConfoundedDgpConfig::default() }).unwrap();
    let result = hte_pipeline(&sample.data, &SimexConfig::default().with_seed(4), 0.05, CiMode::EndpointProduct).unwrap();
    assert!((result.acme_hat - 5.5).abs() < 0.5, "{}", result.acme_hat);
}

#[test]
fn simex_size_is_controlled_at_moderate_k() {
    for (k, _, rate) in rates(vec![30, 100], vec![CalibrationEstimator::Simex]) {
        assert!((0.01..=0.10).contains(&rate), "K={k}: {rate}");
    }
}

/// Fails: 0.114 at K=5 with the normal reference distribution.
#[test]
#[ignore = "known failure: SIMEX size at K=5 is 0.114"]
fn simex_size_is_controlled_at_k5() {
    let rate = rates(vec![5], vec![CalibrationEstimator::Simex])[0].2;
    assert!((0.01..=0.10).contains(&rate), "{rate}");
}

#[test]
fn size_at_k100_for_naive_wild_and_simex() {
    let est = vec![CalibrationEstimator::Naive, CalibrationEstimator::BcesWild, CalibrationEstimator::Simex];
    for (_, name, rate) in rates(vec![100], est) {
        assert!((0.01..=0.12).contains(&rate), "{name}: {rate}");
    }
}

/// Fails: BCES 0.008 and BCES pairs 0.000 at K=100; fits whose corrected
/// denominator is not positive count as non-rejections.
#[test]
#[ignore = "known failure: BCES sandwich and pairs bootstrap under-reject at K=100"]
fn size_at_k100_for_bces() {
    for (_, name, rate) in rates(vec![100], vec![CalibrationEstimator::Bces, CalibrationEstimator::BcesPairs]) {
        assert!((0.01..=0.12).contains(&rate), "{name}: {rate}");
    }
}
