//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values. Runs without the test harness so the lines always show.
//!
//! Exits non-zero if a criterion fails that is not listed in
//! `KNOWN_FAILURES`; listed criteria still print FAIL when they fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use hte_mediation_core::estimators::{
    attenuation_corrected, bces_estimate, naive_fit, ols_slope, simex_estimate, SimexConfig,
};
use hte_mediation_core::inference::conservative_ci;
use hte_mediation_core::simulation::{
    dgp_aggregate, dgp_moderator, grow_se_multiplier, power_curve, run_calibration, run_table2, AggregateDgpConfig,
    CalibrationConfig, CalibrationEstimator, ModeratorDgpConfig, PowerConfig, Table2Config,
};
use hte_mediation_core::subgroups::{fit_causal_tree, TreeConfig, TreeTarget};
use hte_mediation_core::{CiMode, EffectDataset, GammaAggregate, Method, SlopeFit, SubgroupEffect};

/// Criteria that fail with the shipped defaults; see the README.
const KNOWN_FAILURES: &[(u32, &str)] =
    &[(2, "SIMEX size at K=5 is above the band; with t(K-2) instead of normal critical values it is 0.044")];

type Criterion = (u32, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn table2() -> Verdict {
    let t0 = Instant::now();
    let rows = run_table2(&Table2Config { reps: 50, ..Table2Config::default() }).expect("confounding study runs");
    let per_kappa = t0.elapsed() / rows.len() as u32;
    let mut pass = per_kappa < Duration::from_secs(300);
    let mut detail = String::new();
    for r in &rows {
        let ok = (4.8..=6.8).contains(&r.hte_acme) && r.hte_coverage >= 0.8;
        pass &= ok;
        detail.push_str(&format!(
            "k={} hte={:.3} cover={:.2} fail={} trad={:.3} [{:.3},{:.3}]; ",
            r.kappa, r.hte_acme, r.hte_coverage, r.hte_failures, r.trad_acme, r.trad_ci_lower, r.trad_ci_upper
        ));
    }
    let last = rows.iter().find(|r| r.kappa == 4.0).expect("kappa 4 row");
    pass &= last.trad_acme >= 8.0 && !(last.trad_ci_lower <= 5.5 && 5.5 <= last.trad_ci_upper);
    detail.push_str(&format!("{:.1?} per kappa", per_kappa));
    Verdict { pass, detail }
}

fn calibration(beta: f64, ks: Vec<usize>, estimators: Vec<CalibrationEstimator>) -> (Vec<(usize, CalibrationEstimator, f64, usize)>, Duration) {
    let t0 = Instant::now();
    let n_cells = ks.len() * estimators.len();
    let rows = run_calibration(&CalibrationConfig { beta, ks, estimators, ..CalibrationConfig::default() })
        .expect("calibration runs");
    let per_cell = t0.elapsed() / n_cells as u32;
    (rows.iter().map(|r| (r.k, r.estimator, r.rejection_rate, r.failures)).collect(), per_cell)
}

fn size() -> Verdict {
    let (mut rows, t_simex) = calibration(0.0, vec![5, 30, 100], vec![CalibrationEstimator::Simex]);
    let (wild, t_wild) = calibration(0.0, vec![30], vec![CalibrationEstimator::BcesWild]);
    rows.extend(wild);
    let targets = [(5, 0.058, 0.04), (30, 0.066, 0.04), (100, 0.092, 0.05), (30, 0.05, 0.04)];
    let mut pass = t_simex.max(t_wild) < Duration::from_secs(600);
    let mut detail = String::new();
    for ((k, est, rate, fails), (_, target, tol)) in rows.iter().zip(targets) {
        let ok = within(*rate, target, tol);
        pass &= ok;
        detail.push_str(&format!("{} K={k} {rate:.3} (target {target}±{tol}, failed fits {fails}) {}; ", est.as_str(), if ok { "ok" } else { "out" }));
    }
    detail.push_str(&format!("{:.1?} per cell", t_simex.max(t_wild)));
    Verdict { pass, detail }
}

fn power() -> Verdict {
    let (rows, _) = calibration(2.0, vec![50, 100], vec![CalibrationEstimator::Simex]);
    let targets = [(0.854, 0.08), (0.988, 0.03)];
    let mut pass = true;
    let mut detail = String::new();
    for ((k, _, rate, _), (target, tol)) in rows.iter().zip(targets) {
        pass &= within(*rate, target, tol);
        detail.push_str(&format!("K={k} {rate:.3} (target {target}±{tol}); "));
    }
    Verdict { pass, detail }
}

fn attenuation_law() -> Verdict {
    // sigma_gamma^2 = 1 and sigma_u = 0.5 give lambda = 1 / 1.25 = 0.8
    let beta = 2.0;
    let (data, _) = dgp_aggregate(&AggregateDgpConfig {
        k: 10_000,
        beta,
        fixed_se: Some((0.5, 0.5)),
        seed: 0,
        ..AggregateDgpConfig::default()
    })
    .expect("dgp runs");
    let naive = naive_fit(&data).expect("naive fit").beta_hat;
    let corrected = attenuation_corrected(&data).expect("attenuation fit").beta_hat;
    let simex = simex_estimate(&data, &SimexConfig::default()).expect("simex fit").fit.beta_hat;
    let ratio = naive / beta;
    let pass = within(ratio, 0.8, 0.02) && within(corrected, beta, 0.05 * beta) && within(simex, beta, 0.05 * beta);
    Verdict { pass, detail: format!("naive/beta={ratio:.4} corrected={corrected:.4} simex={simex:.4}") }
}

fn oracle_equivalences() -> Verdict {
    let mut bces_same = true;
    let mut simex_same = true;
    for seed in 0..50 {
        let (data, _) = dgp_aggregate(&AggregateDgpConfig { k: 20, beta: 1.5, seed, ..AggregateDgpConfig::default() }).unwrap();
        let exact: Vec<SubgroupEffect> = data
            .effects()
            .iter()
            .map(|e| SubgroupEffect::new(e.group_id.clone(), e.gamma_hat, 0.0, e.tau_hat, 0.0, e.n))
            .collect();
        let exact = EffectDataset::new(exact).unwrap();
        let ols = ols_slope(&exact.gamma_hats(), &exact.tau_hats()).unwrap();
        let bces = bces_estimate(&exact).unwrap();
        bces_same &= bces.beta_hat.to_bits() == ols.beta_hat.to_bits()
            && bces.intercept_hat.to_bits() == ols.intercept_hat.to_bits();

        let naive = naive_fit(&data).unwrap();
        let simex = simex_estimate(&data, &SimexConfig::default().with_seed(seed)).unwrap();
        simex_same &= simex.curve[0].1.to_bits() == naive.beta_hat.to_bits();
    }

    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let strategy = (-10.0f64..10.0, 0.0f64..5.0, -10.0f64..10.0, 0.0f64..25.0, 0.001f64..0.5);
    let contained = runner
        .run(&strategy, |(beta, se_b, gamma, var_g, alpha)| {
            let fit = SlopeFit {
                beta_hat: beta,
                se_beta: se_b,
                intercept_hat: 0.0,
                method: Method::Simex,
                extra_coefs: Vec::new(),
                diagnostics: Vec::new(),
            };
            let agg = GammaAggregate { gamma0_hat: gamma, var_gamma0: var_g, k: 10 };
            let (lo, hi) = conservative_ci(&fit, &agg, alpha, CiMode::EndpointProduct).unwrap();
            let point = beta * gamma;
            prop_assert!(lo <= point && point <= hi, "{lo} {point} {hi}");
            Ok(())
        })
        .is_ok();
    Verdict {
        pass: bces_same && simex_same && contained,
        detail: format!("bces==ols bitwise: {bces_same}; simex g(0)==ols bitwise: {simex_same}; ci contains point (1000 cases): {contained}"),
    }
}

fn unbiasedness() -> Verdict {
    let beta = 2.0;
    let draws: Vec<f64> = (0..2000)
        .map(|seed| {
            let (_, latent) = dgp_aggregate(&AggregateDgpConfig { beta, seed, ..AggregateDgpConfig::default() }).unwrap();
            ols_slope(&latent.gamma, &latent.tau).unwrap().beta_hat
        })
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0);
    let mc_se = (var / n).sqrt();
    let gap = (mean - beta).abs();
    Verdict { pass: gap < 3.0 * mc_se, detail: format!("mean={mean:.5} |bias|={gap:.5} 3*mc_se={:.5}", 3.0 * mc_se) }
}

fn tree_recovery() -> Verdict {
    let mut correct = 0;
    let mut single = 0;
    for seed in 0..100 {
        for heterogeneous in [true, false] {
            let data = dgp_moderator(&ModeratorDgpConfig { n: 5000, heterogeneous, seed, ..ModeratorDgpConfig::default() }).unwrap();
            let tree = fit_causal_tree(&data, TreeTarget::Mediator, &TreeConfig { seed, ..TreeConfig::default() }).unwrap();
            match (heterogeneous, tree.root_split()) {
                (true, Some((0, thr))) if (thr - 0.5).abs() <= 0.1 => correct += 1,
                (false, None) => single += 1,
                _ => {}
            }
        }
    }
    Verdict { pass: correct >= 90 && single >= 90, detail: format!("root split correct {correct}/100; homogeneous single leaf {single}/100") }
}

fn power_curve_sanity() -> Verdict {
    let points = power_curve(&PowerConfig::default()).expect("power curve runs");
    let add: Vec<f64> = points.iter().map(|p| p.add_power).collect();
    let grow: Vec<f64> = points.iter().map(|p| p.grow_power).collect();
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    let multiplier = grow_se_multiplier(100, 10);
    let exact = multiplier == std::f64::consts::FRAC_1_SQRT_2;
    Verdict {
        pass: monotone(&add) && monotone(&grow) && exact,
        detail: format!("add {add:.3?}; grow {grow:.3?}; multiplier(k=10)={multiplier:e}"),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "confounding study", table2),
        (2, "calibration size", size),
        (3, "calibration power", power),
        (4, "attenuation law", attenuation_law),
        (5, "oracle equivalences", oracle_equivalences),
        (6, "unbiasedness at exact data", unbiasedness),
        (7, "causal tree recovery", tree_recovery),
        (8, "power curve sanity", power_curve_sanity),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let t0 = Instant::now();
        let v = check();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        println!("{} criterion {id} {name}: {} [{:.1?}]", if v.pass { "PASS" } else { "FAIL" }, v.detail, t0.elapsed());
        match (v.pass, known) {
            (false, Some((_, why))) => println!("  info: known failure: {why}"),
            (false, None) => unexpected.push(id),
            (true, Some(_)) => println!("  info: listed as a known failure but passed"),
            (true, None) => {}
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
