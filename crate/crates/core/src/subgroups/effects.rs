use alloc::vec::Vec;

use super::Partition;
use crate::{EffectDataset, Error, IndividualDataset, Result, SubgroupEffect};

/// Treatment effects on the mediator and the outcome within one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEstimate {
    pub gamma: f64,
    pub se_gamma: f64,
    pub tau: f64,
    pub se_tau: f64,
    pub cov_uv: f64,
}

/// Sample covariance with an `n - 1` denominator.
fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

fn difference_in_means(m: &[f64], y: &[f64], t: &[f64]) -> Option<GroupEstimate> {
    let split = |v: &[f64], arm: f64| v.iter().zip(t).filter(|(_, &ti)| ti == arm).map(|(x, _)| *x).collect::<Vec<_>>();
    let (m1, m0, y1, y0) = (split(m, 1.0), split(m, 0.0), split(y, 1.0), split(y, 0.0));
    if m1.len() < 2 || m0.len() < 2 {
        return None;
    }
    let (n1, n0) = (m1.len() as f64, m0.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some(GroupEstimate {
        gamma: mean(&m1) - mean(&m0),
        se_gamma: libm::sqrt(covariance(&m1, &m1) / n1 + covariance(&m0, &m0) / n0),
        tau: mean(&y1) - mean(&y0),
        se_tau: libm::sqrt(covariance(&y1, &y1) / n1 + covariance(&y0, &y0) / n0),
        cov_uv: covariance(&m1, &y1) / n1 + covariance(&m0, &y0) / n0,
    })
}

/// Slopes of `m` and `y` on a continuous `t`, with HC1 variances and the
/// matching cross-covariance of the two slope influence functions.
fn regression_slopes(m: &[f64], y: &[f64], t: &[f64]) -> Option<GroupEstimate> {
    let n = t.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
    let (tb, mb, yb) = (mean(t), mean(m), mean(y));
    let sxx: f64 = t.iter().map(|v| (v - tb) * (v - tb)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = |v: &[f64], vb: f64| t.iter().zip(v).map(|(a, b)| (a - tb) * (b - vb)).sum::<f64>() / sxx;
    let (bm, by) = (slope(m, mb), slope(y, yb));
    let scale = nf / (nf - 2.0) / (sxx * sxx);
    let (mut vm, mut vy, mut cv) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let d = t[i] - tb;
        let em = m[i] - mb - bm * d;
        let ey = y[i] - yb - by * d;
        vm += d * d * em * em;
        vy += d * d * ey * ey;
        cv += d * d * em * ey;
    }
    Some(GroupEstimate {
        gamma: bm,
        se_gamma: libm::sqrt(vm * scale),
        tau: by,
        se_tau: libm::sqrt(vy * scale),
        cov_uv: cv * scale,
    })
}

/// Effects of treatment on mediator and outcome among `units`.
///
/// A 0/1 treatment uses differences in means with Neyman standard errors
/// (at least two units per arm); any other treatment uses least-squares
/// slopes with heteroskedasticity-robust errors.
pub fn group_estimate(data: &IndividualDataset, units: &[usize], binary: bool) -> Option<GroupEstimate> {
    let pick = |v: &[f64]| units.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let (t, m, y) = (pick(data.treatment()), pick(data.mediator()), pick(data.outcome()));
    if binary {
        difference_in_means(&m, &y, &t)
    } else {
        regression_slopes(&m, &y, &t)
    }
}

/// One effect record per group of `partition`, with covariate means.
pub fn estimate_group_effects(data: &IndividualDataset, partition: &Partition) -> Result<EffectDataset> {
    if partition.assignment.len() != data.len() {
        return Err(Error::LengthMismatch { expected: data.len(), got: partition.assignment.len() });
    }
    let binary = data.is_binary_treatment();
    let mut raw = Vec::with_capacity(partition.group_ids.len());
    for (g, id) in partition.group_ids.iter().enumerate() {
        let units = partition.members(g);
        let est = group_estimate(data, &units, binary).ok_or_else(|| Error::DegenerateGroup(id.clone()))?;
        let mut effect = SubgroupEffect::new(id.clone(), est.gamma, est.se_gamma, est.tau, est.se_tau, units.len() as u64)
            .with_cov_uv(est.cov_uv);
        if data.covariate_count() > 0 {
            let means = (0..data.covariate_count())
                .map(|j| units.iter().map(|&i| data.covariate(j)[i]).sum::<f64>() / units.len() as f64)
                .collect();
            effect = effect.with_covariate_means(means);
        }
        raw.push(effect);
    }
    let dataset = EffectDataset::new(raw)?;
    if data.covariate_count() > 0 {
        dataset.with_covariate_names(data.covariate_names().to_vec())
    } else {
        Ok(dataset)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{shuffle, standard_normal, substream};
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;

    #[test]
    fn hand_difference_in_means() {
        let d = IndividualDataset::new(vec![1.0, 1.0, 0.0, 0.0], vec![2.0, 2.0, 1.0, 1.0], vec![3.0, 5.0, 1.0, 1.0]).unwrap();
        let e = group_estimate(&d, &[0, 1, 2, 3], true).unwrap();
        assert_eq!(e.tau, 3.0);
        assert_eq!(e.se_tau, 1.0);
        assert_eq!(e.gamma, 1.0);
        assert_eq!(e.se_gamma, 0.0);
        assert_eq!(e.cov_uv, 0.0);
    }

    #[test]
    fn flat_mediator() {
        let d = IndividualDataset::new(vec![1.0, 1.0, 0.0, 0.0], vec![2.0; 4], vec![3.0, 5.0, 1.0, 2.0]).unwrap();
        let e = group_estimate(&d, &[0, 1, 2, 3], true).unwrap();
        assert_eq!((e.gamma, e.se_gamma), (0.0, 0.0));
    }

    fn labelled(labels: &[&str], t: Vec<f64>) -> IndividualDataset {
        let n = labels.len();
        let m: Vec<f64> = (0..n).map(|i| (i * 7 % 5) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| (i * 3 % 4) as f64).collect();
        IndividualDataset::new(t, m, y).unwrap().with_group_labels(labels.iter().map(|s| String::from(*s)).collect()).unwrap()
    }

    #[test]
    fn single_arm_group_is_degenerate() {
        let labels = ["a", "a", "a", "a", "b", "b", "b", "b", "c", "c", "c", "c"];
        let mut t = vec![1.0, 1.0, 0.0, 0.0];
        t.extend([1.0, 1.0, 1.0, 1.0]);
        t.extend([1.0, 0.0, 1.0, 0.0]);
        let d = labelled(&labels, t);
        let p = Partition::from_labels(d.group_labels().unwrap());
        assert_eq!(estimate_group_effects(&d, &p), Err(Error::DegenerateGroup("b".into())));
    }

    #[test]
    fn empty_group_is_degenerate() {
        let labels = ["a", "a", "a", "a", "b", "b", "b", "b", "c", "c", "c", "c"];
        let t = [1.0, 1.0, 0.0, 0.0].repeat(3);
        let d = labelled(&labels, t);
        let mut p = Partition::from_labels(d.group_labels().unwrap());
        p.group_ids.push("empty".into());
        assert_eq!(p.empty_groups(), vec!["empty"]);
        assert_eq!(estimate_group_effects(&d, &p), Err(Error::DegenerateGroup("empty".into())));
    }

    #[test]
    fn slopes_for_continuous_treatment() {
        let t = vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.3];
        let m: Vec<f64> = t.iter().map(|v| 1.0 + 3.0 * v).collect();
        let y: Vec<f64> = t.iter().enumerate().map(|(i, v)| 2.0 - v + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let d = IndividualDataset::new(t.clone(), m, y.clone()).unwrap();
        let e = group_estimate(&d, &[0, 1, 2, 3, 4, 5], false).unwrap();
        assert!((e.gamma - 3.0).abs() < 1e-12);
        assert!(e.se_gamma < 1e-12);
        let ols = crate::estimators::ols_slope(&t, &y).unwrap();
        assert!((e.tau - ols.beta_hat).abs() < 1e-12);
        assert!((e.se_tau - ols.se_beta).abs() < 1e-12);
    }

    #[test]
    fn invariant_to_unit_order() {
        let mut rng = substream(3, &[0]);
        let n = 90;
        let t: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let m: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let y: Vec<f64> = m.iter().map(|v| v + standard_normal(&mut rng)).collect();
        let labels: Vec<String> = (0..n).map(|i| format!("g{}", i % 3)).collect();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let d = IndividualDataset::new(t, m, y)
            .unwrap()
            .with_covariates(vec!["x".into()], vec![x])
            .unwrap()
            .with_group_labels(labels)
            .unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        shuffle(&mut rng, &mut order);
        let shuffled = d.subset(&order);
        let a = estimate_group_effects(&d, &group_by(&d)).unwrap();
        let b = estimate_group_effects(&shuffled, &group_by(&shuffled)).unwrap();
        for (ea, eb) in a.effects().iter().zip(b.effects()) {
            assert_eq!(ea.group_id, eb.group_id);
            assert_eq!(ea.n, eb.n);
            for (u, v) in [(ea.gamma_hat, eb.gamma_hat), (ea.se_tau, eb.se_tau), (ea.cov_uv, eb.cov_uv)] {
                assert!((u - v).abs() < 1e-12);
            }
            let (ma, mb) = (ea.covariate_means.as_ref().unwrap(), eb.covariate_means.as_ref().unwrap());
            assert!((ma[0] - mb[0]).abs() < 1e-9);
        }
        assert_eq!(a.covariate_names(), &["x".to_string()]);
    }

    fn group_by(d: &IndividualDataset) -> Partition {
        Partition::from_labels(d.group_labels().unwrap())
    }
}
