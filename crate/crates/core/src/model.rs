//! Domain records shared by every other module.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Minimum number of subgroups for any slope fit: intercept and slope plus one
/// residual degree of freedom.
pub const MIN_SUBGROUPS: usize = 3;

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// One subgroup's estimated effects of the treatment on the mediator
/// (`gamma_hat`) and on the outcome (`tau_hat`), with their sampling errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupEffect {
    pub group_id: String,
    pub gamma_hat: f64,
    /// Standard error of `gamma_hat`.
    pub se_gamma: f64,
    pub tau_hat: f64,
    /// Standard error of `tau_hat`.
    pub se_tau: f64,
    /// Covariance of the two estimation errors; zero when unknown.
    pub cov_uv: f64,
    pub n: u64,
    /// Subgroup means of adjustment covariates, one per covariate.
    pub covariate_means: Option<Vec<f64>>,
}

impl SubgroupEffect {
    pub fn new(group_id: impl Into<String>, gamma_hat: f64, se_gamma: f64, tau_hat: f64, se_tau: f64, n: u64) -> Self {
        Self {
            group_id: group_id.into(),
            gamma_hat,
            se_gamma,
            tau_hat,
            se_tau,
            cov_uv: 0.0,
            n,
            covariate_means: None,
        }
    }

    pub fn with_cov_uv(mut self, cov_uv: f64) -> Self {
        self.cov_uv = cov_uv;
        self
    }

    pub fn with_covariate_means(mut self, means: Vec<f64>) -> Self {
        self.covariate_means = Some(means);
        self
    }

    /// Checks the field invariants, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field| Err(Error::InvalidRecord { group: self.group_id.clone(), field });
        if !self.gamma_hat.is_finite() {
            return bad("gamma_hat");
        }
        if !self.tau_hat.is_finite() {
            return bad("tau_hat");
        }
        if !(self.se_gamma.is_finite() && self.se_gamma >= 0.0) {
            return bad("se_gamma");
        }
        if !(self.se_tau.is_finite() && self.se_tau >= 0.0) {
            return bad("se_tau");
        }
        // Cauchy-Schwarz, with room for rounding in products of estimated moments.
        let bound = self.se_gamma * self.se_tau;
        if !self.cov_uv.is_finite() || self.cov_uv.abs() > bound * (1.0 + 1e-9) + f64::MIN_POSITIVE {
            return bad("cov_uv");
        }
        if self.n == 0 {
            return bad("n");
        }
        if let Some(means) = &self.covariate_means {
            if means.iter().any(|m| !m.is_finite()) {
                return bad("covariate_means");
            }
        }
        Ok(())
    }
}

/// Population shares `n_j / sum(n)`.
pub fn weights_from_sizes(sizes: &[u64]) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidWeights("sizes must be positive"));
    }
    let total: u64 = sizes.iter().sum();
    let total = total as f64;
    Ok(sizes.iter().map(|&n| n as f64 / total).collect())
}

/// A validated collection of subgroup effects with aggregation weights.
///
/// Weights default to sample-size shares. [`EffectDataset::with_weights`]
/// accepts user-supplied shares (for instance target-population shares in a
/// multiple-treatment design), normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectDataset {
    effects: Vec<SubgroupEffect>,
    weights: Vec<f64>,
    covariate_names: Vec<String>,
}

impl EffectDataset {
    /// Validates raw records and derives weights from subgroup sizes.
    pub fn new(raw: Vec<SubgroupEffect>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        if raw.len() < MIN_SUBGROUPS {
            return Err(Error::InsufficientSubgroups { required: MIN_SUBGROUPS, got: raw.len() });
        }
        let mut seen = BTreeSet::new();
        for effect in &raw {
            effect.validate()?;
            if !seen.insert(effect.group_id.as_str()) {
                return Err(Error::DuplicateGroup(effect.group_id.clone()));
            }
        }
        let p = raw[0].covariate_means.as_ref().map(Vec::len);
        for effect in &raw {
            if effect.covariate_means.as_ref().map(Vec::len) != p {
                return Err(Error::InvalidRecord { group: effect.group_id.clone(), field: "covariate_means" });
            }
        }
        let sizes: Vec<u64> = raw.iter().map(|e| e.n).collect();
        let weights = weights_from_sizes(&sizes)?;
        let covariate_names = (1..=p.unwrap_or(0)).map(|j| format!("x{j}")).collect();
        Ok(Self { effects: raw, weights, covariate_names })
    }

    /// Replaces the size-based weights. Weights must be finite and
    /// non-negative with a positive sum; they are rescaled to sum to one.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.effects.len() {
            return Err(Error::LengthMismatch { expected: self.effects.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("weights must have a positive sum"));
        }
        let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sum: f64 = normalized.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights("weights do not normalize to one"));
        }
        self.weights = normalized;
        Ok(self)
    }

    /// Names the adjustment covariates carried in `covariate_means`.
    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.covariate_count() {
            return Err(Error::LengthMismatch { expected: self.covariate_count(), got: names.len() });
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn effects(&self) -> &[SubgroupEffect] {
        &self.effects
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Number of adjustment covariates (zero when records carry none).
    pub fn covariate_count(&self) -> usize {
        self.effects[0].covariate_means.as_ref().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn gamma_hats(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.gamma_hat).collect()
    }

    pub fn tau_hats(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.tau_hat).collect()
    }

    pub fn se_gammas(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.se_gamma).collect()
    }

    pub fn se_taus(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.se_tau).collect()
    }

    pub fn cov_uvs(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.cov_uv).collect()
    }

    /// Rows selected by `indices` (repeats allowed), reweighted from sizes.
    /// Group ids are suffixed with the draw position to stay distinct.
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let raw = indices
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let mut e = self.effects[i].clone();
                e.group_id = format!("{}#{pos}", e.group_id);
                e
            })
            .collect();
        let mut out = Self::new(raw)?;
        out.covariate_names = self.covariate_names.clone();
        Ok(out)
    }
}

/// Unit-level records: treatment, mediator, outcome, named covariates and an
/// optional group label.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualDataset {
    treatment: Vec<f64>,
    mediator: Vec<f64>,
    outcome: Vec<f64>,
    covariate_names: Vec<String>,
    /// Column-major: `covariates[j][i]` is covariate `j` of unit `i`.
    covariates: Vec<Vec<f64>>,
    group_labels: Option<Vec<String>>,
}

impl IndividualDataset {
    pub fn new(treatment: Vec<f64>, mediator: Vec<f64>, outcome: Vec<f64>) -> Result<Self> {
        let n = treatment.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        for column in [&mediator, &outcome] {
            if column.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: column.len() });
            }
        }
        for (name, column) in [("treatment", &treatment), ("mediator", &mediator), ("outcome", &outcome)] {
            if let Some(i) = column.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("non-finite {name} at unit {i}")));
            }
        }
        Ok(Self { treatment, mediator, outcome, covariate_names: Vec::new(), covariates: Vec::new(), group_labels: None })
    }

    pub fn with_covariates(mut self, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch { expected: names.len(), got: columns.len() });
        }
        for (name, column) in names.iter().zip(&columns) {
            if column.len() != self.len() {
                return Err(Error::LengthMismatch { expected: self.len(), got: column.len() });
            }
            if let Some(i) = column.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("non-finite covariate {name} at unit {i}")));
            }
        }
        self.covariate_names = names;
        self.covariates = columns;
        Ok(self)
    }

    pub fn with_group_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: labels.len() });
        }
        self.group_labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn mediator(&self) -> &[f64] {
        &self.mediator
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.covariates[j]
    }

    pub fn covariate_count(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn group_labels(&self) -> Option<&[String]> {
        self.group_labels.as_deref()
    }

    /// True when every treatment value is exactly 0 or 1.
    pub fn is_binary_treatment(&self) -> bool {
        self.treatment.iter().all(|&t| t == 0.0 || t == 1.0)
    }

    /// The units at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            treatment: pick(&self.treatment),
            mediator: pick(&self.mediator),
            outcome: pick(&self.outcome),
            covariate_names: self.covariate_names.clone(),
            covariates: self.covariates.iter().map(|c| pick(c)).collect(),
            group_labels: self.group_labels.as_ref().map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }
}

/// The latent effects behind a synthetic aggregate dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEffects {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub tau: Vec<f64>,
    pub beta: f64,
}
