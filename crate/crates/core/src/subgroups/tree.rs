//! Honest causal tree on a binary treatment.
//!
//! Units are split once into a splitting half and an estimation half. Splits
//! are chosen on the splitting half by maximizing the between-leaf variance
//! of difference-in-means effects; leaf effects are then re-estimated on the
//! estimation half only.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{estimate_group_effects, Partition};
use crate::rng::{label, shuffle, substream};
use crate::{EffectDataset, Error, IndividualDataset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeTarget {
    Mediator,
    Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
    pub honest_fraction: f64,
    pub seed: u64,
    /// A split is made only if its gain exceeds this multiple of the node's
    /// scaled effect variance `n * Var(tau_node)`. The gain of a split is
    /// roughly chi-square(1) in those units when the effect is homogeneous,
    /// so this bounds how often noise is split on.
    pub split_penalty: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { min_leaf: 50, max_depth: 4, honest_fraction: 0.5, seed: 0, split_penalty: 16.0 }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 10 {
            return Err(Error::InvalidConfig(format!("min_leaf must be at least 10, got {}", self.min_leaf)));
        }
        if !(self.honest_fraction > 0.0 && self.honest_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("honest_fraction must lie in (0, 1), got {}", self.honest_fraction)));
        }
        if !(self.split_penalty >= 0.0) {
            return Err(Error::InvalidConfig("split_penalty must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Units with `x[covariate] <= threshold` go left.
    Split { covariate: usize, threshold: f64, left: usize, right: usize },
    Leaf { id: usize, estimate: f64, se: f64, n_split: usize, n_est: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalTree {
    /// `nodes[0]` is the root.
    nodes: Vec<Node>,
    covariate_names: Vec<String>,
    target: TreeTarget,
}

impl CausalTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn target(&self) -> TreeTarget {
        self.target
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { covariate, threshold, .. } => Some((covariate, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Leaf id for a covariate vector ordered like [`Self::covariate_names`].
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { covariate, threshold, left, right } => i = if x[covariate] <= threshold { left } else { right },
                Node::Leaf { id, .. } => return id,
            }
        }
    }

    /// Assigns the units of `data` to leaves, matching covariates by name.
    /// Groups are named `leaf<id>`.
    pub fn partition(&self, data: &IndividualDataset) -> Result<Partition> {
        let columns = self
            .covariate_names
            .iter()
            .map(|name| data.covariate_index(name).ok_or_else(|| Error::InvalidData(format!("unknown covariate {name}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut x = alloc::vec![0.0; columns.len()];
        let assignment = (0..data.len())
            .map(|i| {
                for (slot, &j) in x.iter_mut().zip(&columns) {
                    *slot = data.covariate(j)[i];
                }
                self.leaf_of(&x)
            })
            .collect();
        Ok(Partition { group_ids: (0..self.leaf_count()).map(|id| format!("leaf{id}")).collect(), assignment })
    }

    /// Indented text form: `split <name> <= <threshold>` for internal nodes
    /// (left child first) and `leaf <id> estimate=.. se=.. n_split=.. n_est=..`.
    pub fn to_text(&self) -> String {
        fn walk(tree: &CausalTree, i: usize, depth: usize, out: &mut String) {
            for _ in 0..depth {
                out.push_str("  ");
            }
            match tree.nodes[i] {
                Node::Split { covariate, threshold, left, right } => {
                    let _ = writeln!(out, "split {} <= {}", tree.covariate_names[covariate], threshold);
                    walk(tree, left, depth + 1, out);
                    walk(tree, right, depth + 1, out);
                }
                Node::Leaf { id, estimate, se, n_split, n_est } => {
                    let _ = writeln!(out, "leaf {id} estimate={estimate} se={se} n_split={n_split} n_est={n_est}");
                }
            }
        }
        let mut out = String::new();
        walk(self, 0, 0, &mut out);
        out
    }
}

/// Per-arm running sums of the target.
#[derive(Debug, Clone, Copy, Default)]
struct ArmStats {
    n: [usize; 2],
    sum: [f64; 2],
    sum_sq: [f64; 2],
}

impl ArmStats {
    fn add(&mut self, arm: usize, v: f64) {
        self.n[arm] += 1;
        self.sum[arm] += v;
        self.sum_sq[arm] += v * v;
    }

    fn minus(&self, other: &Self) -> Self {
        let mut out = *self;
        for a in 0..2 {
            out.n[a] -= other.n[a];
            out.sum[a] -= other.sum[a];
            out.sum_sq[a] -= other.sum_sq[a];
        }
        out
    }

    fn total(&self) -> usize {
        self.n[0] + self.n[1]
    }

    fn effect(&self) -> f64 {
        self.sum[1] / self.n[1] as f64 - self.sum[0] / self.n[0] as f64
    }

    /// Neyman variance of the difference in means.
    fn variance(&self) -> f64 {
        (0..2)
            .map(|a| {
                let n = self.n[a] as f64;
                let mean = self.sum[a] / n;
                ((self.sum_sq[a] - n * mean * mean) / (n - 1.0)).max(0.0) / n
            })
            .sum()
    }

    fn admissible(&self, min_leaf: usize) -> bool {
        self.total() >= min_leaf && self.n[0] >= 2 && self.n[1] >= 2
    }
}

struct Builder<'a> {
    data: &'a IndividualDataset,
    target: &'a [f64],
    config: &'a TreeConfig,
    nodes: Vec<Node>,
    leaves: usize,
}

impl Builder<'_> {
    fn arm(&self, i: usize) -> usize {
        (self.data.treatment()[i] == 1.0) as usize
    }

    fn stats(&self, units: &[usize]) -> ArmStats {
        let mut s = ArmStats::default();
        for &i in units {
            s.add(self.arm(i), self.target[i]);
        }
        s
    }

    /// Best `(gain, covariate, threshold)` over admissible splits.
    fn best_split(&self, split: &[usize], est: &[usize]) -> Option<(f64, usize, f64)> {
        let total = self.stats(split);
        let total_est = self.stats(est);
        let n = split.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..self.data.covariate_count() {
            let x = self.data.covariate(j);
            let mut s_sorted = split.to_vec();
            s_sorted.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
            let mut e_sorted = est.to_vec();
            e_sorted.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
            let mut left = ArmStats::default();
            let mut left_est = ArmStats::default();
            let mut e_pos = 0;
            for (pos, &i) in s_sorted.iter().enumerate() {
                left.add(self.arm(i), self.target[i]);
                let threshold = x[i];
                if pos + 1 < s_sorted.len() && x[s_sorted[pos + 1]] == threshold {
                    continue;
                }
                if pos + 1 == s_sorted.len() {
                    break;
                }
                while e_pos < e_sorted.len() && x[e_sorted[e_pos]] <= threshold {
                    left_est.add(self.arm(e_sorted[e_pos]), 0.0);
                    e_pos += 1;
                }
                let right = total.minus(&left);
                let right_est = total_est.minus(&left_est);
                let min_leaf = self.config.min_leaf;
                if !(left.admissible(min_leaf) && right.admissible(min_leaf)) {
                    continue;
                }
                if !(left_est.admissible(min_leaf) && right_est.admissible(min_leaf)) {
                    continue;
                }
                let (nl, nr) = (left.total() as f64, right.total() as f64);
                let diff = left.effect() - right.effect();
                let gain = nl * nr / n * diff * diff;
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, j, threshold));
                }
            }
        }
        let (gain, j, threshold) = best?;
        let improvement = gain - self.config.split_penalty * n * total.variance();
        (improvement > 0.0).then_some((improvement, j, threshold))
    }

    fn grow(&mut self, split: Vec<usize>, est: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { id: 0, estimate: 0.0, se: 0.0, n_split: 0, n_est: 0 });
        let chosen = if depth < self.config.max_depth { self.best_split(&split, &est) } else { None };
        match chosen {
            Some((_, covariate, threshold)) => {
                let x = self.data.covariate(covariate);
                let (sl, sr): (Vec<usize>, Vec<usize>) = split.iter().partition(|&&i| x[i] <= threshold);
                let (el, er): (Vec<usize>, Vec<usize>) = est.iter().partition(|&&i| x[i] <= threshold);
                let left = self.grow(sl, el, depth + 1);
                let right = self.grow(sr, er, depth + 1);
                self.nodes[slot] = Node::Split { covariate, threshold, left, right };
            }
            None => {
                let s = self.stats(&est);
                let id = self.leaves;
                self.leaves += 1;
                self.nodes[slot] = Node::Leaf {
                    id,
                    estimate: s.effect(),
                    se: libm::sqrt(s.variance()),
                    n_split: split.len(),
                    n_est: est.len(),
                };
            }
        }
        slot
    }
}

/// Fits an honest causal tree for the effect of a binary treatment on the
/// mediator or the outcome.
///
/// Thresholds are observed covariate values; every leaf keeps at least
/// `min_leaf` units and two units per arm in both halves. Among equal gains
/// the lower covariate index, then the smaller threshold, wins.
pub fn fit_causal_tree(data: &IndividualDataset, target: TreeTarget, config: &TreeConfig) -> Result<CausalTree> {
    config.validate()?;
    if !data.is_binary_treatment() {
        return Err(Error::BinaryTreatmentRequired);
    }
    let required = 4 * config.min_leaf;
    if data.len() < required {
        return Err(Error::InsufficientData { required, got: data.len() });
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    shuffle(&mut substream(config.seed, &[label::TREE]), &mut order);
    let n_split = libm::round(data.len() as f64 * config.honest_fraction) as usize;
    let mut est = order.split_off(n_split);
    let mut split = order;
    split.sort_unstable();
    est.sort_unstable();

    let values = match target {
        TreeTarget::Mediator => data.mediator(),
        TreeTarget::Outcome => data.outcome(),
    };
    let mut builder = Builder { data, target: values, config, nodes: Vec::new(), leaves: 0 };
    let root_stats = builder.stats(&est);
    if !(builder.stats(&split).admissible(2) && root_stats.admissible(2)) {
        return Err(Error::InsufficientData { required, got: data.len() });
    }
    builder.grow(split, est, 0);
    Ok(CausalTree { nodes: builder.nodes, covariate_names: data.covariate_names().to_vec(), target })
}

/// A discovered grouping and the subgroup effects estimated on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    pub tree: CausalTree,
    /// Units (indices into the input) used for the effect estimates.
    pub estimation_units: Vec<usize>,
    pub partition: Partition,
    pub effects: EffectDataset,
}

/// Grows a tree on the mediator and estimates subgroup effects on its
/// leaves.
///
/// With `held_out`, a random third of the units (keyed by the tree seed) is
/// set aside before growing and the effects are estimated on it alone;
/// otherwise all units are reused.
pub fn discover(data: &IndividualDataset, config: &TreeConfig, held_out: bool) -> Result<Discovery> {
    let (train, estimation_units): (Vec<usize>, Vec<usize>) = if held_out {
        let mut order: Vec<usize> = (0..data.len()).collect();
        shuffle(&mut substream(config.seed, &[label::FOLDS]), &mut order);
        let cut = data.len() - data.len() / 3;
        let mut hold = order.split_off(cut);
        order.sort_unstable();
        hold.sort_unstable();
        (order, hold)
    } else {
        ((0..data.len()).collect(), (0..data.len()).collect())
    };
    let tree = fit_causal_tree(&data.subset(&train), TreeTarget::Mediator, config)?;
    let est_data = data.subset(&estimation_units);
    let partition = tree.partition(&est_data)?;
    let effects = estimate_group_effects(&est_data, &partition)?;
    Ok(Discovery { tree, estimation_units, partition, effects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;
    use alloc::vec;
    use rand::Rng;

    fn moderated(n: usize, seed: u64, heterogeneous: bool) -> IndividualDataset {
        let mut rng = substream(seed, &[99]);
        let mut t = Vec::new();
        let mut m = Vec::new();
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            let ti = if rng.random::<bool>() { 1.0 } else { 0.0 };
            let g = if heterogeneous && a > 0.5 { 3.0 } else { 1.0 };
            t.push(ti);
            m.push(1.0 + g * ti + standard_normal(&mut rng));
            x1.push(a);
            x2.push(b);
        }
        let y = m.clone();
        IndividualDataset::new(t, m, y).unwrap().with_covariates(vec!["x1".into(), "x2".into()], vec![x1, x2]).unwrap()
    }

    #[test]
    fn finds_the_moderator() {
        let d = moderated(2000, 1, true);
        let tree = fit_causal_tree(&d, TreeTarget::Mediator, &TreeConfig::default()).unwrap();
        let (j, thr) = tree.root_split().unwrap();
        assert_eq!(j, 0);
        assert!((thr - 0.5).abs() < 0.1, "{thr}");
        assert!(tree.depth() <= 4);
        let n_est: usize = tree
            .nodes()
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { n_est, .. } => Some(*n_est),
                _ => None,
            })
            .sum();
        assert_eq!(n_est, 1000);
    }

    #[test]
    fn deterministic_per_seed() {
        let d = moderated(1000, 2, true);
        let cfg = TreeConfig { seed: 9, ..TreeConfig::default() };
        let a = fit_causal_tree(&d, TreeTarget::Mediator, &cfg).unwrap();
        let b = fit_causal_tree(&d, TreeTarget::Mediator, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn partition_covers_every_unit() {
        let d = moderated(1000, 3, true);
        let tree = fit_causal_tree(&d, TreeTarget::Mediator, &TreeConfig::default()).unwrap();
        let p = tree.partition(&d).unwrap();
        assert_eq!(p.assignment.len(), 1000);
        assert_eq!(p.counts().iter().sum::<usize>(), 1000);
        assert_eq!(p.group_ids.len(), tree.leaf_count());
    }

    #[test]
    fn guards() {
        let d = moderated(100, 4, true);
        assert_eq!(
            fit_causal_tree(&d, TreeTarget::Mediator, &TreeConfig::default()),
            Err(Error::InsufficientData { required: 200, got: 100 })
        );
        let cfg = TreeConfig { min_leaf: 5, ..TreeConfig::default() };
        assert!(matches!(fit_causal_tree(&d, TreeTarget::Mediator, &cfg), Err(Error::InvalidConfig(_))));
        let c = IndividualDataset::new(vec![0.5; 400], vec![0.0; 400], vec![0.0; 400]).unwrap();
        assert_eq!(fit_causal_tree(&c, TreeTarget::Outcome, &TreeConfig::default()), Err(Error::BinaryTreatmentRequired));
    }

    #[test]
    fn text_format() {
        let d = moderated(2000, 5, true);
        let tree = fit_causal_tree(&d, TreeTarget::Mediator, &TreeConfig::default()).unwrap();
        let text = tree.to_text();
        assert!(text.starts_with("split x1 <= "));
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("leaf ")).count(), tree.leaf_count());
    }

    #[test]
    fn held_out_discovery() {
        let mut d = moderated(3000, 6, true);
        // a third covariate so that the tree can produce at least three leaves
        let x3: Vec<f64> = (0..3000).map(|i| (i % 7) as f64).collect();
        let names = vec!["x1".into(), "x2".into(), "x3".into()];
        let cols = vec![d.covariate(0).to_vec(), d.covariate(1).to_vec(), x3];
        d = d.with_covariates(names, cols).unwrap();
        let cfg = TreeConfig { split_penalty: 0.0, max_depth: 2, ..TreeConfig::default() };
        let found = discover(&d, &cfg, true).unwrap();
        assert_eq!(found.estimation_units.len(), 1000);
        assert_eq!(found.effects.len(), found.tree.leaf_count());
    }
}
