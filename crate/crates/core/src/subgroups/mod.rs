//! From unit-level data to subgroup effects: rule-based grouping, honest
//! causal trees and per-group effect estimation.

mod effects;
mod rules;
mod tree;

pub use effects::{estimate_group_effects, group_estimate, GroupEstimate};
pub use rules::{group_by_rules, Clause, GroupDefinition, Partition, Predicate};
pub use tree::{discover, fit_causal_tree, CausalTree, Discovery, Node, TreeConfig, TreeTarget};
