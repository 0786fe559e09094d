use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, IndividualDataset, Result};

/// A condition on one covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    /// `lower < x <= upper`; a missing bound is unbounded.
    Interval { lower: Option<f64>, upper: Option<f64> },
    /// `x` equals one of the listed codes.
    OneOf(Vec<f64>),
}

impl Predicate {
    pub fn at_most(upper: f64) -> Self {
        Predicate::Interval { lower: None, upper: Some(upper) }
    }

    pub fn greater_than(lower: f64) -> Self {
        Predicate::Interval { lower: Some(lower), upper: None }
    }

    pub fn matches(&self, x: f64) -> bool {
        match self {
            Predicate::Interval { lower, upper } => lower.map_or(true, |l| x > l) && upper.map_or(true, |u| x <= u),
            Predicate::OneOf(codes) => codes.contains(&x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub covariate: String,
    pub predicate: Predicate,
}

impl Clause {
    pub fn new(covariate: impl Into<String>, predicate: Predicate) -> Self {
        Self { covariate: covariate.into(), predicate }
    }
}

/// A named conjunction of clauses. No clauses matches every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDefinition {
    pub id: String,
    pub clauses: Vec<Clause>,
}

impl GroupDefinition {
    pub fn new(id: impl Into<String>, clauses: Vec<Clause>) -> Self {
        Self { id: id.into(), clauses }
    }
}

/// Assignment of every unit to exactly one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub group_ids: Vec<String>,
    /// `assignment[i]` indexes `group_ids`.
    pub assignment: Vec<usize>,
}

impl Partition {
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.group_ids.len()];
        for &g in &self.assignment {
            counts[g] += 1;
        }
        counts
    }

    /// Unit indices of group `g`, in unit order.
    pub fn members(&self, g: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &a)| a == g).map(|(i, _)| i).collect()
    }

    pub fn empty_groups(&self) -> Vec<&str> {
        self.counts().iter().zip(&self.group_ids).filter(|(c, _)| **c == 0).map(|(_, id)| id.as_str()).collect()
    }

    /// Groups taken verbatim from labels, ordered by label.
    pub fn from_labels(labels: &[String]) -> Self {
        let mut group_ids: Vec<String> = labels.to_vec();
        group_ids.sort();
        group_ids.dedup();
        let assignment = labels.iter().map(|l| group_ids.binary_search(l).expect("label present")).collect();
        Self { group_ids, assignment }
    }
}

/// Assigns units to the groups defined by `rules`.
///
/// With no rules, the dataset's group labels are used verbatim. Every unit
/// must match exactly one definition.
pub fn group_by_rules(data: &IndividualDataset, rules: &[GroupDefinition]) -> Result<Partition> {
    if rules.is_empty() {
        return match data.group_labels() {
            Some(labels) => Ok(Partition::from_labels(labels)),
            None => Err(Error::InvalidConfig("no grouping rules and no group labels".into())),
        };
    }
    let mut resolved = Vec::with_capacity(rules.len());
    for rule in rules {
        let clauses = rule
            .clauses
            .iter()
            .map(|c| {
                data.covariate_index(&c.covariate)
                    .map(|j| (j, &c.predicate))
                    .ok_or_else(|| Error::InvalidData(format!("unknown covariate {}", c.covariate)))
            })
            .collect::<Result<Vec<_>>>()?;
        resolved.push(clauses);
    }
    let mut assignment = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let mut hit = None;
        let mut matches = 0;
        for (g, clauses) in resolved.iter().enumerate() {
            if clauses.iter().all(|(j, p)| p.matches(data.covariate(*j)[i])) {
                matches += 1;
                hit = Some(g);
            }
        }
        match (matches, hit) {
            (1, Some(g)) => assignment.push(g),
            _ => return Err(Error::InvalidPartition { unit: i, matches }),
        }
    }
    Ok(Partition { group_ids: rules.iter().map(|r| r.id.clone()).collect(), assignment })
}
