//! Average causal mediation effects identified from heterogeneous treatment
//! effects.
//!
//! Subgroup-level effects of a treatment on a mediator (`gamma_k`) and on an
//! outcome (`tau_k`) obey `tau_k = E[delta_k] + beta * gamma_k + eps_k`. When
//! the mediator effect is uncorrelated with the direct effect, the slope `beta`
//! is identified by a regression across subgroups, and the average mediation
//! effect is `beta * sum_k w_k gamma_k`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, reports and the
//! command-line front end live in the `hte-mediation` crate.
//!
//! Modules:
//!
//! - [`model`]: subgroup effect records and validated datasets.
//! - [`estimators`]: naive OLS, attenuation correction, BCES and its
//!   bootstraps, SIMEX, the polynomial-slope model and covariate adjustment.
//! - [`inference`]: aggregation of `gamma`, the intersection-union test,
//!   conservative intervals and heterogeneity statistics.
//! - [`subgroups`]: rule-based grouping, honest causal trees and per-group
//!   effect estimation from unit-level data.
//! - [`simulation`]: the data-generating processes and Monte Carlo drivers.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations, rust_2018_idioms)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod subgroups;

pub use error::{Error, ErrorKind, Result};
pub use estimators::{Method, SimexConfig, SimexFit, SlopeFit};
pub use inference::{CiMode, GammaAggregate, Heterogeneity, MediationResult};
pub use model::{EffectDataset, IndividualDataset, LatentEffects, SubgroupEffect};
