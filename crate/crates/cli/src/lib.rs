//! File formats, reports and the command-line front end for
//! `hte_mediation_core`.

pub mod app;
pub mod error;
pub mod io;
pub mod plot;
pub mod report;
