//! Data-generating processes and Monte Carlo drivers.
//!
//! Every replication draws from substreams keyed by `(seed, label, rep, ...)`,
//! so tables depend only on their configuration.

mod dgp;
mod experiments;
mod traditional;

pub use dgp::{
    dgp_aggregate, dgp_confounded, dgp_moderator, AggregateDgpConfig, ConfoundedDgpConfig, ConfoundedSample,
    ModeratorDgpConfig,
};
pub use experiments::{
    grow_se_multiplier, hte_pipeline, power_curve, run_calibration, run_table2, CalibrationConfig, CalibrationEstimator,
    CalibrationRow, PowerConfig, PowerPoint, Table2Config, Table2Row,
};
pub use traditional::{traditional_acme, TraditionalFit};
