use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller supplied malformed or insufficient data or configuration.
    Input,
    /// The data are well formed but the requested computation is not defined
    /// for them (noise swamps the signal, singular designs, ...).
    Numerical,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("insufficient subgroups: need at least {required}, got {got}")]
    InsufficientSubgroups { required: usize, got: usize },
    #[error("duplicate group: {0}")]
    DuplicateGroup(String),
    #[error("invalid record: {field} (group {group})")]
    InvalidRecord { group: String, field: &'static str },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate regressor: zero variance in the explanatory variable")]
    DegenerateRegressor,
    #[error("zero signal variance: attenuation factor would be 0")]
    ZeroSignalVariance,
    #[error("infinite weight: group {0} has a zero standard error")]
    InfiniteWeight(String),
    #[error("no convergence after {} iterations (last iterate {:?})", trace.len(), trace.last())]
    NoConvergence { trace: Vec<f64> },
    #[error("noise dominates signal: corrected denominator {denominator} <= 0; use SIMEX instead")]
    NoiseDominatesSignal { denominator: f64 },
    #[error("bootstrap unstable: {invalid} of {total} replicates invalid")]
    BootstrapUnstable { invalid: usize, total: usize },
    #[error("underdetermined extrapolant: need at least 3 grid points, got {0}")]
    UnderdeterminedExtrapolant(usize),
    #[error("ill-conditioned design: condition number {0:e}")]
    IllConditioned(f64),
    #[error("collinear covariates")]
    CollinearCovariates,
    #[error("infinite quantile at p = {0}")]
    InfiniteQuantile(f64),
    #[error("degenerate test: zero standard error with a nonzero estimate")]
    DegenerateTest,
    #[error("invalid partition: unit {unit} matches {matches} groups")]
    InvalidPartition { unit: usize, matches: usize },
    #[error("binary treatment required")]
    BinaryTreatmentRequired,
    #[error("insufficient data: need at least {required} units, got {got}")]
    InsufficientData { required: usize, got: usize },
    #[error("negative variance estimate: {0}")]
    NegativeVariance(f64),
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),
    #[error("degenerate regression: singular design")]
    DegenerateRegression,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateRegressor
            | Error::ZeroSignalVariance
            | Error::InfiniteWeight(_)
            | Error::NoConvergence { .. }
            | Error::NoiseDominatesSignal { .. }
            | Error::BootstrapUnstable { .. }
            | Error::IllConditioned(_)
            | Error::CollinearCovariates
            | Error::DegenerateTest
            | Error::DegenerateGroup(_)
            | Error::NegativeVariance(_)
            | Error::DegenerateRegression => ErrorKind::Numerical,
            _ => ErrorKind::Input,
        }
    }
}
