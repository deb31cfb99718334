//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Momentum passed to `dispersion` is not on the reciprocal lattice.
    #[error("momentum component {value} is not 2*pi*m/L for integer m (L = {l})")]
    IncommensurateMomentum { value: f64, l: usize },

    /// A Born probability left `[0, 1]` by more than the numerical band, or
    /// a subsystem eigenvalue left `[0, 1]` by more than its tolerance. The
    /// state can no longer be trusted.
    #[error("numerical degradation: {what} = {value:.3e} outside tolerance")]
    NumericalDegradation { what: &'static str, value: f64 },

    /// A forced or sampled outcome with Born probability at or below the
    /// click floor; analytically this outcome has measure zero.
    #[error("forbidden outcome {outcome} at site {site}: probability {probability:.3e}")]
    ForbiddenOutcome {
        site: usize,
        outcome: u8,
        probability: f64,
    },

    #[error("negative time step {0}")]
    NegativeTimeStep(f64),

    #[error("occupation pattern has length {got}, lattice has {expected} sites")]
    PatternLength { got: usize, expected: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("regions overlap on {0} site(s)")]
    OverlappingRegions(usize),

    /// `eps <= 0`: the one-loop flow reaches the localized phase for any
    /// bare coupling, so there is no critical point to report.
    #[error("no transition at epsilon = {0} <= 0 (flow is always towards the localized phase)")]
    NoTransition(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input data: {0}")]
    Schema(String),

    #[error("collapse fit did not converge after {iterations} iterations (best chi2 = {chi2:.6e})")]
    NoConvergence { iterations: usize, chi2: f64 },

    #[error("{0}")]
    Collapse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    /// A trajectory aborted with numerical degradation; carries enough
    /// metadata to reproduce it.
    #[error("trajectory {index} (seed {seed}) failed: {source}")]
    Trajectory {
        index: u64,
        seed: u64,
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::NumericalDegradation { .. }
            | Error::ForbiddenOutcome { .. }
            | Error::NoConvergence { .. }
            | Error::Trajectory { .. } => 2,
            _ => 1,
        }
    }
}
