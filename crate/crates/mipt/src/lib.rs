//! Monitored free fermions on hypercubic lattices.
//!
//! A tight-binding gas of free fermions is watched site by site: occupation
//! numbers are projectively measured at Poisson-distributed times, and the
//! Born-rule collapse competes with the unitary hopping dynamics. Because
//! both ingredients preserve Gaussianity, a whole quantum trajectory is
//! carried by the `N x N` correlation matrix of the state, and a projective
//! measurement is a rank-one update of that matrix.
//!
//! The crate bundles everything needed to locate and characterize the
//! entanglement transition of this protocol in `d > 1`:
//!
//! * [`lattice`] — geometry, spectrum and the plane-wave eigenbasis;
//! * [`gaussian`] — the correlation-matrix state with exact evolution and
//!   click / no-click measurement updates;
//! * [`trajectory`] — Poisson schedules, deterministic per-trajectory RNG
//!   streams and the steady-state driver;
//! * [`observables`] — density correlators, particle-number cumulants,
//!   covariances, entanglement entropies and full counting statistics;
//! * [`oracle`] — a brute-force many-body simulator (up to 12 sites) used to
//!   validate the Gaussian engine;
//! * [`theory`] — sigma-model predictions: bare coupling, Gaussian
//!   correlators, one-loop RG flow and critical exponents;
//! * [`collapse`] — finite-size-scaling machinery: master-curve quality,
//!   Nelder–Mead fits with Hessian error bars, crossing location and the
//!   small-momentum polynomial extrapolation;
//! * [`config`], [`run`], [`checkpoint`] — run configuration, the trajectory
//!   farm with resumable manifests, and binary state checkpoints.

pub mod checkpoint;
pub mod collapse;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod run;
pub mod stats;
pub mod theory;
pub mod trajectory;

pub use error::{Error, Result};

/// Tool version stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
