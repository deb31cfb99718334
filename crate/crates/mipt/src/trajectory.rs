//! Single quantum trajectories: Poisson measurement schedules, seeded RNG
//! streams and the steady-state driver.
//!
//! Determinism contract: a trajectory is fully determined by
//! `(base_seed, trajectory index, protocol)`. Each trajectory draws from its
//! own ChaCha8 stream (`seed_from_u64(base_seed)` + `set_stream(index)`), so
//! streams are disjoint by construction and independent of worker scheduling.
//! Draw order within a stream is fixed: (1) the number of measurements,
//! (2) their times, (3) their sites, (4) the initial bitstring if the
//! initial state is random, (5) one uniform per event for the Born coin.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, PatternBasis};
use crate::lattice::Spectrum;

/// Burn-in measurements per site entering the default steady-state time.
pub const BURN_IN_MEASUREMENTS: f64 = 20.0;

/// Ballistic traversals of the sample entering the default steady-state time.
pub const BALLISTIC_TRAVERSALS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementEvent {
    pub time: f64,
    pub site: usize,
}

/// Time-sorted list of measurement events on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySchedule {
    pub events: Vec<MeasurementEvent>,
    pub total_time: f64,
}

/// Initial state of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Ground state of the hopping Hamiltonian at the requested filling.
    Ground,
    /// Random occupation bitstring in the coordinate basis.
    CoordinateBits,
    /// Random occupation bitstring in the eigenbasis.
    EigenBits,
}

/// Everything `run_trajectory` needs besides the seed.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub spectrum: Arc<Spectrum>,
    /// Measurement rate per site per unit time.
    pub gamma: f64,
    /// Filling factor; `N_p = round(rho N)`.
    pub rho: f64,
    pub total_time: f64,
    pub initial: InitialState,
    pub record_outcomes: bool,
    /// Digest of the run configuration, stamped into results.
    pub config_digest: String,
}

impl Protocol {
    pub fn n_particles(&self) -> usize {
        (self.rho * self.spectrum.n_sites() as f64).round() as usize
    }
}

/// Outcome of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    /// Coordinate-basis Green function at the final time.
    pub green: Array2<C64>,
    pub outcome_record: Option<Vec<bool>>,
    pub base_seed: u64,
    pub index: u64,
    pub config_digest: String,
    pub repurifications: u32,
    pub max_purity_defect: f64,
    pub n_events: usize,
}

/// The RNG stream owned by trajectory `index` of a run seeded `base_seed`.
pub fn trajectory_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// 64-bit mix used to derive independent base seeds for sweep cells
/// (splitmix64 finalizer over `base ^ golden-ratio * salt`).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Poisson measurement schedule: `M ~ Poisson(gamma N T)` events with
/// i.i.d. uniform times in `[0, T)` and uniform sites, sorted by time
/// (stable for equal times).
pub fn sample_schedule(
    gamma: f64,
    total_time: f64,
    n_sites: usize,
    rng: &mut ChaCha8Rng,
) -> TrajectorySchedule {
    assert!(gamma >= 0.0, "negative measurement rate");
    assert!(total_time > 0.0, "total time must be positive");
    let lambda = gamma * n_sites as f64 * total_time;
    let m = if lambda > 0.0 {
        Poisson::new(lambda).expect("lambda > 0").sample(rng) as usize
    } else {
        0
    };
    let times: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * total_time).collect();
    let sites: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n_sites)).collect();
    let mut events: Vec<MeasurementEvent> = times
        .into_iter()
        .zip(sites)
        .map(|(time, site)| MeasurementEvent { time, site })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    TrajectorySchedule { events, total_time }
}

/// Default evolution time to reach the steady state: the longer of
/// `BURN_IN_MEASUREMENTS` per site (`20 / gamma`) and
/// `BALLISTIC_TRAVERSALS` crossings of the sample (`4 L / v0`).
pub fn steady_state_time(gamma: f64, l: usize, v0: f64) -> f64 {
    let ballistic = BALLISTIC_TRAVERSALS * l as f64 / v0;
    if gamma > 0.0 {
        ballistic.max(BURN_IN_MEASUREMENTS / gamma)
    } else {
        ballistic
    }
}

fn initial_state(protocol: &Protocol, rng: &mut ChaCha8Rng) -> Result<GaussianState> {
    let n = protocol.spectrum.n_sites();
    let n_p = protocol.n_particles();
    match protocol.initial {
        InitialState::Ground => Ok(GaussianState::ground(protocol.spectrum.clone(), n_p)),
        InitialState::CoordinateBits | InitialState::EigenBits => {
            let mut pattern = vec![false; n];
            for i in sample(rng, n, n_p) {
                pattern[i] = true;
            }
            let basis = if protocol.initial == InitialState::CoordinateBits {
                PatternBasis::Coordinate
            } else {
                PatternBasis::Eigen
            };
            GaussianState::from_pattern(protocol.spectrum.clone(), basis, &pattern)
        }
    }
}

/// Drive one trajectory to its final time and return the coordinate Green
/// function. Numerical-degradation errors propagate with the trajectory
/// identity attached.
pub fn run_trajectory(
    protocol: &Protocol,
    base_seed: u64,
    index: u64,
) -> Result<TrajectoryResult> {
    let mut rng = trajectory_rng(base_seed, index);
    let inner = |rng: &mut ChaCha8Rng| -> Result<(GaussianState, Option<Vec<bool>>, usize)> {
        let schedule = sample_schedule(
            protocol.gamma,
            protocol.total_time,
            protocol.spectrum.n_sites(),
            rng,
        );
        let mut state = initial_state(protocol, rng)?;
        let mut record = protocol
            .record_outcomes
            .then(|| Vec::with_capacity(schedule.events.len()));
        let mut t = 0.0;
        for event in &schedule.events {
            state.evolve(event.time - t)?;
            t = event.time;
            let u: f64 = rng.gen();
            let (outcome, _) = state.measure(event.site, u)?;
            if let Some(rec) = record.as_mut() {
                rec.push(outcome);
            }
        }
        state.evolve(schedule.total_time - t)?;
        let n_events = schedule.events.len();
        Ok((state, record, n_events))
    };
    match inner(&mut rng) {
        Ok((state, outcome_record, n_events)) => Ok(TrajectoryResult {
            green: state.coordinate_green(),
            outcome_record,
            base_seed,
            index,
            config_digest: protocol.config_digest.clone(),
            repurifications: state.repurifications(),
            max_purity_defect: state.max_purity_defect(),
            n_events,
        }),
        Err(source) => Err(Error::Trajectory {
            index,
            seed: base_seed,
            source: Box::new(source),
        }),
    }
}
