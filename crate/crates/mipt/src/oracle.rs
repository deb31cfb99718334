//! Brute-force many-body simulator for small lattices (<= 12 sites).
//!
//! Implements the monitoring protocol literally on the full fixed-particle
//! Fock sector: dense unitary evolution by the second-quantized hopping
//! Hamiltonian, projective occupation measurements with Born probabilities,
//! and the exact single-particle Green function. Used only for validation of
//! the Gaussian engine (tests and the `oracle-check` subcommand) — it is a
//! test oracle, not a production path.
//!
//! Fermionic convention: modes ordered by site linearization; a basis string
//! `{x_1 < x_2 < ...}` is `psi†(x_1) psi†(x_2) ... |0>`, so annihilating at
//! `y` picks up `(-1)^(# occupied sites below y)`.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, EPS_CLICK};
use crate::lattice::{LatticeSpec, Spectrum};
use crate::trajectory::TrajectorySchedule;

/// Maximum brute-force system size; `C(12, 6) = 924` basis strings.
pub const MAX_SITES: usize = 12;

/// Fixed-particle-number sector of the Fock space, basis strings in
/// ascending bitmask order.
#[derive(Debug)]
pub struct FockSpace {
    pub lattice: LatticeSpec,
    pub n_particles: usize,
    masks: Vec<u32>,
}

impl FockSpace {
    pub fn new(lattice: LatticeSpec, n_particles: usize) -> Result<Arc<Self>> {
        let n = lattice.n_sites();
        if n > MAX_SITES {
            return Err(Error::Config(format!(
                "exact oracle supports at most {MAX_SITES} sites, got {n}"
            )));
        }
        if n_particles > n {
            return Err(Error::Config(format!(
                "{n_particles} particles on {n} sites"
            )));
        }
        let masks: Vec<u32> = (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == n_particles)
            .collect();
        Ok(Arc::new(Self {
            lattice,
            n_particles,
            masks,
        }))
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn mask(&self, i: usize) -> u32 {
        self.masks[i]
    }

    fn index_of(&self, mask: u32) -> usize {
        self.masks.binary_search(&mask).expect("mask in sector")
    }
}

/// Sign of `psi(y)` acting on a string: parity of occupied sites below `y`.
fn annihilation_sign(mask: u32, y: usize) -> f64 {
    let below = mask & ((1u32 << y) - 1);
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Many-body state with amplitudes over the sector basis.
#[derive(Debug, Clone)]
pub struct FockState {
    pub space: Arc<FockSpace>,
    pub amp: Vec<C64>,
}

impl FockState {
    /// Product state with the given occupation bitmask.
    pub fn from_occupation(space: Arc<FockSpace>, mask: u32) -> Result<Self> {
        if mask.count_ones() as usize != space.n_particles {
            return Err(Error::PatternLength {
                got: mask.count_ones() as usize,
                expected: space.n_particles,
            });
        }
        let mut amp = vec![C64::new(0.0, 0.0); space.dim()];
        amp[space.index_of(mask)] = C64::new(1.0, 0.0);
        Ok(Self { space, amp })
    }

    /// Slater determinant of `N_p` orbitals; `orbitals[j]` is the coordinate
    /// amplitude vector of the j-th filled orbital.
    pub fn from_orbitals(space: Arc<FockSpace>, orbitals: &[Vec<C64>]) -> Result<Self> {
        let n = space.lattice.n_sites();
        if orbitals.len() != space.n_particles {
            return Err(Error::PatternLength {
                got: orbitals.len(),
                expected: space.n_particles,
            });
        }
        let k = orbitals.len();
        let mut amp = Vec::with_capacity(space.dim());
        for &mask in &space.masks {
            let sites: Vec<usize> = (0..n).filter(|x| mask >> x & 1 == 1).collect();
            let mut m = Array2::<C64>::zeros((k, k));
            for (r, &x) in sites.iter().enumerate() {
                for (c, orb) in orbitals.iter().enumerate() {
                    m[(r, c)] = orb[x];
                }
            }
            amp.push(determinant(&mut m));
        }
        let mut state = Self { space, amp };
        state.normalize();
        Ok(state)
    }

    /// Ground state: the `N_p` lowest modes of `spectrum`, in its
    /// deterministic order.
    pub fn ground(space: Arc<FockSpace>, spectrum: &Spectrum) -> Result<Self> {
        let n = space.lattice.n_sites();
        let orbitals: Vec<Vec<C64>> = (0..space.n_particles)
            .map(|alpha| (0..n).map(|x| spectrum.basis[(alpha, x)]).collect())
            .collect();
        Self::from_orbitals(space, &orbitals)
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn normalize(&mut self) {
        let n = self.norm();
        for a in &mut self.amp {
            *a /= n;
        }
    }

    /// Born probability of a click (`n = 1`) at site `x`.
    pub fn occupation_probability(&self, x: usize) -> f64 {
        self.space
            .masks
            .iter()
            .zip(&self.amp)
            .filter(|(m, _)| *m >> x & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projective measurement of the occupation at `x`. The outcome is
    /// `forced` when given, otherwise a click iff `u < p`. Returns the
    /// outcome and the click probability of the pre-measurement state.
    pub fn measure(&mut self, x: usize, forced: Option<bool>, u: f64) -> Result<(bool, f64)> {
        let p = self.occupation_probability(x);
        let outcome = forced.unwrap_or(u < p);
        let keep = if outcome { p } else { 1.0 - p };
        if keep <= EPS_CLICK {
            return Err(Error::ForbiddenOutcome {
                site: x,
                outcome: outcome as u8,
                probability: keep,
            });
        }
        let scale = 1.0 / keep.sqrt();
        for (m, a) in self.space.masks.iter().zip(&mut self.amp) {
            if (m >> x & 1 == 1) == outcome {
                *a *= scale;
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
        Ok((outcome, p))
    }

    /// Exact single-particle Green function `G[x, y] = <psi†(x) psi(y)>`.
    pub fn green(&self) -> Array2<C64> {
        let n = self.space.lattice.n_sites();
        let mut g = Array2::<C64>::zeros((n, n));
        for (i, &mask) in self.space.masks.iter().enumerate() {
            let a = self.amp[i];
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for x in 0..n {
                if mask >> x & 1 == 1 {
                    g[(x, x)] += C64::new(a.norm_sqr(), 0.0);
                }
            }
            // psi†(x) psi(y) |mask>: y occupied, x empty
            for y in 0..n {
                if mask >> y & 1 == 0 {
                    continue;
                }
                let removed = mask & !(1 << y);
                let s1 = annihilation_sign(mask, y);
                for x in 0..n {
                    if x == y || removed >> x & 1 == 1 {
                        continue;
                    }
                    let s2 = annihilation_sign(removed, x);
                    let target = removed | 1 << x;
                    let j = self.space.index_of(target);
                    g[(x, y)] += self.amp[j].conj() * a * (s1 * s2);
                }
            }
        }
        g
    }

    /// `<psi†(a) psi†(b) psi(c) psi(d)>` by direct amplitude sums.
    pub fn four_point(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        let left = self.apply_annihilations(&[a, b]);
        let right = self.apply_annihilations(&[d, c]);
        left.iter()
            .zip(&right)
            .map(|(l, r)| l.conj() * r)
            .sum()
    }

    /// Amplitudes of `psi(ops[k-1]) ... psi(ops[0]) |state>` over the reduced
    /// sector, indexed by masks of the reduced particle number.
    fn apply_annihilations(&self, ops: &[usize]) -> Vec<C64> {
        let n = self.space.lattice.n_sites();
        // dense over all 2^n masks for simplicity (n <= 12)
        let mut cur = vec![C64::new(0.0, 0.0); 1 << n];
        for (i, &mask) in self.space.masks.iter().enumerate() {
            cur[mask as usize] = self.amp[i];
        }
        for &y in ops {
            let mut next = vec![C64::new(0.0, 0.0); 1 << n];
            for (mask, &a) in cur.iter().enumerate() {
                if a.norm_sqr() == 0.0 || mask >> y & 1 == 0 {
                    continue;
                }
                let sign = annihilation_sign(mask as u32, y);
                next[mask & !(1 << y)] += a * sign;
            }
            cur = next;
        }
        cur
    }
}

fn determinant(m: &mut Array2<C64>) -> C64 {
    let k = m.nrows();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[(a, col)].norm().total_cmp(&m[(b, col)].norm()))
            .unwrap();
        if m[(pivot, col)].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..k {
                let tmp = m[(pivot, j)];
                m[(pivot, j)] = m[(col, j)];
                m[(col, j)] = tmp;
            }
            det = -det;
        }
        let p = m[(col, col)];
        det *= p;
        for r in col + 1..k {
            let f = m[(r, col)] / p;
            for j in col..k {
                let sub = f * m[(col, j)];
                m[(r, j)] -= sub;
            }
        }
    }
    det
}

/// Dense many-body evolver: the sector Hamiltonian diagonalized once.
#[derive(Debug)]
pub struct Evolver {
    space: Arc<FockSpace>,
    vals: Vec<f64>,
    vecs: Array2<C64>,
}

impl Evolver {
    pub fn new(space: Arc<FockSpace>) -> Self {
        let lattice = space.lattice;
        let n = lattice.n_sites();
        let dim = space.dim();
        let mut h = Array2::<C64>::zeros((dim, dim));
        let t = C64::new(-lattice.j, 0.0);
        for (i, &mask) in space.masks.iter().enumerate() {
            for x in 0..n {
                for axis in 0..lattice.d {
                    let y = lattice.neighbor(x, axis);
                    // t (psi†_x psi_y + psi†_y psi_x); directed bonds both
                    // appear, so L = 2 doubles the link like the dispersion
                    for (from, to) in [(y, x), (x, y)] {
                        if mask >> from & 1 == 1 && (x == y || mask >> to & 1 == 0) && from != to {
                            let removed = mask & !(1 << from);
                            let s = annihilation_sign(mask, from)
                                * annihilation_sign(removed, to);
                            let j = space.index_of(removed | 1 << to);
                            h[(j, i)] += t * s;
                        }
                    }
                }
            }
        }
        let (vals, vecs) = h.eigh(UPLO::Lower).expect("hermitian eigensolve");
        Self {
            space,
            vals: vals.to_vec(),
            vecs,
        }
    }

    /// `exp(-i H dt)` applied exactly in the eigenbasis of `H`.
    pub fn evolve(&self, state: &mut FockState, dt: f64) -> Result<()> {
        if dt < 0.0 {
            return Err(Error::NegativeTimeStep(dt));
        }
        assert!(Arc::ptr_eq(&state.space, &self.space), "state from another sector");
        let dim = self.space.dim();
        let mut coeff = vec![C64::new(0.0, 0.0); dim];
        for k in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..dim {
                acc += self.vecs[(i, k)].conj() * state.amp[i];
            }
            let phase = -self.vals[k] * dt;
            acc *= C64::new(phase.cos(), phase.sin());
            coeff[k] = acc;
        }
        for i in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                acc += self.vecs[(i, k)] * coeff[k];
            }
            state.amp[i] = acc;
        }
        Ok(())
    }
}

/// Worst-case deviations between the two engines over a forced trajectory.
#[derive(Debug, Clone, Copy)]
pub struct LockstepReport {
    pub max_born_dev: f64,
    pub max_green_dev: f64,
    pub steps: usize,
}

/// Drive the Gaussian engine and the exact oracle through the same schedule
/// and outcome sequence, comparing Born probabilities before each update and
/// coordinate Green functions after it.
pub fn lockstep_compare(
    spectrum: &Arc<Spectrum>,
    n_particles: usize,
    schedule: &TrajectorySchedule,
    outcomes: &[bool],
) -> Result<LockstepReport> {
    assert_eq!(schedule.events.len(), outcomes.len(), "one outcome per event");
    let lattice = spectrum.lattice;
    let space = FockSpace::new(lattice, n_particles)?;
    let evolver = Evolver::new(space.clone());
    let mut exact = FockState::ground(space, spectrum)?;
    let mut gauss = GaussianState::ground(spectrum.clone(), n_particles);

    let mut report = LockstepReport {
        max_born_dev: 0.0,
        max_green_dev: green_deviation(&gauss, &exact),
        steps: 0,
    };
    let mut t = 0.0;
    for (event, &outcome) in schedule.events.iter().zip(outcomes) {
        evolver.evolve(&mut exact, event.time - t)?;
        gauss.evolve(event.time - t)?;
        t = event.time;

        let p_exact = exact.occupation_probability(event.site);
        let p_gauss = gauss.born_probability(event.site)?;
        report.max_born_dev = report.max_born_dev.max((p_exact - p_gauss).abs());

        exact.measure(event.site, Some(outcome), 0.0)?;
        gauss.apply_outcome(event.site, outcome)?;

        report.max_green_dev = report.max_green_dev.max(green_deviation(&gauss, &exact));
        report.steps += 1;
    }
    evolver.evolve(&mut exact, schedule.total_time - t)?;
    gauss.evolve(schedule.total_time - t)?;
    report.max_green_dev = report.max_green_dev.max(green_deviation(&gauss, &exact));
    Ok(report)
}

fn green_deviation(gauss: &GaussianState, exact: &FockState) -> f64 {
    let gg = gauss.coordinate_green();
    let ge = exact.green();
    let mut max = 0.0f64;
    for (a, b) in gg.iter().zip(ge.iter()) {
        max = max.max((a - b).norm());
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_spectrum;
    use approx::assert_abs_diff_eq;

    fn chain(l: usize) -> LatticeSpec {
        LatticeSpec::new(1, l, 1.0).unwrap()
    }

    fn bell_pair() -> FockState {
        // (|10> + |01>)/sqrt(2)
        let space = FockSpace::new(chain(2), 1).unwrap();
        let mut st = FockState::from_occupation(space, 0b01).unwrap();
        st.amp = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        st.normalize();
        st
    }

    #[test]
    fn sector_dimension() {
        let space = FockSpace::new(chain(6), 3).unwrap();
        assert_eq!(space.dim(), 20);
    }

    #[test]
    fn rejects_large_systems() {
        let spec = LatticeSpec::new(2, 4, 1.0).unwrap(); // 16 sites
        assert!(FockSpace::new(spec, 8).is_err());
    }

    #[test]
    fn bell_pair_green_function() {
        let g = bell_pair().green();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(g[(i, j)].re, 0.5, epsilon = 1e-12);
                assert_abs_diff_eq!(g[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bell_pair_measurement_probabilities_and_collapse() {
        let mut st = bell_pair();
        assert_abs_diff_eq!(st.occupation_probability(0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(st.occupation_probability(1), 0.5, epsilon = 1e-12);
        let (outcome, p) = st.measure(0, Some(true), 0.0).unwrap();
        assert!(outcome);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        let g = st.green();
        assert_abs_diff_eq!(g[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[(1, 1)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn measurement_on_eigenstate_is_deterministic_and_idempotent() {
        let space = FockSpace::new(chain(3), 2).unwrap();
        let mut st = FockState::from_occupation(space, 0b101).unwrap();
        let before = st.amp.clone();
        let (outcome, p) = st.measure(0, None, 0.9999).unwrap();
        assert!(outcome); // occupied regardless of u
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        for (a, b) in st.amp.iter().zip(&before) {
            assert!((a - b).norm() < 1e-12);
        }
        // forcing the measure-zero outcome errors out
        assert!(matches!(
            st.measure(0, Some(false), 0.0),
            Err(Error::ForbiddenOutcome { .. })
        ));
    }

    #[test]
    fn evolution_preserves_norm_and_identity_at_zero_dt() {
        let space = FockSpace::new(chain(4), 2).unwrap();
        let evolver = Evolver::new(space.clone());
        let mut st = FockState::from_occupation(space, 0b0011).unwrap();
        let before = st.amp.clone();
        evolver.evolve(&mut st, 0.0).unwrap();
        for (a, b) in st.amp.iter().zip(&before) {
            assert!((a - b).norm() < 1e-12);
        }
        evolver.evolve(&mut st, 0.7).unwrap();
        assert_abs_diff_eq!(st.norm(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            evolver.evolve(&mut st, -0.1),
            Err(Error::NegativeTimeStep(_))
        ));
    }

    #[test]
    fn single_particle_sector_matches_hopping_matrix_exponential() {
        let spec = chain(5);
        let space = FockSpace::new(spec, 1).unwrap();
        let evolver = Evolver::new(space.clone());
        // masks for N_p = 1 are 1 << x in ascending order, so amplitude i
        // corresponds to site i
        let mut st = FockState::from_occupation(space, 0b00001).unwrap();
        let dt = 0.37;
        evolver.evolve(&mut st, dt).unwrap();

        // exp(-i h dt) column 0 via the plane-wave eigenbasis
        let sp = build_spectrum(&spec);
        let n = 5;
        let mut expect = vec![C64::new(0.0, 0.0); n];
        for alpha in 0..n {
            let phase = -sp.energies[alpha] * dt;
            let ph = C64::new(phase.cos(), phase.sin());
            for x in 0..n {
                expect[x] += sp.basis[(alpha, x)].conj() * ph * sp.basis[(alpha, 0)];
            }
        }
        for x in 0..n {
            assert!((st.amp[x] - expect[x]).norm() < 1e-10, "site {x}");
        }
    }

    #[test]
    fn slater_states_satisfy_wick_theorem() {
        // 4-site chain, 2 particles, evolved and measured: stays a Slater
        // determinant, so 4-point functions factorize through the Green
        // function
        let spec = chain(4);
        let sp = build_spectrum(&spec);
        let space = FockSpace::new(spec, 2).unwrap();
        let evolver = Evolver::new(space.clone());
        let mut st = FockState::ground(space, &sp).unwrap();
        evolver.evolve(&mut st, 0.9).unwrap();
        st.measure(2, None, 0.3).unwrap();
        evolver.evolve(&mut st, 0.4).unwrap();

        let g = st.green();
        for a in 0..4 {
            for b in 0..4 {
                if a == b {
                    continue;
                }
                for c in 0..4 {
                    for d in 0..4 {
                        if c == d {
                            continue;
                        }
                        let lhs = st.four_point(a, b, c, d);
                        let rhs = g[(a, d)] * g[(b, c)] - g[(a, c)] * g[(b, d)];
                        assert!(
                            (lhs - rhs).norm() < 1e-10,
                            "Wick violated at ({a},{b},{c},{d}): {lhs} vs {rhs}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn green_is_hermitian_with_unit_trace_sum() {
        let spec = chain(4);
        let sp = build_spectrum(&spec);
        let space = FockSpace::new(spec, 2).unwrap();
        let evolver = Evolver::new(space.clone());
        let mut st = FockState::ground(space, &sp).unwrap();
        evolver.evolve(&mut st, 1.3).unwrap();
        let g = st.green();
        let mut trace = C64::new(0.0, 0.0);
        for i in 0..4 {
            trace += g[(i, i)];
            for j in 0..4 {
                assert!((g[(i, j)] - g[(j, i)].conj()).norm() < 1e-12);
            }
        }
        assert_abs_diff_eq!(trace.re, 2.0, epsilon = 1e-10);
    }
}
