//! Steady-state observables computed from coordinate-basis Green functions.
//!
//! Everything here is a pure function of a single trajectory's Green
//! function; trajectory averaging is done by pushing the per-trajectory
//! values into [`crate::stats`] accumulators (see [`CorrelatorSamples`]),
//! whose merge is associative and commutative.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use std::collections::HashSet;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::stats::VecAccumulator;

/// Eigenvalues of a subsystem Green function may leave `[0, 1]` by at most
/// this much before the state is declared degraded.
pub const EIGENVALUE_TOL: f64 = 1e-8;

/// Log clamp for entropy: eigenvalues enter the logarithm clamped to
/// `[CLAMP, 1 - CLAMP]`; exact 0/1 contribute nothing.
const CLAMP: f64 = 1e-14;

/// Lattice momentum variable `2 sin(q/2)` for `q = 2 pi m / L`.
pub fn q_tilde(m: usize, l: usize) -> f64 {
    2.0 * (PI * m as f64 / l as f64).sin()
}

/// Chord length `(L / pi) sin(pi ell / L)` correcting strip widths for the
/// periodic geometry.
pub fn ell_tilde(ell: usize, l: usize) -> f64 {
    l as f64 / PI * (PI * ell as f64 / l as f64).sin()
}

// ---------------------------------------------------------------------------
// regions

/// A set of sites cut out by per-axis index intervals (periodic wrap
/// allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    /// Product of per-axis intervals `[lo, lo + len)` (mod L).
    pub fn from_intervals(lattice: &LatticeSpec, intervals: &[(usize, usize)]) -> Result<Self> {
        if intervals.len() != lattice.d {
            return Err(Error::InvalidRegion(format!(
                "{} intervals for a {}-dimensional lattice",
                intervals.len(),
                lattice.d
            )));
        }
        for &(lo, len) in intervals {
            if lo >= lattice.l || len == 0 || len > lattice.l {
                return Err(Error::InvalidRegion(format!(
                    "interval ({lo}, {len}) outside lattice of size {}",
                    lattice.l
                )));
            }
        }
        let mut sites = Vec::new();
        let mut coords = vec![0usize; lattice.d];
        build_sites(lattice, intervals, 0, &mut coords, &mut sites);
        sites.sort_unstable();
        Ok(Self { sites })
    }

    /// Interval `[lo, lo + width)` along `axis`, full extent elsewhere.
    pub fn strip(lattice: &LatticeSpec, axis: usize, lo: usize, width: usize) -> Result<Self> {
        if axis >= lattice.d {
            return Err(Error::InvalidRegion(format!(
                "axis {axis} on a {}-dimensional lattice",
                lattice.d
            )));
        }
        let intervals: Vec<(usize, usize)> = (0..lattice.d)
            .map(|a| if a == axis { (lo, width) } else { (0, lattice.l) })
            .collect();
        Self::from_intervals(lattice, &intervals)
    }

    /// The covariance geometry used for the transition scan: two strips of
    /// width `L/4` (full cross-section) separated by `L/4` on both sides of
    /// the torus. Requires `L % 4 == 0`.
    pub fn quarter_strips(lattice: &LatticeSpec) -> Result<(Self, Self)> {
        if lattice.l % 4 != 0 {
            return Err(Error::InvalidRegion(format!(
                "quarter-strip geometry needs L divisible by 4, got {}",
                lattice.l
            )));
        }
        let w = lattice.l / 4;
        Ok((
            Self::strip(lattice, 0, 0, w)?,
            Self::strip(lattice, 0, 2 * w, w)?,
        ))
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut sites: Vec<usize> = self
            .sites
            .iter()
            .chain(&other.sites)
            .copied()
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        sites.sort_unstable();
        Region { sites }
    }

    fn overlap(&self, other: &Region) -> usize {
        let set: HashSet<usize> = self.sites.iter().copied().collect();
        other.sites.iter().filter(|s| set.contains(s)).count()
    }
}

fn build_sites(
    lattice: &LatticeSpec,
    intervals: &[(usize, usize)],
    axis: usize,
    coords: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    if axis == lattice.d {
        out.push(lattice.site_index(coords));
        return;
    }
    let (lo, len) = intervals[axis];
    for k in 0..len {
        coords[axis] = (lo + k) % lattice.l;
        build_sites(lattice, intervals, axis + 1, coords, out);
    }
}

// ---------------------------------------------------------------------------
// density correlators

/// Connected density-density correlator on the lattice:
/// `C[x, x'] = G[x, x] delta - G[x, x'] G[x', x]`, real symmetric.
pub fn density_correlator(green: &Array2<C64>) -> Array2<f64> {
    let n = green.nrows();
    let mut c = Array2::<f64>::zeros((n, n));
    for x in 0..n {
        for y in 0..n {
            if x == y {
                let nx = green[(x, x)].re;
                c[(x, y)] = nx * (1.0 - nx);
            } else {
                c[(x, y)] = -(green[(x, y)] * green[(y, x)]).re;
            }
        }
    }
    c
}

/// Translation average of one trajectory's correlation matrix:
/// `c(r) = (1/N) sum_x C[x, x + r]` over periodic displacements.
pub fn displacement_average(lattice: &LatticeSpec, c: &Array2<f64>) -> Vec<f64> {
    let n = lattice.n_sites();
    let mut out = vec![0.0; n];
    for x in 0..n {
        for y in 0..n {
            out[lattice.displacement_index(x, y)] += c[(x, y)];
        }
    }
    for v in &mut out {
        *v /= n as f64;
    }
    out
}

/// `|sum_r c(r)|`: the exact charge-conservation zero of `C(q = 0)` for a
/// pure state.
pub fn charge_conservation_defect(c_x: &[f64]) -> f64 {
    c_x.iter().sum::<f64>().abs()
}

/// Full momentum grid `C(q) = sum_r c(r) exp(-i q . r)` (real for the
/// symmetric input produced by [`displacement_average`]).
pub fn momentum_grid(lattice: &LatticeSpec, c_x: &[f64]) -> Vec<f64> {
    let n = lattice.n_sites();
    let l = lattice.l;
    let mut out = vec![0.0; n];
    for qi in 0..n {
        let qc = lattice.site_coords(qi);
        let mut acc = 0.0;
        for (ri, &cv) in c_x.iter().enumerate() {
            if cv == 0.0 {
                continue;
            }
            let rc = lattice.site_coords(ri);
            let phase: f64 = qc
                .iter()
                .zip(&rc)
                .map(|(&m, &r)| 2.0 * PI * (m * r) as f64 / l as f64)
                .sum();
            acc += cv * phase.cos();
        }
        out[qi] = acc;
    }
    out
}

/// Momentum cut along the axis directions, averaged over the `d` equivalent
/// axes (and over `+-q`, which are equal by symmetry of `c(r)`): entry `m`
/// is `C(q = 2 pi m / L)` for `m = 0..=L/2`.
pub fn momentum_axis_cut(lattice: &LatticeSpec, c_x: &[f64]) -> Vec<f64> {
    let l = lattice.l;
    let n = lattice.n_sites();
    let mut out = vec![0.0; l / 2 + 1];
    for (m, slot) in out.iter_mut().enumerate() {
        let q = 2.0 * PI * m as f64 / l as f64;
        let mut acc = 0.0;
        for r in 0..n {
            let rc = lattice.site_coords(r);
            let cv = c_x[r];
            if cv == 0.0 {
                continue;
            }
            for axis in 0..lattice.d {
                acc += cv * (q * rc[axis] as f64).cos();
            }
        }
        *slot = acc / lattice.d as f64;
    }
    out
}

/// Trajectory-to-trajectory accumulation of the correlator estimates. The
/// displacement map, the momentum grid and the axis cut are all averaged
/// with per-bin standard errors from the trajectory scatter.
#[derive(Debug, Clone)]
pub struct CorrelatorSamples {
    lattice: LatticeSpec,
    displacement: VecAccumulator,
    grid: VecAccumulator,
    cut: VecAccumulator,
    worst_q0: f64,
}

impl CorrelatorSamples {
    pub fn new(lattice: LatticeSpec) -> Self {
        let n = lattice.n_sites();
        Self {
            lattice,
            displacement: VecAccumulator::with_len(n),
            grid: VecAccumulator::with_len(n),
            cut: VecAccumulator::with_len(lattice.l / 2 + 1),
            worst_q0: 0.0,
        }
    }

    /// Reduce one trajectory's Green function and absorb it.
    pub fn push_green(&mut self, green: &Array2<C64>) {
        let c = density_correlator(green);
        self.push_c_matrix(&c);
    }

    pub fn push_c_matrix(&mut self, c: &Array2<f64>) {
        let c_x = displacement_average(&self.lattice, c);
        self.push_displacement(&c_x);
    }

    /// Absorb a per-trajectory displacement average (used when replaying
    /// manifests).
    pub fn push_displacement(&mut self, c_x: &[f64]) {
        self.worst_q0 = self.worst_q0.max(charge_conservation_defect(c_x));
        self.displacement.push(c_x);
        self.grid.push(&momentum_grid(&self.lattice, c_x));
        self.cut.push(&momentum_axis_cut(&self.lattice, c_x));
    }

    pub fn merge(&mut self, other: &CorrelatorSamples) {
        self.displacement.merge(&other.displacement);
        self.grid.merge(&other.grid);
        self.cut.merge(&other.cut);
        self.worst_q0 = self.worst_q0.max(other.worst_q0);
    }

    pub fn n_trajectories(&self) -> u64 {
        self.displacement.bin(0).count()
    }

    /// Worst per-trajectory `|C(q=0)|` seen so far.
    pub fn worst_q0(&self) -> f64 {
        self.worst_q0
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    /// Translation-averaged `C(x - x')` with standard errors.
    pub fn displacement_estimate(&self) -> CorrelatorEstimate {
        CorrelatorEstimate {
            lattice: self.lattice,
            values: self.displacement.clone(),
        }
    }

    /// Full-grid `C(q)` with standard errors.
    pub fn momentum_grid_estimate(&self) -> CorrelatorEstimate {
        CorrelatorEstimate {
            lattice: self.lattice,
            values: self.grid.clone(),
        }
    }

    /// Axis cut `(q_tilde, mean, err)` for `m = 0..=L/2`.
    pub fn momentum_cut_estimate(&self) -> Vec<(f64, f64, Option<f64>)> {
        (0..self.cut.len())
            .map(|m| {
                let acc = self.cut.bin(m);
                (q_tilde(m, self.lattice.l), acc.mean(), acc.std_err())
            })
            .collect()
    }
}

/// Trajectory- and translation-averaged correlator keyed by the linearized
/// displacement (or momentum) tuple.
#[derive(Debug, Clone)]
pub struct CorrelatorEstimate {
    pub lattice: LatticeSpec,
    values: VecAccumulator,
}

impl CorrelatorEstimate {
    pub fn n_trajectories(&self) -> u64 {
        self.values.bin(0).count()
    }

    pub fn mean(&self, index: usize) -> f64 {
        self.values.bin(index).mean()
    }

    /// Standard error; `None` when only one trajectory was supplied.
    pub fn std_err(&self, index: usize) -> Option<f64> {
        self.values.bin(index).std_err()
    }

    pub fn mean_at(&self, tuple: &[usize]) -> f64 {
        self.mean(self.lattice.site_index(tuple))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Translation average over a batch of per-trajectory correlation matrices.
pub fn translation_average(
    lattice: &LatticeSpec,
    c_matrices: &[Array2<f64>],
) -> Result<CorrelatorEstimate> {
    if c_matrices.is_empty() {
        return Err(Error::Schema("no trajectories to average".into()));
    }
    let mut samples = CorrelatorSamples::new(*lattice);
    for c in c_matrices {
        samples.push_c_matrix(c);
    }
    Ok(samples.displacement_estimate())
}

// ---------------------------------------------------------------------------
// subsystem observables

/// Submatrix of the Green function on a region.
fn submatrix(green: &Array2<C64>, region: &Region) -> Array2<C64> {
    let sites = region.sites();
    let k = sites.len();
    let mut sub = Array2::<C64>::zeros((k, k));
    for (i, &x) in sites.iter().enumerate() {
        for (j, &y) in sites.iter().enumerate() {
            sub[(i, j)] = green[(x, y)];
        }
    }
    sub
}

/// Eigenvalues of the region-restricted Green function, checked against the
/// tolerance band around `[0, 1]`.
fn subsystem_eigenvalues(green: &Array2<C64>, region: &Region) -> Result<Vec<f64>> {
    let sub = submatrix(green, region);
    let (vals, _) = sub
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Schema(format!("eigensolve failed: {e}")))?;
    for &v in vals.iter() {
        if !(-EIGENVALUE_TOL..=1.0 + EIGENVALUE_TOL).contains(&v) {
            return Err(Error::NumericalDegradation {
                what: "subsystem eigenvalue",
                value: v,
            });
        }
    }
    Ok(vals.to_vec())
}

/// Second particle-number cumulant `Tr[G_A (1 - G_A)] = Var(N_A)`.
pub fn cumulant2(green: &Array2<C64>, region: &Region) -> f64 {
    let sites = region.sites();
    let mut acc = 0.0;
    for &x in sites {
        acc += green[(x, x)].re;
    }
    for &x in sites {
        for &y in sites {
            acc -= (green[(x, y)] * green[(y, x)]).re;
        }
    }
    acc
}

fn entropy_of_eigenvalue(lambda: f64) -> f64 {
    if lambda <= 0.0 || lambda >= 1.0 {
        return 0.0;
    }
    let l = lambda.clamp(CLAMP, 1.0 - CLAMP);
    -l * l.ln() - (1.0 - l) * (1.0 - l).ln()
}

/// Von Neumann entanglement entropy of a region, in nats.
pub fn entanglement_entropy(green: &Array2<C64>, region: &Region) -> Result<f64> {
    let vals = subsystem_eigenvalues(green, region)?;
    Ok(vals.into_iter().map(entropy_of_eigenvalue).sum())
}

/// Particle-number covariance of two disjoint regions,
/// `G_AB = sum_{x in A, y in B} |G[x, y]|^2 >= 0` for pure states.
pub fn covariance(green: &Array2<C64>, a: &Region, b: &Region) -> Result<f64> {
    let overlap = a.overlap(b);
    if overlap > 0 {
        return Err(Error::OverlappingRegions(overlap));
    }
    // canonical iteration order so G_AB == G_BA bitwise
    let (first, second) = if a.sites() <= b.sites() { (a, b) } else { (b, a) };
    let mut acc = 0.0;
    for &x in first.sites() {
        for &y in second.sites() {
            acc += green[(x, y)].norm_sqr();
        }
    }
    Ok(acc)
}

/// Mutual information between disjoint regions and its comparison against
/// the covariance scaling `I ~ (2 pi^2 / 3) G_AB`.
#[derive(Debug, Clone, Copy)]
pub struct MutualInformation {
    pub value: f64,
    pub g_ab: f64,
    /// `I / ((2 pi^2 / 3) G_AB)`; `None` when the covariance vanishes.
    pub ratio: Option<f64>,
}

pub fn mutual_information(green: &Array2<C64>, a: &Region, b: &Region) -> Result<MutualInformation> {
    let overlap = a.overlap(b);
    if overlap > 0 {
        return Err(Error::OverlappingRegions(overlap));
    }
    let s_a = entanglement_entropy(green, a)?;
    let s_b = entanglement_entropy(green, b)?;
    let s_ab = entanglement_entropy(green, &a.union(b))?;
    let value = s_a + s_b - s_ab;
    let g_ab = covariance(green, a, b)?;
    let scale = 2.0 * PI * PI / 3.0 * g_ab;
    let ratio = (scale > 0.0).then(|| value / scale);
    Ok(MutualInformation { value, g_ab, ratio })
}

// ---------------------------------------------------------------------------
// full counting statistics

/// Riemann zeta at even integer arguments `s >= 2` (direct sum plus an
/// Euler-Maclaurin tail), used by the entropy-cumulant series.
pub fn zeta_even(s: u32) -> f64 {
    assert!(s >= 2, "zeta only needed for s >= 2");
    let s = s as f64;
    let n = 64.0f64;
    let mut sum = 0.0;
    let mut k = 1.0;
    while k < n {
        sum += k.powf(-s);
        k += 1.0;
    }
    // tail: integral + midpoint + first Bernoulli correction
    sum + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s / 12.0 * n.powf(-s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * n.powf(-s - 3.0)
}

/// Particle-number cumulants `C^(1..=max_order)` of a region.
///
/// The counting variable is a sum of independent Bernoulli(lambda_i) over
/// the eigenvalues of `G_A`, so cumulants add mode by mode. Per mode they
/// are generated by the Taylor recursion of `M = K'`, which satisfies the
/// Riccati equation `M' = M - M^2`:
/// `kappa_{n+2} = kappa_{n+1} - sum_k C(n, k) kappa_{k+1} kappa_{n-k+1}`.
/// This stays in series space (no numerical differentiation) and is exact
/// for frozen modes (lambda = 0 or 1).
pub fn fcs_cumulants(green: &Array2<C64>, region: &Region, max_order: usize) -> Result<Vec<f64>> {
    assert!(
        (1..=40).contains(&max_order),
        "cumulant order must be in 1..=40"
    );
    let vals = subsystem_eigenvalues(green, region)?;
    let mut total = vec![0.0; max_order];
    // binomial table C(n, k) for n <= max_order - 2
    let mut binom = vec![vec![0.0f64; max_order]; max_order];
    for n in 0..max_order {
        binom[n][0] = 1.0;
        for k in 1..=n {
            binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0.0 };
        }
    }
    for lambda in vals {
        let p = lambda.clamp(0.0, 1.0);
        // mu[n] = n-th derivative of M at 0; kappa_{n+1} = mu[n]
        let mut mu = vec![0.0; max_order];
        mu[0] = p;
        for n in 0..max_order - 1 {
            let mut conv = 0.0;
            for k in 0..=n {
                conv += binom[n][k] * mu[k] * mu[n - k];
            }
            mu[n + 1] = mu[n] - conv;
        }
        for (t, m) in total.iter_mut().zip(&mu) {
            *t += m;
        }
    }
    Ok(total)
}

/// Partial sums `S_Q = sum_{q <= Q} 2 zeta(2q) C^(2q)` of the
/// entropy-from-cumulants series, for `Q = 1..` as far as the supplied
/// cumulants reach.
pub fn klich_levitov_partial_sums(cumulants: &[f64]) -> Vec<f64> {
    let q_max = cumulants.len() / 2;
    let mut sums = Vec::with_capacity(q_max);
    let mut acc = 0.0;
    for q in 1..=q_max {
        acc += 2.0 * zeta_even(2 * q as u32) * cumulants[2 * q - 1];
        sums.push(acc);
    }
    sums
}

// ---------------------------------------------------------------------------
// entropy / cumulant strip profile

/// Per-strip entropy and second cumulant of one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSample {
    pub ell: usize,
    pub entropy: f64,
    pub cumulant2: f64,
}

/// Entropy and second cumulant of strips `ell = 1..=L/2` along axis 0.
pub fn entropy_profile(green: &Array2<C64>, lattice: &LatticeSpec) -> Result<Vec<ProfileSample>> {
    let mut out = Vec::with_capacity(lattice.l / 2);
    for ell in 1..=lattice.l / 2 {
        let region = Region::strip(lattice, 0, 0, ell)?;
        out.push(ProfileSample {
            ell,
            entropy: entanglement_entropy(green, &region)?,
            cumulant2: cumulant2(green, &region),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianState;
    use crate::lattice::{build_spectrum, LatticeSpec};
    use crate::oracle::{FockSpace, FockState};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lat(d: usize, l: usize) -> LatticeSpec {
        LatticeSpec::new(d, l, 1.0).unwrap()
    }

    fn bell_green() -> Array2<C64> {
        Array2::from_shape_vec(
            (2, 2),
            vec![
                C64::new(0.5, 0.0),
                C64::new(0.5, 0.0),
                C64::new(0.5, 0.0),
                C64::new(0.5, 0.0),
            ],
        )
        .unwrap()
    }

    /// A pure monitored state on a small lattice, well scrambled.
    fn scrambled_state(d: usize, l: usize, seed: u64, events: usize) -> Array2<C64> {
        let sp = build_spectrum(&lat(d, l));
        let n = sp.n_sites();
        let mut st = GaussianState::ground(sp, n / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..events {
            st.evolve(rng.gen::<f64>()).unwrap();
            let x = rng.gen_range(0..n);
            st.measure(x, rng.gen()).unwrap();
        }
        st.coordinate_green()
    }

    #[test]
    fn product_state_has_no_fluctuations() {
        let mut g = Array2::<C64>::zeros((4, 4));
        g[(0, 0)] = C64::new(1.0, 0.0);
        g[(2, 2)] = C64::new(1.0, 0.0);
        let c = density_correlator(&g);
        assert!(c.iter().all(|&v| v.abs() < 1e-15));
        let lattice = lat(1, 4);
        let region = Region::from_intervals(&lattice, &[(0, 2)]).unwrap();
        assert_abs_diff_eq!(cumulant2(&g, &region), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            entanglement_entropy(&g, &region).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let b = Region::from_intervals(&lattice, &[(2, 2)]).unwrap();
        assert_abs_diff_eq!(covariance(&g, &region, &b).unwrap(), 0.0, epsilon = 1e-15);
        let mi = mutual_information(&g, &region, &b).unwrap();
        assert_abs_diff_eq!(mi.value, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn bell_pair_correlator_matrix() {
        let c = density_correlator(&bell_green());
        assert_abs_diff_eq!(c[(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(1, 1)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(0, 1)], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(1, 0)], -0.25, epsilon = 1e-15);
    }

    #[test]
    fn bell_pair_subsystem_observables() {
        let g = bell_green();
        let lattice = lat(1, 2);
        let a = Region::from_intervals(&lattice, &[(0, 1)]).unwrap();
        let b = Region::from_intervals(&lattice, &[(1, 1)]).unwrap();
        assert_abs_diff_eq!(cumulant2(&g, &a), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            entanglement_entropy(&g, &a).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(covariance(&g, &a, &b).unwrap(), 0.25, epsilon = 1e-12);
        let mi = mutual_information(&g, &a, &b).unwrap();
        assert_abs_diff_eq!(mi.value, 2.0 * std::f64::consts::LN_2, epsilon = 1e-9);
        // single mode at 1/2: ratio of entropy to second cumulant
        let ratio = entanglement_entropy(&g, &a).unwrap() / cumulant2(&g, &a);
        assert_abs_diff_eq!(ratio, std::f64::consts::LN_2 / 0.25, epsilon = 1e-9);
    }

    #[test]
    fn row_sums_vanish_for_pure_states() {
        let green = scrambled_state(1, 8, 5, 60);
        let c = density_correlator(&green);
        for x in 0..8 {
            let sum: f64 = (0..8).map(|y| c[(x, y)]).sum();
            assert!(sum.abs() < 1e-10, "row {x} sums to {sum}");
        }
    }

    #[test]
    fn off_diagonal_correlator_nonpositive_for_pure_states() {
        let green = scrambled_state(1, 8, 9, 60);
        let c = density_correlator(&green);
        for x in 0..8 {
            for y in 0..8 {
                if x != y {
                    assert!(c[(x, y)] <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn translation_average_is_identity_on_invariant_input() {
        // constant diagonal + circulant off-diagonal: already translation
        // invariant, so the average reproduces the per-pair values
        let lattice = lat(1, 4);
        let mut c = Array2::<f64>::zeros((4, 4));
        for x in 0..4usize {
            for y in 0..4usize {
                let r = (y + 4 - x) % 4;
                c[(x, y)] = match r {
                    0 => 0.25,
                    1 | 3 => -0.1,
                    _ => -0.05,
                };
            }
        }
        let est = translation_average(&lattice, &[c.clone(), c]).unwrap();
        assert_abs_diff_eq!(est.mean_at(&[0]), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(est.mean_at(&[1]), -0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(est.mean_at(&[2]), -0.05, epsilon = 1e-14);
        // identical trajectories: zero scatter
        assert_eq!(est.std_err(1), Some(0.0));
        assert_eq!(est.n_trajectories(), 2);
    }

    #[test]
    fn single_trajectory_reports_missing_errors() {
        let lattice = lat(1, 4);
        let c = Array2::<f64>::eye(4) * 0.25;
        let est = translation_average(&lattice, &[c]).unwrap();
        assert_eq!(est.std_err(0), None);
    }

    #[test]
    fn delta_correlator_has_flat_momentum_transform() {
        let lattice = lat(2, 4);
        let mut c_x = vec![0.0; 16];
        c_x[0] = 0.21;
        for v in momentum_grid(&lattice, &c_x) {
            assert_abs_diff_eq!(v, 0.21, epsilon = 1e-14);
        }
        for v in momentum_axis_cut(&lattice, &c_x) {
            assert_abs_diff_eq!(v, 0.21, epsilon = 1e-14);
        }
    }

    #[test]
    fn q_zero_vanishes_per_trajectory_for_pure_states() {
        let lattice = lat(2, 4);
        let green = scrambled_state(2, 4, 33, 100);
        let c = density_correlator(&green);
        let c_x = displacement_average(&lattice, &c);
        assert!(charge_conservation_defect(&c_x) < 1e-10);
        let grid = momentum_grid(&lattice, &c_x);
        assert!(grid[0].abs() < 1e-10);
    }

    #[test]
    fn q_tilde_and_ell_tilde_formulas() {
        assert_abs_diff_eq!(q_tilde(0, 8), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q_tilde(4, 8), 2.0, epsilon = 1e-12); // q = pi
        assert_abs_diff_eq!(q_tilde(1, 8), 2.0 * (PI / 8.0).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(ell_tilde(4, 8), 8.0 / PI, epsilon = 1e-12); // ell = L/2
        assert_abs_diff_eq!(
            ell_tilde(1, 8),
            8.0 / PI * (PI / 8.0).sin(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn cumulant2_matches_brute_force_variance() {
        // random 6-site pure Gaussian state vs exact amplitude bookkeeping
        let spec = lat(1, 6);
        let sp = build_spectrum(&spec);
        let mut st = GaussianState::ground(sp.clone(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            st.evolve(rng.gen::<f64>()).unwrap();
            let x = rng.gen_range(0..6);
            st.measure(x, rng.gen()).unwrap();
        }
        let green = st.coordinate_green();

        // same state in the many-body oracle by replaying the protocol
        let space = FockSpace::new(spec, 3).unwrap();
        let evolver = crate::oracle::Evolver::new(space.clone());
        let mut exact = FockState::ground(space, &sp).unwrap();
        let mut st2 = GaussianState::ground(sp, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let dt = rng.gen::<f64>();
            st2.evolve(dt).unwrap();
            evolver.evolve(&mut exact, dt).unwrap();
            let x = rng.gen_range(0..6);
            let (outcome, _) = st2.measure(x, rng.gen()).unwrap();
            exact.measure(x, Some(outcome), 0.0).unwrap();
        }

        let region = Region::from_intervals(&lat(1, 6), &[(1, 3)]).unwrap();
        // Var(N_A) from the exact amplitudes
        let (mut ex, mut ex2) = (0.0, 0.0);
        for (i, amp) in exact.amp.iter().enumerate() {
            let mask = exact.space.mask(i);
            let count = region
                .sites()
                .iter()
                .filter(|&&x| mask >> x & 1 == 1)
                .count() as f64;
            let w = amp.norm_sqr();
            ex += w * count;
            ex2 += w * count * count;
        }
        let var = ex2 - ex * ex;
        assert_abs_diff_eq!(cumulant2(&green, &region), var, epsilon = 1e-10);
    }

    #[test]
    fn entropy_symmetric_under_complement_for_pure_states() {
        let lattice = lat(2, 4);
        let green = scrambled_state(2, 4, 77, 120);
        for w in 1..4 {
            let a = Region::strip(&lattice, 0, 0, w).unwrap();
            let complement = Region::strip(&lattice, 0, w, 4 - w).unwrap();
            let s1 = entanglement_entropy(&green, &a).unwrap();
            let s2 = entanglement_entropy(&green, &complement).unwrap();
            assert_abs_diff_eq!(s1, s2, epsilon = 1e-8);
        }
    }

    #[test]
    fn covariance_is_symmetric_and_rejects_overlap() {
        let lattice = lat(2, 4);
        let green = scrambled_state(2, 4, 13, 80);
        let (a, b) = Region::quarter_strips(&lattice).unwrap();
        let g_ab = covariance(&green, &a, &b).unwrap();
        let g_ba = covariance(&green, &b, &a).unwrap();
        assert_eq!(g_ab, g_ba);
        assert!(g_ab >= 0.0);
        assert!(matches!(
            covariance(&green, &a, &a),
            Err(Error::OverlappingRegions(_))
        ));
    }

    #[test]
    fn quarter_strip_geometry() {
        let lattice = lat(2, 8);
        let (a, b) = Region::quarter_strips(&lattice).unwrap();
        assert_eq!(a.len(), 16); // 2 columns x 8
        assert_eq!(b.len(), 16);
        assert_eq!(a.overlap(&b), 0);
        assert!(Region::quarter_strips(&lat(2, 6)).is_err());
    }

    #[test]
    fn region_wraps_periodically() {
        let lattice = lat(1, 4);
        let r = Region::from_intervals(&lattice, &[(3, 2)]).unwrap();
        assert_eq!(r.sites(), &[0, 3]);
        assert!(Region::from_intervals(&lattice, &[(0, 0)]).is_err());
        assert!(Region::from_intervals(&lattice, &[(4, 1)]).is_err());
    }

    #[test]
    fn bernoulli_cumulants_low_orders() {
        // single eigenvalue p: C2 = p(1-p), C3 = p(1-p)(1-2p),
        // C4 = p(1-p)(1 - 6p(1-p))
        let mut g = Array2::<C64>::zeros((2, 2));
        let p = 0.3;
        g[(0, 0)] = C64::new(p, 0.0);
        let lattice = lat(1, 2);
        let region = Region::from_intervals(&lattice, &[(0, 1)]).unwrap();
        let c = fcs_cumulants(&g, &region, 6).unwrap();
        let q = 1.0 - p;
        assert_abs_diff_eq!(c[0], p, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], p * q, epsilon = 1e-14);
        assert_abs_diff_eq!(c[2], p * q * (1.0 - 2.0 * p), epsilon = 1e-14);
        assert_abs_diff_eq!(c[3], p * q * (1.0 - 6.0 * p * q), epsilon = 1e-13);
        // kappa5 = pq(1 - 14p + 36p^2 - 24p^3), kappa6 = pq(1 - 30p + 150p^2
        // - 240p^3 + 120p^4) from iterating kappa' -> pq d(kappa)/dp
        assert_abs_diff_eq!(
            c[4],
            p * q * (1.0 - 14.0 * p + 36.0 * p * p - 24.0 * p * p * p),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            c[5],
            p * q
                * (1.0 - 30.0 * p + 150.0 * p * p - 240.0 * p * p * p
                    + 120.0 * p * p * p * p),
            epsilon = 1e-12
        );
    }

    #[test]
    fn frozen_modes_have_no_higher_cumulants() {
        let mut g = Array2::<C64>::zeros((3, 3));
        g[(0, 0)] = C64::new(1.0, 0.0);
        let lattice = lat(1, 3);
        let region = Region::from_intervals(&lattice, &[(0, 3)]).unwrap();
        let c = fcs_cumulants(&g, &region, 12).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-14);
        for order in 1..12 {
            assert_abs_diff_eq!(c[order], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cumulants_add_over_modes_and_match_cumulant2() {
        let lattice = lat(2, 4);
        let green = scrambled_state(2, 4, 55, 100);
        let region = Region::strip(&lattice, 0, 1, 2).unwrap();
        let c = fcs_cumulants(&green, &region, 4).unwrap();
        assert_abs_diff_eq!(c[1], cumulant2(&green, &region), epsilon = 1e-10);
        // first cumulant is the mean particle number in the region
        let mean: f64 = region.sites().iter().map(|&x| green[(x, x)].re).sum();
        assert_abs_diff_eq!(c[0], mean, epsilon = 1e-10);
    }

    #[test]
    fn zeta_even_matches_closed_forms() {
        assert_abs_diff_eq!(zeta_even(2), PI * PI / 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(zeta_even(4), PI.powi(4) / 90.0, epsilon = 1e-14);
        assert_abs_diff_eq!(zeta_even(6), PI.powi(6) / 945.0, epsilon = 1e-14);
        assert_abs_diff_eq!(zeta_even(40), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn entropy_profile_shapes_and_chord() {
        let lattice = lat(2, 4);
        let green = scrambled_state(2, 4, 3, 100);
        let profile = entropy_profile(&green, &lattice).unwrap();
        assert_eq!(profile.len(), 2);
        assert_eq!(profile[0].ell, 1);
        assert!(profile.iter().all(|p| p.entropy >= 0.0 && p.cumulant2 >= 0.0));
    }
}
