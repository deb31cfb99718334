//! Pure Gaussian (Slater-determinant) states under monitoring.
//!
//! The full quantum state of one trajectory is the Hermitian correlation
//! matrix `gtilde[a, a'] = <psi†_a psi_a'>` in the Hamiltonian eigenbasis.
//! Unitary evolution multiplies its entries by the exact phases
//! `exp(-i (E_a' - E_a) dt)`; a projective occupation measurement at site
//! `x` with click probability `n(x) = v† gtilde v` (`v` the eigenbasis
//! amplitudes of the site) updates the matrix by rank-one formulas:
//!
//! ```text
//! click:    gtilde' = gtilde + v v† - (gtilde v)(gtilde v)† / n(x)
//! no-click: gtilde' = gtilde - v v† + (w)(w)† / (1 - n(x)),  w = v - gtilde v
//! ```
//!
//! both `O(N^2)`.
//!
//! Internally the matrix is kept in the stationary frame `A` defined by
//! `gtilde(t) = D†(t) A D(t)` with `D = diag(exp(-i E_a t))`, so evolution
//! is pure bookkeeping and a measurement rotates its site vector into the
//! frame instead (`w = D v`); the two pictures are algebraically identical
//! (`D† w = v`, `A w = D gtilde v`), and the measurement updates keep their
//! literal form. A trajectory then costs one matrix-vector product and one
//! fused rank-two update per measurement.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::Spectrum;

/// Outcomes with Born probability at or below this floor are measure-zero;
/// forcing one is an error.
pub const EPS_CLICK: f64 = 1e-12;

/// Purity audit threshold: if `max|gtilde^2 - gtilde|` exceeds this at an
/// audit, eigenvalues are projected back onto {0, 1}.
pub const PURITY_TOL: f64 = 1e-8;

/// Number of measurement updates between purity audits.
pub const REPURIFY_INTERVAL: usize = 10_000;

/// Tolerated excursion of a Born probability outside `[0, 1]` before the
/// state is declared numerically degraded.
pub const BORN_TOL: f64 = 1e-10;

/// Basis in which a bitstring product state is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternBasis {
    Coordinate,
    Eigen,
}

/// Pure Gaussian state of one trajectory.
///
/// The frame matrix is stored as separate real and imaginary planes: the
/// measurement kernels are then plain fused-multiply-add streams, which
/// vectorize about twice as well as interleaved complex arithmetic.
#[derive(Debug, Clone)]
pub struct GaussianState {
    spectrum: Arc<Spectrum>,
    /// Stationary-frame matrix `A` (real part, row-major); equals `gtilde`
    /// whenever `time == 0`.
    frame_re: Vec<f64>,
    /// Imaginary part of `A`.
    frame_im: Vec<f64>,
    time: f64,
    n_particles: usize,
    updates_since_audit: usize,
    repurifications: u32,
    max_purity_defect: f64,
}

/// Split-plane complex vector.
#[derive(Clone)]
struct SplitVec {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitVec {
    fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }
}

/// `y = A w` on split planes.
fn matvec(ar: &[f64], ai: &[f64], w: &SplitVec, y: &mut SplitVec) {
    let n = w.re.len();
    for i in 0..n {
        let rr = &ar[i * n..(i + 1) * n];
        let ri = &ai[i * n..(i + 1) * n];
        let mut sre = 0.0;
        let mut sim = 0.0;
        for j in 0..n {
            sre += rr[j] * w.re[j] - ri[j] * w.im[j];
            sim += rr[j] * w.im[j] + ri[j] * w.re[j];
        }
        y.re[i] = sre;
        y.im[i] = sim;
    }
}

/// `A += s1 q1 q1† + s2 q2 q2†` fused into one pass over the matrix.
fn rank_two_update(
    ar: &mut [f64],
    ai: &mut [f64],
    q1: &SplitVec,
    s1: f64,
    q2: &SplitVec,
    s2: f64,
) {
    let n = q1.re.len();
    for i in 0..n {
        let rr = &mut ar[i * n..(i + 1) * n];
        let ri = &mut ai[i * n..(i + 1) * n];
        let (c1r, c1i) = (s1 * q1.re[i], s1 * q1.im[i]);
        let (c2r, c2i) = (s2 * q2.re[i], s2 * q2.im[i]);
        for j in 0..n {
            // c1 * conj(q1[j]) + c2 * conj(q2[j])
            rr[j] += c1r * q1.re[j] + c1i * q1.im[j] + c2r * q2.re[j] + c2i * q2.im[j];
            ri[j] += c1i * q1.re[j] - c1r * q1.im[j] + c2i * q2.re[j] - c2r * q2.im[j];
        }
    }
}

impl GaussianState {
    /// Ground state of the hopping Hamiltonian: the `n_particles` lowest
    /// modes occupied, in the spectrum's deterministic order.
    pub fn ground(spectrum: Arc<Spectrum>, n_particles: usize) -> Self {
        let n = spectrum.n_sites();
        assert!(n_particles <= n, "more particles than sites");
        let mut frame = Array2::<C64>::zeros((n, n));
        for alpha in 0..n_particles {
            frame[(alpha, alpha)] = C64::new(1.0, 0.0);
        }
        Self::from_frame(spectrum, frame, n_particles)
    }

    /// Ground state at the given filling; `N_p = round(rho N)`.
    pub fn ground_at_filling(spectrum: Arc<Spectrum>, rho: f64) -> Self {
        let n_p = (rho * spectrum.n_sites() as f64).round() as usize;
        Self::ground(spectrum, n_p)
    }

    /// Bitstring product state (`pattern[i]` = occupied) in the coordinate
    /// or eigenbasis.
    pub fn from_pattern(
        spectrum: Arc<Spectrum>,
        basis: PatternBasis,
        pattern: &[bool],
    ) -> Result<Self> {
        let n = spectrum.n_sites();
        if pattern.len() != n {
            return Err(Error::PatternLength {
                got: pattern.len(),
                expected: n,
            });
        }
        let n_particles = pattern.iter().filter(|&&b| b).count();
        let mut frame = Array2::<C64>::zeros((n, n));
        match basis {
            PatternBasis::Eigen => {
                for (alpha, &occ) in pattern.iter().enumerate() {
                    if occ {
                        frame[(alpha, alpha)] = C64::new(1.0, 0.0);
                    }
                }
            }
            PatternBasis::Coordinate => {
                // gtilde = V diag(pattern) V† = sum over occupied sites of
                // the outer product of the site's eigenbasis column
                let slice = frame.as_slice_mut().unwrap();
                for (x, &occ) in pattern.iter().enumerate() {
                    if !occ {
                        continue;
                    }
                    let v = spectrum.site_vector(x);
                    for (i, &vi) in v.iter().enumerate() {
                        let row = &mut slice[i * n..(i + 1) * n];
                        for (j, &vj) in v.iter().enumerate() {
                            row[j] += vi * vj.conj();
                        }
                    }
                }
            }
        }
        Ok(Self::from_frame(spectrum, frame, n_particles))
    }

    /// Rebuild a state from a materialized correlation matrix at time `t`
    /// (checkpoint restore).
    pub fn from_gtilde(
        spectrum: Arc<Spectrum>,
        gtilde: Array2<C64>,
        n_particles: usize,
        time: f64,
    ) -> Result<Self> {
        let n = spectrum.n_sites();
        if gtilde.shape() != [n, n] {
            return Err(Error::Schema(format!(
                "correlation matrix is {:?}, lattice has {n} sites",
                gtilde.shape()
            )));
        }
        let mut state = Self::from_frame(spectrum, gtilde, n_particles);
        // un-rotate: A = D(t) gtilde D†(t)
        state.rotate_frame(-time);
        state.time = time;
        Ok(state)
    }

    fn from_frame(spectrum: Arc<Spectrum>, frame: Array2<C64>, n_particles: usize) -> Self {
        let slice = frame.as_slice().expect("row-major frame");
        Self {
            spectrum,
            frame_re: slice.iter().map(|z| z.re).collect(),
            frame_im: slice.iter().map(|z| z.im).collect(),
            time: 0.0,
            n_particles,
            updates_since_audit: 0,
            repurifications: 0,
            max_purity_defect: 0.0,
        }
    }

    /// Frame matrix materialized as a complex array (no time phases).
    fn frame_matrix(&self) -> Array2<C64> {
        let n = self.n_sites();
        let data: Vec<C64> = self
            .frame_re
            .iter()
            .zip(&self.frame_im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        Array2::from_shape_vec((n, n), data).expect("square frame")
    }

    fn set_frame(&mut self, frame: &Array2<C64>) {
        let slice = frame.as_slice().expect("row-major frame");
        for (k, z) in slice.iter().enumerate() {
            self.frame_re[k] = z.re;
            self.frame_im[k] = z.im;
        }
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn n_sites(&self) -> usize {
        self.spectrum.n_sites()
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Times the eigenvalue projection has been applied.
    pub fn repurifications(&self) -> u32 {
        self.repurifications
    }

    /// Largest purity defect seen at any audit.
    pub fn max_purity_defect(&self) -> f64 {
        self.max_purity_defect
    }

    /// Exact unitary evolution by `dt >= 0`: every entry of the correlation
    /// matrix picks up `exp(-i (E_a' - E_a) dt)`, the diagonal is untouched.
    pub fn evolve(&mut self, dt: f64) -> Result<()> {
        if dt < 0.0 {
            return Err(Error::NegativeTimeStep(dt));
        }
        self.time += dt;
        Ok(())
    }

    /// `Tr gtilde` (conserved particle number).
    pub fn trace(&self) -> f64 {
        let n = self.n_sites();
        (0..n).map(|i| self.frame_re[i * n + i]).sum()
    }

    /// Site vector rotated into the stationary frame: `w = D(t) v`.
    fn frame_site_vector(&self, x: usize) -> SplitVec {
        let v = self.spectrum.site_vector(x);
        let n = self.n_sites();
        let mut w = SplitVec::zeros(n);
        for (k, (&e, vi)) in self.spectrum.energies.iter().zip(v).enumerate() {
            let phase = -e * self.time;
            let (s, c) = phase.sin_cos();
            w.re[k] = vi.re * c - vi.im * s;
            w.im[k] = vi.re * s + vi.im * c;
        }
        w
    }

    /// `y = A w` and the density `p = Re(w† y)`.
    fn matvec_and_density(&self, w: &SplitVec) -> (SplitVec, f64) {
        let n = self.n_sites();
        let mut y = SplitVec::zeros(n);
        matvec(&self.frame_re, &self.frame_im, w, &mut y);
        let mut p = 0.0;
        for j in 0..n {
            p += w.re[j] * y.re[j] + w.im[j] * y.im[j];
        }
        (y, p)
    }

    fn check_born(&self, p: f64) -> Result<f64> {
        if !(-BORN_TOL..=1.0 + BORN_TOL).contains(&p) {
            return Err(Error::NumericalDegradation {
                what: "born probability",
                value: p,
            });
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Born probability of a click at site `x`, clamped to `[0, 1]`.
    /// `O(N^2)`; the trajectory loop uses [`measure`](Self::measure), which
    /// shares this matrix-vector product with the update.
    pub fn born_probability(&self, x: usize) -> Result<f64> {
        let w = self.frame_site_vector(x);
        let (_, p) = self.matvec_and_density(&w);
        self.check_born(p)
    }

    /// Projective measurement at `x`: click iff `u < p`. Returns the
    /// outcome and the pre-measurement click probability.
    pub fn measure(&mut self, x: usize, u: f64) -> Result<(bool, f64)> {
        let w = self.frame_site_vector(x);
        let (y, praw) = self.matvec_and_density(&w);
        let p = self.check_born(praw)?;
        let outcome = u < p;
        self.apply_update(x, outcome, &w, &y, p)?;
        Ok((outcome, p))
    }

    /// Apply a fixed outcome (forced replay); returns the Born probability
    /// the outcome had.
    pub fn apply_outcome(&mut self, x: usize, outcome: bool) -> Result<f64> {
        let w = self.frame_site_vector(x);
        let (y, praw) = self.matvec_and_density(&w);
        let p = self.check_born(praw)?;
        self.apply_update(x, outcome, &w, &y, p)?;
        Ok(p)
    }

    /// Collapse onto "occupied" at `x`.
    pub fn apply_click(&mut self, x: usize) -> Result<()> {
        self.apply_outcome(x, true).map(|_| ())
    }

    /// Collapse onto "empty" at `x`.
    pub fn apply_noclick(&mut self, x: usize) -> Result<()> {
        self.apply_outcome(x, false).map(|_| ())
    }

    fn apply_update(
        &mut self,
        x: usize,
        outcome: bool,
        w: &SplitVec,
        y: &SplitVec,
        p: f64,
    ) -> Result<()> {
        let n = self.n_sites();
        if outcome {
            if p <= EPS_CLICK {
                return Err(Error::ForbiddenOutcome {
                    site: x,
                    outcome: 1,
                    probability: p,
                });
            }
            // A += w w† - (y/sqrt(p))(y/sqrt(p))†
            let scale = 1.0 / p.sqrt();
            let mut ys = SplitVec::zeros(n);
            for j in 0..n {
                ys.re[j] = y.re[j] * scale;
                ys.im[j] = y.im[j] * scale;
            }
            rank_two_update(&mut self.frame_re, &mut self.frame_im, w, 1.0, &ys, -1.0);
        } else {
            let q = 1.0 - p;
            if q <= EPS_CLICK {
                return Err(Error::ForbiddenOutcome {
                    site: x,
                    outcome: 0,
                    probability: q,
                });
            }
            // A += -w w† + (u/sqrt(1-p))(u/sqrt(1-p))†,  u = w - y
            let scale = 1.0 / q.sqrt();
            let mut us = SplitVec::zeros(n);
            for j in 0..n {
                us.re[j] = (w.re[j] - y.re[j]) * scale;
                us.im[j] = (w.im[j] - y.im[j]) * scale;
            }
            rank_two_update(&mut self.frame_re, &mut self.frame_im, w, -1.0, &us, 1.0);
        }
        self.updates_since_audit += 1;
        if self.updates_since_audit >= REPURIFY_INTERVAL {
            self.repurify_if_needed();
        }
        Ok(())
    }

    /// Multiply entry `(a, a')` by `exp(-i (E_a' - E_a) dt)` in place.
    fn rotate_frame(&mut self, dt: f64) {
        let n = self.n_sites();
        let energies = &self.spectrum.energies;
        for i in 0..n {
            let ei = energies[i];
            for j in 0..n {
                let phase = -(energies[j] - ei) * dt;
                let (s, c) = phase.sin_cos();
                let k = i * n + j;
                let (re, im) = (self.frame_re[k], self.frame_im[k]);
                self.frame_re[k] = re * c - im * s;
                self.frame_im[k] = re * s + im * c;
            }
        }
    }

    /// Materialize the correlation matrix `gtilde(t)` in the eigenbasis.
    pub fn gtilde(&self) -> Array2<C64> {
        let mut out = self.frame_matrix();
        let n = self.n_sites();
        let energies = &self.spectrum.energies;
        let slice = out.as_slice_mut().unwrap();
        for i in 0..n {
            let row = &mut slice[i * n..(i + 1) * n];
            let ei = energies[i];
            for (j, rj) in row.iter_mut().enumerate() {
                // exp(-i (E_j - E_i) t); exactly 1 on the diagonal
                let phase = -(energies[j] - ei) * self.time;
                *rj *= C64::new(phase.cos(), phase.sin());
            }
        }
        out
    }

    /// Green function in the coordinate basis, `G = V† gtilde V`.
    pub fn coordinate_green(&self) -> Array2<C64> {
        // G = (D V)† A (D V): scale the rows of V by the frame phases
        let mut dv = self.spectrum.basis.clone();
        for (alpha, mut row) in dv.rows_mut().into_iter().enumerate() {
            let phase = -self.spectrum.energies[alpha] * self.time;
            let d = C64::new(phase.cos(), phase.sin());
            for z in row.iter_mut() {
                *z *= d;
            }
        }
        let frame = self.frame_matrix();
        let adv = frame.dot(&dv);
        let dvh = dv.t().mapv(|z| z.conj());
        dvh.dot(&adv)
    }

    /// `max |gtilde^2 - gtilde|` (frame-invariant, so computed on `A`).
    pub fn purity_defect(&self) -> f64 {
        let frame = self.frame_matrix();
        let sq = frame.dot(&frame);
        let mut max = 0.0f64;
        for (s, f) in sq.iter().zip(frame.iter()) {
            max = max.max((s - f).norm());
        }
        max
    }

    /// Purity audit at the configured cadence: project eigenvalues back to
    /// {0, 1} if roundoff from long rank-one-update chains has accumulated.
    /// The `n_particles` largest eigenvalues go to 1, the rest to 0, which
    /// conserves the trace exactly.
    pub fn repurify_if_needed(&mut self) -> bool {
        self.updates_since_audit = 0;
        let defect = self.purity_defect();
        self.max_purity_defect = self.max_purity_defect.max(defect);
        if defect <= PURITY_TOL {
            return false;
        }
        let (vals, vecs) = self
            .frame_matrix()
            .eigh(UPLO::Lower)
            .expect("hermitian eigensolve during re-purification");
        let n = self.n_sites();
        // occupied = largest eigenvalues = last n_particles (ascending order)
        let cut = n - self.n_particles;
        let mut rebuilt = Array2::<C64>::zeros((n, n));
        {
            let slice = rebuilt.as_slice_mut().unwrap();
            for k in cut..n {
                debug_assert!(vals[k] > 0.5, "projected eigenvalue far from 1");
                let col = vecs.column(k);
                for i in 0..n {
                    let ci = col[i];
                    let row = &mut slice[i * n..(i + 1) * n];
                    for (j, rj) in row.iter_mut().enumerate() {
                        *rj += ci * col[j].conj();
                    }
                }
            }
        }
        self.set_frame(&rebuilt);
        self.repurifications += 1;
        true
    }
}
