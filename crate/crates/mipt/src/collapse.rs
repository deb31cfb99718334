//! Finite-size-scaling extraction of the critical point and exponents.
//!
//! The collapse quality is the reduced chi-square between each data point
//! and a "master curve" estimated by local weighted linear least squares
//! over the nearest neighbors (in the scaled abscissa
//! `x = L^(1/nu) (gamma - gamma_c)`) drawn from the *other* system sizes.
//! Minimization is a Nelder-Mead simplex with pinned defaults; parameter
//! covariance comes from the inverse Hessian of the quality at the optimum
//! (central finite differences).


use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Default fit window around the transition, `gamma/J` in `[2.4, 3.4]`.
pub const DEFAULT_WINDOW: (f64, f64) = (2.4, 3.4);

/// Nelder-Mead defaults: initial simplex step per parameter, simplex
/// diameter and value-spread convergence thresholds, iteration cap.
pub const SIMPLEX_STEP: f64 = 0.1;
pub const SIMPLEX_DIAMETER_TOL: f64 = 1e-4;
pub const SIMPLEX_SPREAD_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 2000;

/// Relative step for the central-difference Hessian (floored at 1e-3 in
/// absolute terms for parameters near zero, e.g. zeta).
pub const HESSIAN_STEP: f64 = 1e-3;

/// One measured point of the scaling observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub size: usize,
    pub gamma: f64,
    pub value: f64,
    pub std_err: f64,
}

/// Validated collection of scaling points.
#[derive(Debug, Clone)]
pub struct ScalingDataset {
    points: Vec<ScalingPoint>,
    sizes: Vec<usize>,
}

impl ScalingDataset {
    /// Requires at least 3 distinct sizes and strictly positive errors.
    pub fn new(points: Vec<ScalingPoint>) -> Result<Self> {
        let mut sizes: Vec<usize> = points.iter().map(|p| p.size).collect();
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.len() < 3 {
            return Err(Error::Collapse(format!(
                "scaling collapse needs >= 3 distinct sizes, got {}",
                sizes.len()
            )));
        }
        if let Some(bad) = points.iter().find(|p| !(p.std_err > 0.0)) {
            return Err(Error::Collapse(format!(
                "non-positive standard error at (L = {}, gamma = {})",
                bad.size, bad.gamma
            )));
        }
        Ok(Self { points, sizes })
    }

    pub fn points(&self) -> &[ScalingPoint] {
        &self.points
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn gamma_range(&self) -> (f64, f64) {
        let lo = self.points.iter().map(|p| p.gamma).fold(f64::INFINITY, f64::min);
        let hi = self
            .points
            .iter()
            .map(|p| p.gamma)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Restriction to a gamma window (used standalone before fitting).
    pub fn restrict_gamma(&self, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            self.points
                .iter()
                .copied()
                .filter(|p| p.gamma >= lo && p.gamma <= hi)
                .collect(),
        )
    }
}

/// Master-curve estimate for one data point.
#[derive(Debug, Clone, Copy)]
struct LocalFit {
    master: f64,
    master_var: f64,
}

/// Per-point master curve values `(x, y, dy, Y, dY)`; excluded points carry
/// `None`.
#[derive(Debug, Clone)]
pub struct MasterCurve {
    pub points: Vec<Option<MasterPoint>>,
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct MasterPoint {
    pub x: f64,
    pub y: f64,
    pub dy: f64,
    pub master: f64,
    pub master_err: f64,
}

/// How master-curve neighbors are drawn from the other system sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[doc(hidden)]
pub enum NeighborScheme {
    /// The two nearest in `|x|` distance from each other size.
    NearestTwo,
    /// The nearest below and the nearest above `x` from each other size;
    /// points that no other size brackets fall away, which keeps the local
    /// fits interpolating instead of extrapolating into the tails.
    Bracket,
}

/// Local weighted least-squares master curve at the parameters
/// `(nu, gamma_c, zeta)`: for each point, take the bracketing neighbors in
/// `x` from every other system size and fit a weighted line.
pub fn master_curve(dataset: &ScalingDataset, nu: f64, gamma_c: f64, zeta: f64) -> MasterCurve {
    master_curve_with(dataset, nu, gamma_c, zeta, NeighborScheme::Bracket)
}

#[doc(hidden)]
pub fn master_curve_with(
    dataset: &ScalingDataset,
    nu: f64,
    gamma_c: f64,
    zeta: f64,
    scheme: NeighborScheme,
) -> MasterCurve {
    let pts = dataset.points();
    let scaled: Vec<(f64, f64, f64)> = pts
        .iter()
        .map(|p| {
            let l = p.size as f64;
            let x = l.powf(1.0 / nu) * (p.gamma - gamma_c);
            let denom = l.powf(zeta);
            (x, p.value / denom, p.std_err / denom)
        })
        .collect();

    let mut out = Vec::with_capacity(pts.len());
    let mut excluded = 0;
    for (i, p) in pts.iter().enumerate() {
        let (xi, yi, dyi) = scaled[i];
        let mut neighbors: Vec<(f64, f64, f64)> = Vec::new();
        for &size in dataset.sizes() {
            if size == p.size {
                continue;
            }
            let candidates = pts
                .iter()
                .zip(&scaled)
                .filter(|(q, _)| q.size == size)
                .map(|(_, &c)| c);
            match scheme {
                NeighborScheme::NearestTwo => {
                    let mut cs: Vec<(f64, f64, f64)> = candidates.collect();
                    // deterministic tie-breaking by (|dx|, x, y)
                    cs.sort_by(|a, b| {
                        ((a.0 - xi).abs(), a.0, a.1)
                            .partial_cmp(&((b.0 - xi).abs(), b.0, b.1))
                            .unwrap()
                    });
                    neighbors.extend(cs.into_iter().take(2));
                }
                NeighborScheme::Bracket => {
                    let mut below: Option<(f64, f64, f64)> = None;
                    let mut above: Option<(f64, f64, f64)> = None;
                    for c in candidates {
                        if c.0 <= xi {
                            if below.is_none_or(|b| c.0 > b.0 || (c.0 == b.0 && c.1 < b.1)) {
                                below = Some(c);
                            }
                        } else if above.is_none_or(|a| c.0 < a.0 || (c.0 == a.0 && c.1 < a.1)) {
                            above = Some(c);
                        }
                    }
                    if let (Some(b), Some(a)) = (below, above) {
                        neighbors.push(b);
                        neighbors.push(a);
                    }
                }
            }
        }
        match weighted_line(&neighbors, xi) {
            Some(fit) => out.push(Some(MasterPoint {
                x: xi,
                y: yi,
                dy: dyi,
                master: fit.master,
                master_err: fit.master_var.max(0.0).sqrt(),
            })),
            None => {
                excluded += 1;
                out.push(None);
            }
        }
    }
    MasterCurve {
        points: out,
        excluded,
    }
}

/// Weighted linear fit through `(x, y, dy)` evaluated (with variance) at
/// `x0`. Centering at `x0` makes the intercept the prediction.
fn weighted_line(neighbors: &[(f64, f64, f64)], x0: f64) -> Option<LocalFit> {
    if neighbors.len() < 2 {
        return None;
    }
    let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, dy) in neighbors {
        let w = 1.0 / (dy * dy);
        let dx = x - x0;
        sw += w;
        swx += w * dx;
        swxx += w * dx * dx;
        swy += w * y;
        swxy += w * dx * y;
    }
    let det = sw * swxx - swx * swx;
    // degenerate when all neighbor abscissas coincide
    if det.abs() <= 1e-12 * sw * swxx.max(1e-300) {
        return None;
    }
    let a = (swxx * swy - swx * swxy) / det;
    let var_a = swxx / det;
    Some(LocalFit {
        master: a,
        master_var: var_a,
    })
}

/// Reduced chi-square of the collapse at `(nu, gamma_c, zeta)`:
/// `(1/N) sum (y - Y)^2 / (dy^2 + dY^2)` over the included points.
pub fn quality(dataset: &ScalingDataset, nu: f64, gamma_c: f64, zeta: f64) -> Result<f64> {
    let mc = master_curve(dataset, nu, gamma_c, zeta);
    let mut chi2 = 0.0;
    let mut n = 0usize;
    for p in mc.points.iter().flatten() {
        let denom = p.dy * p.dy + p.master_err * p.master_err;
        chi2 += (p.y - p.master).powi(2) / denom;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Collapse("no usable points in collapse".into()));
    }
    Ok(chi2 / n as f64)
}

/// Result of a scaling-collapse fit.
#[derive(Debug, Clone)]
pub struct CollapseResult {
    pub gamma_c: f64,
    pub nu: f64,
    /// Present when zeta was a fit parameter.
    pub zeta: Option<f64>,
    pub chi2: f64,
    /// Covariance of the fit parameters (inverse Hessian of the quality);
    /// `None` when the Hessian was singular.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// `sqrt(diag(covariance))`, ordered `(gamma_c, nu[, zeta])`.
    pub errors: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub n_points: usize,
    pub excluded_points: usize,
}

impl CollapseResult {
    pub fn gamma_c_err(&self) -> Option<f64> {
        self.errors.as_ref().map(|e| e[0])
    }

    pub fn nu_err(&self) -> Option<f64> {
        self.errors.as_ref().map(|e| e[1])
    }

    pub fn zeta_err(&self) -> Option<f64> {
        self.errors.as_ref().and_then(|e| e.get(2).copied())
    }
}

/// Minimize the collapse quality over `(gamma_c, nu)` (and `zeta` when
/// `fit_zeta`), starting from `init = (gamma_c, nu)`.
///
/// Non-convergence within the iteration cap is reported through
/// `converged = false` with the best point found; a singular Hessian leaves
/// `errors = None`.
pub fn fit_collapse(
    dataset: &ScalingDataset,
    init: (f64, f64),
    fit_zeta: bool,
) -> Result<CollapseResult> {
    let (glo, ghi) = dataset.gamma_range();
    if init.0 < glo || init.0 > ghi {
        return Err(Error::Collapse(format!(
            "initial gamma_c = {} outside the dataset range [{glo}, {ghi}]",
            init.0
        )));
    }
    let dim = if fit_zeta { 3 } else { 2 };
    let start = if fit_zeta {
        vec![init.0, init.1, 0.0]
    } else {
        vec![init.0, init.1]
    };
    let objective = |theta: &[f64]| -> f64 {
        let zeta = if fit_zeta { theta[2] } else { 0.0 };
        // quality is undefined for nu <= 0; wall it off
        if theta[1] <= 0.05 {
            return f64::INFINITY;
        }
        quality(dataset, theta[1], theta[0], zeta).unwrap_or(f64::INFINITY)
    };

    let nm = nelder_mead(&objective, &start, SIMPLEX_STEP);
    let best = nm.best;
    let chi2 = nm.value;
    let mc = master_curve(
        dataset,
        best[1],
        best[0],
        if fit_zeta { best[2] } else { 0.0 },
    );

    // Hessian by central differences. The base step is the pinned relative
    // 1e-3 (floored for parameters near zero); since the quality surface has
    // micro-creases where neighbor assignments switch, the stencil is grown
    // until two consecutive scales agree on the curvature, so the error
    // bars measure the statistical bowl rather than a crease.
    let steps: Vec<f64> = best
        .iter()
        .map(|t| HESSIAN_STEP * t.abs().max(1.0))
        .collect();
    let hessian = hessian_adaptive(&objective, &best, &steps);
    let covariance = hessian.and_then(|h| invert_symmetric(&h));
    let errors = covariance.as_ref().map(|cov| {
        (0..dim).map(|k| cov[k][k].max(0.0).sqrt()).collect::<Vec<f64>>()
    });

    Ok(CollapseResult {
        gamma_c: best[0],
        nu: best[1],
        zeta: fit_zeta.then(|| best[2]),
        chi2,
        covariance,
        errors,
        converged: nm.converged,
        iterations: nm.iterations,
        n_points: dataset.points().len() - mc.excluded,
        excluded_points: mc.excluded,
    })
}

struct NelderMeadOutcome {
    best: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) with the crate's pinned convergence thresholds.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64) -> NelderMeadOutcome {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for k in 0..dim {
        let mut v = start.to_vec();
        v[k] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let spread = simplex[dim].1 - simplex[0].1;
        if diameter < SIMPLEX_DIAMETER_TOL && spread.abs() < SIMPLEX_SPREAD_TOL {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(v, _)| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = (0..dim)
            .map(|k| centroid[k] + (centroid[k] - worst.0[k]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + 2.0 * (centroid[k] - worst.0[k]))
                .collect();
            let f_expand = f(&expand);
            simplex[dim] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[dim - 1].1 {
            simplex[dim] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + 0.5 * (worst.0[k] - centroid[k]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < worst.1 {
                simplex[dim] = (contract, f_contract);
            } else {
                // shrink towards the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for k in 0..dim {
                        entry.0[k] = best[k] + 0.5 * (entry.0[k] - best[k]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadOutcome {
        best: simplex[0].0.clone(),
        value: simplex[0].1,
        converged,
        iterations,
    }
}

/// Central-difference Hessian with stencil doubling: accept the curvature
/// once two consecutive scales agree diagonally within 25% (and are
/// positive). Returns `None` when no scale yields a consistent positive
/// quadratic, leaving the error bars flagged unreliable.
fn hessian_adaptive(
    f: &dyn Fn(&[f64]) -> f64,
    theta: &[f64],
    base_steps: &[f64],
) -> Option<Vec<Vec<f64>>> {
    let mut scale = 1.0;
    let mut prev: Option<Vec<Vec<f64>>> = None;
    for _ in 0..=10 {
        let steps: Vec<f64> = base_steps.iter().map(|s| s * scale).collect();
        let cur = hessian_central(f, theta, &steps);
        if let (Some(p), Some(c)) = (&prev, &cur) {
            let consistent = (0..theta.len()).all(|k| {
                p[k][k] > 0.0 && c[k][k] > 0.0 && (p[k][k] / c[k][k] - 1.0).abs() < 0.25
            });
            if consistent {
                return cur;
            }
        }
        prev = cur;
        scale *= 2.0;
    }
    None
}

/// Symmetric Hessian by central differences; `None` if any evaluation is
/// non-finite.
fn hessian_central(
    f: &dyn Fn(&[f64]) -> f64,
    theta: &[f64],
    steps: &[f64],
) -> Option<Vec<Vec<f64>>> {
    let dim = theta.len();
    let f0 = f(theta);
    let mut h = vec![vec![0.0; dim]; dim];
    let eval = |shift: &[(usize, f64)]| -> f64 {
        let mut t = theta.to_vec();
        for &(k, s) in shift {
            t[k] += s;
        }
        f(&t)
    };
    for i in 0..dim {
        let hi = steps[i];
        let fpp = eval(&[(i, hi)]);
        let fmm = eval(&[(i, -hi)]);
        h[i][i] = (fpp - 2.0 * f0 + fmm) / (hi * hi);
        for j in i + 1..dim {
            let hj = steps[j];
            let fpq = eval(&[(i, hi), (j, hj)]);
            let fpm = eval(&[(i, hi), (j, -hj)]);
            let fmp = eval(&[(i, -hi), (j, hj)]);
            let fmq = eval(&[(i, -hi), (j, -hj)]);
            let mixed = (fpq - fpm - fmp + fmq) / (4.0 * hi * hj);
            // symmetric average by construction
            h[i][j] = mixed;
            h[j][i] = mixed;
        }
    }
    if h.iter().flatten().all(|v| v.is_finite()) {
        Some(h)
    } else {
        None
    }
}

/// Inverse of a small symmetric matrix; `None` when singular.
fn invert_symmetric(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for k in 0..n {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for k in 0..n {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// momentum extrapolation

/// Weighted least-squares cubic through exactly five `(q_tilde, value, err)`
/// points, evaluated at `q_tilde = 0` with the propagated error.
/// Exact on polynomials of degree <= 3.
pub fn extrapolate_q0(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() != 5 {
        return Err(Error::Collapse(format!(
            "q -> 0 extrapolation wants exactly 5 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.2 > 0.0)) {
        return Err(Error::Collapse(format!(
            "non-positive error at q_tilde = {}",
            p.0
        )));
    }
    // normal equations for a cubic: S[i][j] = sum w q^(i+j), rhs[i] = sum w q^i y
    let mut s = vec![vec![0.0f64; 4]; 4];
    let mut rhs = [0.0f64; 4];
    for &(q, y, dy) in points {
        let w = 1.0 / (dy * dy);
        let qp = [1.0, q, q * q, q * q * q];
        for i in 0..4 {
            rhs[i] += w * qp[i] * y;
            for j in 0..4 {
                s[i][j] += w * qp[i] * qp[j];
            }
        }
    }
    let sinv = invert_symmetric(&s).ok_or_else(|| {
        Error::Collapse("degenerate abscissas in q -> 0 extrapolation".into())
    })?;
    let mut intercept = 0.0;
    for j in 0..4 {
        intercept += sinv[0][j] * rhs[j];
    }
    Ok((intercept, sinv[0][0].max(0.0).sqrt()))
}

// ---------------------------------------------------------------------------
// crossing locator

/// One observable-vs-gamma curve at a fixed size, sorted by gamma.
#[derive(Debug, Clone)]
pub struct Curve {
    pub size: usize,
    /// `(gamma, value)` pairs.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct CrossingEstimate {
    /// Median of the pairwise crossings.
    pub gamma_c: f64,
    /// Half-range of the crossings.
    pub spread: f64,
    pub crossings: Vec<f64>,
}

/// Locate the common crossing of consecutive-size curves by linear
/// interpolation of their difference on the shared gamma grid. Returns
/// `Ok(None)` when no crossing exists in range.
pub fn crossing_locator(curves: &[Curve]) -> Result<Option<CrossingEstimate>> {
    if curves.len() < 2 {
        return Err(Error::Collapse(
            "crossing location needs at least two sizes".into(),
        ));
    }
    let mut sorted: Vec<&Curve> = curves.iter().collect();
    sorted.sort_by_key(|c| c.size);
    let mut crossings = Vec::new();
    for pair in sorted.windows(2) {
        let (small, large) = (pair[0], pair[1]);
        // common gamma grid
        let mut common: Vec<(f64, f64)> = Vec::new(); // (gamma, delta)
        for &(g, v_small) in &small.points {
            if let Some(&(_, v_large)) = large
                .points
                .iter()
                .find(|(g2, _)| (g2 - g).abs() < 1e-9)
            {
                common.push((g, v_large - v_small));
            }
        }
        if common.len() < 2 {
            return Err(Error::Collapse(format!(
                "sizes {} and {} share fewer than two gamma points",
                small.size, large.size
            )));
        }
        common.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in common.windows(2) {
            let (g1, d1) = w[0];
            let (g2, d2) = w[1];
            if d1 == 0.0 {
                crossings.push(g1);
            } else if d1 * d2 < 0.0 {
                crossings.push(g1 + (g2 - g1) * d1 / (d1 - d2));
            }
        }
    }
    if crossings.is_empty() {
        return Ok(None);
    }
    crossings.sort_by(f64::total_cmp);
    let median = if crossings.len() % 2 == 1 {
        crossings[crossings.len() / 2]
    } else {
        let m = crossings.len() / 2;
        0.5 * (crossings[m - 1] + crossings[m])
    };
    let spread = 0.5 * (crossings.last().unwrap() - crossings.first().unwrap());
    Ok(Some(CrossingEstimate {
        gamma_c: median,
        spread,
        crossings,
    }))
}

// ---------------------------------------------------------------------------
// synthetic data

/// Noise model for synthetic datasets.
#[derive(Debug, Clone, Copy)]
pub enum Noise {
    /// Error bar proportional to each point's clean value.
    Relative(f64),
    /// Constant error bar in units of the crossing-scale value (this is
    /// what trajectory scatter looks like: it does not shrink deep in the
    /// localized tail).
    Absolute(f64),
}

/// Synthetic scaling dataset from a planted master curve
/// `value = shape(L^(1/nu) (gamma - gamma_c))` with Gaussian noise; the
/// quoted errors equal the noise level. Used by the fit-validation harness.
pub fn synthetic_dataset(
    sizes: &[usize],
    gammas: &[f64],
    gamma_c: f64,
    nu: f64,
    noise: Noise,
    shape: impl Fn(f64) -> f64,
    rng: &mut ChaCha8Rng,
) -> ScalingDataset {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut points = Vec::new();
    for &l in sizes {
        for &g in gammas {
            let x = (l as f64).powf(1.0 / nu) * (g - gamma_c);
            let clean = shape(x);
            let err = match noise {
                Noise::Relative(f) => (f * clean.abs()).max(1e-12),
                Noise::Absolute(s) => s,
            };
            let value = clean + err * normal.sample(rng);
            points.push(ScalingPoint {
                size: l,
                gamma: g,
                value,
                std_err: err,
            });
        }
    }
    ScalingDataset::new(points).expect("synthetic dataset is well-formed")
}

/// Monotone sigmoid master curve used for synthetic covariance-style data:
/// 2 at the far metallic side, 1 at the crossing, 0 deep in the localized
/// phase.
pub fn sigmoid_master(x: f64) -> f64 {
    2.0 / (1.0 + x.exp())
}

/// Two-branch master curve with the asymptotics of the particle-number
/// covariance in d = 2: linear growth `1 - x` on the metallic side,
/// exponential decay on the localized side, C^1 at the crossing.
pub fn covariance_branch_master(x: f64) -> f64 {
    if x < 0.0 {
        1.0 - x
    } else {
        (-x).exp()
    }
}
