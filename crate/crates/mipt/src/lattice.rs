//! Hypercubic lattice geometry, tight-binding spectrum and the plane-wave
//! eigenbasis.
//!
//! Conventions used everywhere in the crate:
//!
//! * sites and momenta are `d`-tuples in `[0, L)^d`, linearized row-major
//!   (last component fastest): `index = (((m_0 * L) + m_1) * L + ...)`;
//! * momenta are `k_i = 2*pi*m_i / L` with `m_i` in `{0, ..., L-1}`;
//! * eigenmodes are sorted by energy, ties broken by the lexicographic order
//!   of the momentum tuple, so "the N_p lowest modes" is deterministic even
//!   on degenerate shells.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Geometry and energy scale of the periodic hypercubic lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    /// Spatial dimension (>= 1).
    pub d: usize,
    /// Linear size per axis (>= 2).
    pub l: usize,
    /// Hopping energy; sets the units.
    pub j: f64,
}

impl LatticeSpec {
    pub fn new(d: usize, l: usize, j: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::Config("dimension d must be >= 1".into()));
        }
        if l < 2 {
            return Err(Error::Config("linear size L must be >= 2".into()));
        }
        if !(j > 0.0) {
            return Err(Error::Config("hopping J must be > 0".into()));
        }
        let mut n: usize = 1;
        for _ in 0..d {
            n = n
                .checked_mul(l)
                .ok_or_else(|| Error::Config(format!("L^d overflows: L = {l}, d = {d}")))?;
        }
        Ok(Self { d, l, j })
    }

    /// Total number of sites `N = L^d`.
    pub fn n_sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Row-major linearization of a coordinate tuple.
    pub fn site_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let mut idx = 0;
        for &c in coords {
            debug_assert!(c < self.l);
            idx = idx * self.l + c;
        }
        idx
    }

    /// Inverse of [`site_index`](Self::site_index).
    pub fn site_coords(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.d];
        for c in coords.iter_mut().rev() {
            *c = index % self.l;
            index /= self.l;
        }
        coords
    }

    /// Periodic displacement `b - a`, each component folded into `[0, L)`.
    pub fn displacement_index(&self, a: usize, b: usize) -> usize {
        let ca = self.site_coords(a);
        let cb = self.site_coords(b);
        let mut idx = 0;
        for (x, y) in ca.iter().zip(&cb) {
            idx = idx * self.l + (y + self.l - x) % self.l;
        }
        idx
    }

    /// Neighbor of `site` shifted by +1 along `axis` (periodic).
    pub fn neighbor(&self, site: usize, axis: usize) -> usize {
        let mut coords = self.site_coords(site);
        coords[axis] = (coords[axis] + 1) % self.l;
        self.site_index(&coords)
    }

    /// Root-mean-square group velocity over the Brillouin zone and the
    /// per-direction velocity entering the effective theory:
    /// `v = sqrt(2d) J`, `v0 = v / sqrt(d) = sqrt(2) J`.
    pub fn velocity_scales(&self) -> (f64, f64) {
        let v = (2.0 * self.d as f64).sqrt() * self.j;
        (v, v / (self.d as f64).sqrt())
    }
}

/// Tight-binding energy of a commensurate momentum tuple:
/// `-2J * sum_i cos(k_i)`.
///
/// Rejects momenta that are not `2*pi*m/L` within 1e-9.
pub fn dispersion(spec: &LatticeSpec, k: &[f64]) -> Result<f64> {
    if k.len() != spec.d {
        return Err(Error::Config(format!(
            "momentum has {} components, lattice is {}-dimensional",
            k.len(),
            spec.d
        )));
    }
    for &ki in k {
        let m = ki * spec.l as f64 / (2.0 * PI);
        if (m - m.round()).abs() > 1e-9 {
            return Err(Error::IncommensurateMomentum {
                value: ki,
                l: spec.l,
            });
        }
    }
    Ok(-2.0 * spec.j * k.iter().map(|ki| ki.cos()).sum::<f64>())
}

/// Diagonalized tight-binding Hamiltonian: mode energies plus the unitary
/// `V` mapping the eigenbasis to the coordinate basis, `V[alpha, x]`.
///
/// Column `x` of `V` is the amplitude vector of site `x` over the modes; it
/// is the `v` entering Born probabilities and measurement updates. A
/// site-major copy of the same matrix is kept so those columns are
/// contiguous in memory.
#[derive(Debug)]
pub struct Spectrum {
    pub lattice: LatticeSpec,
    /// Mode energies, ascending (ties by momentum-tuple order).
    pub energies: Vec<f64>,
    /// Momentum tuple of each mode, same order as `energies`.
    pub momenta: Vec<Vec<usize>>,
    /// `V[alpha, x] = N^{-1/2} exp(i k_alpha . x)`, mode-major.
    pub basis: Array2<C64>,
    /// Transpose of `basis`, site-major: row `x` is `v_alpha = V[alpha, x]`.
    site_major: Array2<C64>,
}

impl Spectrum {
    /// Same basis with every mode energy negated (test helper for
    /// time-reversal checks).
    #[doc(hidden)]
    pub fn negated_energies(&self) -> Arc<Spectrum> {
        Arc::new(Spectrum {
            lattice: self.lattice,
            energies: self.energies.iter().map(|e| -e).collect(),
            momenta: self.momenta.clone(),
            basis: self.basis.clone(),
            site_major: self.site_major.clone(),
        })
    }

    /// Contiguous eigenbasis amplitudes of site `x`.
    pub fn site_vector(&self, x: usize) -> &[C64] {
        self.site_major
            .row(x)
            .to_slice()
            .expect("site_major is row-major contiguous")
    }

    pub fn n_sites(&self) -> usize {
        self.energies.len()
    }
}

/// Build the plane-wave eigenbasis of the hopping Hamiltonian.
pub fn build_spectrum(spec: &LatticeSpec) -> Arc<Spectrum> {
    let n = spec.n_sites();
    let l = spec.l;
    // Shared cosine table so equal-|cos| shells are degenerate bit-for-bit
    // whenever the table entries are.
    let cos_table: Vec<f64> = (0..l).map(|m| (2.0 * PI * m as f64 / l as f64).cos()).collect();

    let mut modes: Vec<(f64, Vec<usize>)> = (0..n)
        .map(|idx| {
            let m = spec.site_coords(idx);
            let e = -2.0 * spec.j * m.iter().map(|&mi| cos_table[mi]).sum::<f64>();
            (e, m)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let norm = 1.0 / (n as f64).sqrt();
    let mut basis = Array2::<C64>::zeros((n, n));
    for (alpha, (_, m)) in modes.iter().enumerate() {
        // phase(x) = sum_i k_i x_i built axis by axis
        let mut row = basis.row_mut(alpha);
        let row = row.as_slice_mut().unwrap();
        for (x, entry) in row.iter_mut().enumerate() {
            let coords = spec.site_coords(x);
            let phase: f64 = m
                .iter()
                .zip(&coords)
                .map(|(&mi, &xi)| 2.0 * PI * (mi * xi) as f64 / l as f64)
                .sum();
            *entry = C64::new(phase.cos(), phase.sin()) * norm;
        }
    }

    let site_major = basis.t().to_owned().as_standard_layout().to_owned();
    let (energies, momenta) = modes.into_iter().unzip();
    Arc::new(Spectrum {
        lattice: *spec,
        energies,
        momenta,
        basis,
        site_major,
    })
}
