//! Fully-periodic Floquet fibers and the unperturbed band structure.
//!
//! For a `Z^D`-periodic graph the Laplacian decomposes over the Brillouin
//! torus into `nu x nu` fiber matrices: the diagonal carries vertex degrees,
//! and each oriented edge `(v, u)` with index `tau` subtracts
//! `e^{i <tau, q>}` from the `(v, u)` entry. Eigenvalue branches swept over
//! the torus give the unperturbed bands, their global maximum `rho`, and the
//! per-theta essential-spectrum intervals `[m_-(theta), m_+(theta)]` used by
//! every guided-band enclosure.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen;
use crate::error::{Error, Result};
use crate::graph::PeriodicGraphSpec;
use crate::tolerances as tol;

/// A point of the Brillouin torus, split into the guide-periodic part
/// `theta` (length `d`) and the transverse part `phi` (length `D - d`).
/// Components are taken in `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quasimomentum {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Quasimomentum {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Self {
        Quasimomentum { theta, phi }
    }

    /// The full torus point `(theta, phi)` as one vector of length `D`.
    pub fn concat(&self) -> Vec<f64> {
        let mut out = self.theta.clone();
        out.extend_from_slice(&self.phi);
        out
    }
}

/// A dense matrix certified conjugate-symmetric at construction.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    mat: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Wrap a matrix, verifying squareness, finiteness, and Hermiticity.
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Solver(format!(
                "matrix is {}x{}, expected square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut worst = 0.0f64;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                let a = mat[(i, j)];
                let b = mat[(j, i)];
                if !a.re.is_finite() || !a.im.is_finite() {
                    return Err(Error::Solver(format!("matrix entry ({i}, {j}) is not finite")));
                }
                worst = worst.max((a - b.conj()).norm());
            }
        }
        if worst > tol::HERMITICITY {
            return Err(Error::Solver(format!(
                "matrix is not Hermitian: max |A - A*| = {worst:e}"
            )));
        }
        Ok(HermitianMatrix { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigen::hermitian_eigenvalues(&self.mat)
    }

    /// Eigenvalues (ascending) with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        eigen::hermitian_eigen(&self.mat)
    }
}

/// One spectral band.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub flat: bool,
    pub multiplicity: usize,
}

impl Band {
    pub fn new(lo: f64, hi: f64, multiplicity: usize) -> Self {
        Band { lo, hi, flat: hi - lo < tol::FLAT_BAND, multiplicity }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// An ordered list of bands (sorted by lower endpoint).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandSet {
    pub bands: Vec<Band>,
}

impl BandSet {
    /// Sort by lower endpoint and merge overlapping or touching intervals;
    /// merged bands accumulate multiplicity.
    pub fn merged(mut bands: Vec<Band>) -> Self {
        bands.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut out: Vec<Band> = Vec::new();
        for b in bands {
            match out.last_mut() {
                Some(last) if b.lo <= last.hi => {
                    last.hi = last.hi.max(b.hi);
                    last.multiplicity += b.multiplicity;
                    last.flat = last.hi - last.lo < tol::FLAT_BAND;
                }
                _ => out.push(b),
            }
        }
        BandSet { bands: out }
    }

    /// Keep the given band order (already sorted by the caller's convention).
    pub fn from_sorted(bands: Vec<Band>) -> Self {
        BandSet { bands }
    }

    /// Distance from `x` to the union of the bands (0 if inside).
    pub fn distance(&self, x: f64) -> f64 {
        let mut best = f64::INFINITY;
        for b in &self.bands {
            let d = if x < b.lo {
                b.lo - x
            } else if x > b.hi {
                x - b.hi
            } else {
                0.0
            };
            best = best.min(d);
        }
        best
    }

    pub fn min(&self) -> Option<f64> {
        self.bands.first().map(|b| b.lo)
    }

    pub fn max(&self) -> Option<f64> {
        self.bands.iter().map(|b| b.hi).fold(None, |acc, hi| {
            Some(acc.map_or(hi, |a: f64| a.max(hi)))
        })
    }
}

/// Uniform torus grid in `(-pi, pi]` containing both `0` and `pi`. An odd
/// request is rounded up to the next even count so that `0` stays on the
/// grid.
pub fn torus_grid(n: usize) -> Vec<f64> {
    let n = if n < 2 { 2 } else { n + n % 2 };
    (1..=n)
        .map(|j| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / n as f64)
        .collect()
}

/// Symmetric inclusive grid on `[-pi, pi]` with `n >= 2` points; odd `n`
/// places a point exactly at `0`.
pub fn symmetric_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|j| {
            -std::f64::consts::PI
                + 2.0 * std::f64::consts::PI * j as f64 / (n - 1) as f64
        })
        .collect()
}

/// All points of the `dims`-fold product grid, lexicographic.
pub fn grid_product(pts: &[f64], dims: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dims {
        let mut next = Vec::with_capacity(out.len() * pts.len());
        for prefix in &out {
            for &p in pts {
                let mut q = prefix.clone();
                q.push(p);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Assemble the fiber matrix of the unperturbed Laplacian at a full torus
/// point. Panics if the quasimomentum length differs from `dim_total`; the
/// spec is assumed validated.
pub fn assemble_full_fiber(spec: &PeriodicGraphSpec, q: &Quasimomentum) -> HermitianMatrix {
    let point = q.concat();
    assert_eq!(
        point.len(),
        spec.dim_total,
        "quasimomentum length must equal dim_total"
    );
    let n = spec.nu();
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for e in &spec.edges {
        let m = e.multiplicity as f64;
        let angle: f64 = e.index.iter().zip(&point).map(|(&t, &x)| t as f64 * x).sum();
        let phase = Complex64::new(angle.cos(), angle.sin()) * m;
        mat[(e.u, e.u)] += Complex64::new(m, 0.0);
        mat[(e.v, e.v)] += Complex64::new(m, 0.0);
        mat[(e.u, e.v)] -= phase;
        mat[(e.v, e.u)] -= phase.conj();
    }
    HermitianMatrix::new(mat).expect("fiber assembly is Hermitian by construction")
}

/// Band structure of the unperturbed operator: per-branch intervals over a
/// full-torus grid, and the spectral supremum `rho`.
pub fn unperturbed_bands(spec: &PeriodicGraphSpec, grid_points_per_dim: usize) -> (BandSet, f64) {
    let pts = torus_grid(grid_points_per_dim);
    let grid = grid_product(&pts, spec.dim_total);
    let n = spec.nu();
    let per_point: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|point| {
            let q = Quasimomentum::new(point.clone(), Vec::new());
            assemble_full_fiber(spec, &q).eigenvalues()
        })
        .collect();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for vals in &per_point {
        for (k, &v) in vals.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let bands: Vec<Band> = (0..n).map(|k| Band::new(lo[k], hi[k], 1)).collect();
    let rho = hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (BandSet::from_sorted(bands), rho)
}

/// Essential-spectrum intervals of the fiber at fixed `theta`: the branches
/// of `Delta0(theta, .)` swept over the transverse torus, overlapping
/// intervals merged. Returns `(intervals, m_minus, m_plus)`.
pub fn essential_spectrum_at(
    spec: &PeriodicGraphSpec,
    theta: &[f64],
    phi_grid: usize,
) -> (BandSet, f64, f64) {
    let trans_dim = spec
        .dim_total
        .checked_sub(theta.len())
        .expect("theta length must not exceed dim_total");
    let pts = torus_grid(phi_grid);
    let grid = grid_product(&pts, trans_dim);
    let n = spec.nu();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for phi in &grid {
        let q = Quasimomentum::new(theta.to_vec(), phi.clone());
        let vals = assemble_full_fiber(spec, &q).eigenvalues();
        for (k, &v) in vals.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let bands = BandSet::merged((0..n).map(|k| Band::new(lo[k], hi[k], 1)).collect());
    let m_minus = bands.min().unwrap_or(f64::INFINITY);
    let m_plus = bands.max().unwrap_or(f64::NEG_INFINITY);
    (bands, m_minus, m_plus)
}
