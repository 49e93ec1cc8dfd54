//! Finite truncations of the perturbed fiber Laplacian on the cylinder.
//!
//! Fixing the guide-periodic quasimomentum `theta` leaves an operator on the
//! cylinder: host vertices carry a transverse cell in `Z^{D-d}`, guide
//! vertices are glued on top, attached ones identified with their host
//! images. This module builds dense finite sections over a symmetric window
//! of transverse cells, the guide Laplacian with its Dirichlet part, and the
//! bridge-deleted operator whose spectral data bracket the guided bands from
//! below.
//!
//! Entry rule everywhere: the diagonal carries the full degree in the
//! perturbed cylinder, each oriented edge `(v, u)` subtracts
//! `multiplicity * e^{i <tau_long, theta>}` from `(v, u)`, and the
//! transverse index part shifts the cell. Under a Dirichlet boundary,
//! off-diagonal terms leaving the window are dropped while the diagonal
//! keeps the full degree, so the diagonal is window-independent.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::eigen;
use crate::error::{Error, Result};
use crate::floquet::{grid_product, torus_grid, HermitianMatrix};
use crate::graph::{split_index, GuideSpec, PeriodicGraphSpec};
use crate::tolerances as tol;

/// Transverse boundary condition of the truncation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Edges leaving the window are dropped (diagonal keeps full degree).
    Dirichlet,
    /// Transverse cells wrap modulo `2W + 1`.
    Periodic,
}

/// A truncation window: transverse cells range over `{-W..W}^{D-d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CylinderWindow {
    pub half_width: i64,
    pub boundary: Boundary,
}

impl CylinderWindow {
    pub fn periodic(half_width: i64) -> Self {
        CylinderWindow { half_width, boundary: Boundary::Periodic }
    }

    pub fn dirichlet(half_width: i64) -> Self {
        CylinderWindow { half_width, boundary: Boundary::Dirichlet }
    }
}

/// Row layout of a window: lattice rows first (cells lexicographic, quotient
/// vertices fastest), then non-attached guide vertices. Attached guide
/// vertices share the row of their lattice image.
#[derive(Debug, Clone)]
pub struct WindowMap {
    pub window: CylinderWindow,
    pub trans_dim: usize,
    nu: usize,
    cell_count: usize,
    /// Matrix row per guide vertex.
    pub guide_rows: Vec<usize>,
    /// Total matrix dimension.
    pub size: usize,
}

impl WindowMap {
    /// Rank of an in-window cell (lexicographic). `None` if outside.
    fn cell_rank(&self, cell: &[i64]) -> Option<usize> {
        let w = self.window.half_width;
        let width = (2 * w + 1) as usize;
        let mut r = 0usize;
        for &c in cell {
            if c.abs() > w {
                return None;
            }
            r = r * width + (c + w) as usize;
        }
        Some(r)
    }

    /// Row of a host vertex on a cell, applying the boundary rule. `None`
    /// means the edge is dropped (Dirichlet, outside the window).
    pub fn lattice_row(&self, vertex: usize, cell: &[i64]) -> Option<usize> {
        let w = self.window.half_width;
        let span = 2 * w + 1;
        match self.window.boundary {
            Boundary::Periodic => {
                let wrapped: Vec<i64> = cell
                    .iter()
                    .map(|&c| (c + w).rem_euclid(span) - w)
                    .collect();
                Some(self.cell_rank(&wrapped).expect("wrapped cell is in window") * self.nu + vertex)
            }
            Boundary::Dirichlet => self.cell_rank(cell).map(|r| r * self.nu + vertex),
        }
    }

    /// The cell of a lattice row; `None` for interior guide rows.
    pub fn cell_of_row(&self, row: usize) -> Option<Vec<i64>> {
        if row >= self.cell_count * self.nu {
            return None;
        }
        let w = self.window.half_width;
        let width = (2 * w + 1) as usize;
        let mut rank = row / self.nu;
        let mut cell = vec![0i64; self.trans_dim];
        for k in (0..self.trans_dim).rev() {
            cell[k] = (rank % width) as i64 - w;
            rank /= width;
        }
        Some(cell)
    }

    /// All in-window cells, lexicographic.
    pub fn cells(&self) -> Vec<Vec<i64>> {
        let w = self.window.half_width;
        let pts: Vec<i64> = (-w..=w).collect();
        let mut out: Vec<Vec<i64>> = vec![Vec::new()];
        for _ in 0..self.trans_dim {
            let mut next = Vec::with_capacity(out.len() * pts.len());
            for prefix in &out {
                for &p in &pts {
                    let mut q = prefix.clone();
                    q.push(p);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    /// Fraction of squared amplitude sitting on lattice rows whose cell lies
    /// in the outer shell of the window. Guide rows count as central.
    pub fn shell_mass(&self, squared_amplitudes: &[f64]) -> f64 {
        let w = self.window.half_width as f64;
        let cutoff = ((1.0 - tol::LOCALIZATION_SHELL_FRACTION) * w).floor();
        let mut shell = 0.0;
        let mut total = 0.0;
        for (row, &a) in squared_amplitudes.iter().enumerate() {
            total += a;
            if let Some(cell) = self.cell_of_row(row) {
                let dist = cell.iter().map(|c| c.abs()).max().unwrap_or(0) as f64;
                if dist > cutoff {
                    shell += a;
                }
            }
        }
        if total == 0.0 {
            return 0.0;
        }
        shell / total
    }

    /// True if the squared-amplitude profile passes the localization filter.
    pub fn localized(&self, squared_amplitudes: &[f64]) -> bool {
        self.shell_mass(squared_amplitudes) < tol::LOCALIZATION_SHELL_MASS
    }
}

/// Build the row layout for a spec, guide, and window, validating that the
/// window can hold every transverse edge index and attachment offset.
pub fn window_map(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    window: CylinderWindow,
) -> Result<WindowMap> {
    let d = guide.dim_guide;
    let trans_dim = spec.dim_total - d;
    let w = window.half_width;
    if w < 1 {
        return Err(Error::WindowTooSmall("half width must be at least 1".into()));
    }
    let mut needed = 0i64;
    for e in &spec.edges {
        let (_, trans) = split_index(&e.index, d);
        needed = needed.max(trans.iter().map(|t| t.abs()).max().unwrap_or(0));
    }
    if w < needed {
        return Err(Error::WindowTooSmall(format!(
            "half width {w} is smaller than the maximum transverse index magnitude {needed}"
        )));
    }
    for a in &guide.attachments {
        let off = a.transverse_offset.iter().map(|t| t.abs()).max().unwrap_or(0);
        if off > w {
            return Err(Error::WindowTooSmall(format!(
                "attachment of guide vertex \"{}\" sits on transverse cell {:?}, outside half width {w}",
                guide.vertices[a.guide_vertex], a.transverse_offset
            )));
        }
    }
    let nu = spec.nu();
    let cell_count = ((2 * w + 1) as usize).pow(trans_dim as u32);
    let mut map = WindowMap {
        window,
        trans_dim,
        nu,
        cell_count,
        guide_rows: Vec::new(),
        size: 0,
    };
    let mut next = cell_count * nu;
    let mut guide_rows = Vec::with_capacity(guide.nu1());
    for gv in 0..guide.nu1() {
        match guide.attachment_of(gv) {
            Some(a) => {
                let row = map
                    .lattice_row(a.lattice_vertex, &a.transverse_offset)
                    .expect("attachment offsets validated in window");
                guide_rows.push(row);
            }
            None => {
                guide_rows.push(next);
                next += 1;
            }
        }
    }
    map.guide_rows = guide_rows;
    map.size = next;
    Ok(map)
}

/// Which host edges an assembly keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeFilter {
    All,
    NonBridge,
    BridgeOnly,
}

fn assemble_host_part(
    spec: &PeriodicGraphSpec,
    d: usize,
    theta: &[f64],
    map: &WindowMap,
    filter: EdgeFilter,
    mat: &mut DMatrix<Complex64>,
) {
    let cells = map.cells();
    for e in &spec.edges {
        let (long, trans) = split_index(&e.index, d);
        let bridge = long.iter().any(|&t| t != 0);
        let keep = match filter {
            EdgeFilter::All => true,
            EdgeFilter::NonBridge => !bridge,
            EdgeFilter::BridgeOnly => bridge,
        };
        if !keep {
            continue;
        }
        let m = e.multiplicity as f64;
        let angle: f64 = long.iter().zip(theta).map(|(&t, &x)| t as f64 * x).sum();
        let phase = Complex64::new(angle.cos(), angle.sin()) * m;
        let neg_trans: Vec<i64> = trans.iter().map(|t| -t).collect();
        for cell in &cells {
            // Orientation (u, cell) -> (v, cell + trans), phase e^{+i<long, theta>}.
            let from = map.lattice_row(e.u, cell).expect("cell in window");
            mat[(from, from)] += Complex64::new(m, 0.0);
            let target: Vec<i64> = cell.iter().zip(&trans).map(|(c, t)| c + t).collect();
            if let Some(to) = map.lattice_row(e.v, &target) {
                mat[(from, to)] -= phase;
            }
            // Orientation (v, cell) -> (u, cell - trans), conjugate phase.
            let from = map.lattice_row(e.v, cell).expect("cell in window");
            mat[(from, from)] += Complex64::new(m, 0.0);
            let target: Vec<i64> = cell.iter().zip(&neg_trans).map(|(c, t)| c + t).collect();
            if let Some(to) = map.lattice_row(e.u, &target) {
                mat[(from, to)] -= phase.conj();
            }
        }
    }
}

fn add_guide_part(guide: &GuideSpec, map: &WindowMap, mat: &mut DMatrix<Complex64>) {
    for e in &guide.edges {
        let m = Complex64::new(e.multiplicity as f64, 0.0);
        let ru = map.guide_rows[e.u];
        let rv = map.guide_rows[e.v];
        mat[(ru, ru)] += m;
        mat[(rv, rv)] += m;
        mat[(ru, rv)] -= m;
        mat[(rv, ru)] -= m;
    }
}

/// Finite section of the perturbed fiber Laplacian at quasimomentum `theta`.
pub fn assemble_truncated_fiber(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    theta: &[f64],
    window: CylinderWindow,
) -> Result<HermitianMatrix> {
    if theta.len() != guide.dim_guide {
        return Err(Error::Validation(format!(
            "theta has length {}, expected dim_guide = {}",
            theta.len(),
            guide.dim_guide
        )));
    }
    let map = window_map(spec, guide, window)?;
    let mut mat = DMatrix::<Complex64>::zeros(map.size, map.size);
    assemble_host_part(spec, guide.dim_guide, theta, &map, EdgeFilter::All, &mut mat);
    add_guide_part(guide, &map, &mut mat);
    HermitianMatrix::new(mat)
}

/// Finite section of the unperturbed fiber Laplacian (no guide); the
/// longitudinal dimension is `theta.len()`.
pub fn assemble_truncated_unperturbed(
    spec: &PeriodicGraphSpec,
    theta: &[f64],
    window: CylinderWindow,
) -> Result<HermitianMatrix> {
    let guide = empty_guide(theta.len());
    let map = window_map(spec, &guide, window)?;
    let mut mat = DMatrix::<Complex64>::zeros(map.size, map.size);
    assemble_host_part(spec, theta.len(), theta, &map, EdgeFilter::All, &mut mat);
    HermitianMatrix::new(mat)
}

/// A guide with no vertices, used to reuse the window layout for
/// unperturbed assemblies.
pub fn empty_guide(dim_guide: usize) -> GuideSpec {
    GuideSpec {
        dim_guide,
        vertices: Vec::new(),
        edges: Vec::new(),
        attachments: Vec::new(),
    }
}

/// Finite section of the bridge-deleted operator: the graph Laplacian of
/// the cylinder with all bridges removed, so deleted bridges also leave the
/// diagonal. Independent of `theta`, real symmetric.
pub fn assemble_bridge_deleted(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    window: CylinderWindow,
) -> Result<HermitianMatrix> {
    let map = window_map(spec, guide, window)?;
    let zero_theta = vec![0.0; guide.dim_guide];
    let mut mat = DMatrix::<Complex64>::zeros(map.size, map.size);
    assemble_host_part(spec, guide.dim_guide, &zero_theta, &map, EdgeFilter::NonBridge, &mut mat);
    add_guide_part(guide, &map, &mut mat);
    HermitianMatrix::new(mat)
}

/// Finite section of the bridge part: the defect operator carrying every
/// bridge with its phase, diagonal equal to the bridge count `beta_v`.
/// The identity `Delta(theta) = Delta_gamma + Delta_beta(theta)` holds
/// entrywise against [`assemble_bridge_deleted`].
pub fn assemble_bridge_operator(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    theta: &[f64],
    window: CylinderWindow,
) -> Result<HermitianMatrix> {
    let map = window_map(spec, guide, window)?;
    let mut mat = DMatrix::<Complex64>::zeros(map.size, map.size);
    assemble_host_part(spec, guide.dim_guide, theta, &map, EdgeFilter::BridgeOnly, &mut mat);
    HermitianMatrix::new(mat)
}

/// The guide Laplacian over `V_1` with its Dirichlet block and spectral
/// data. Entry rule: `delta_{uv} kappa_v^1 - kappa_{uv}` with
/// multiplicities.
#[derive(Debug, Clone)]
pub struct GuideLaplacian {
    /// Laplacian over the guide vertex set, guide vertex order.
    pub matrix: DMatrix<f64>,
    /// Dirichlet block over non-attached guide vertices.
    pub dirichlet: DMatrix<f64>,
    /// Positive eigenvalues, descending: `zeta_1 >= ... >= zeta_p`.
    pub zeta: Vec<f64>,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvector columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// Number of connected components `c` of the guide graph.
    pub components: usize,
    /// Guide-vertex indices of the contact set, guide vertex order.
    pub contact: Vec<usize>,
    /// Guide-vertex indices of the Dirichlet block rows, guide vertex order.
    pub interior: Vec<usize>,
}

impl GuideLaplacian {
    /// `p = nu_1 - c`: the number of positive eigenvalues.
    pub fn p(&self) -> usize {
        self.zeta.len()
    }
}

/// Assemble the guide Laplacian and its spectral data.
pub fn guide_laplacian(guide: &GuideSpec) -> GuideLaplacian {
    let n = guide.nu1();
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for e in &guide.edges {
        let m = e.multiplicity as f64;
        mat[(e.u, e.u)] += m;
        mat[(e.v, e.v)] += m;
        mat[(e.u, e.v)] -= m;
        mat[(e.v, e.u)] -= m;
    }
    let contact = guide.contact_indices();
    let interior = guide.interior_indices();
    let mut dirichlet = DMatrix::<f64>::zeros(interior.len(), interior.len());
    for (i, &gi) in interior.iter().enumerate() {
        for (j, &gj) in interior.iter().enumerate() {
            dirichlet[(i, j)] = mat[(gi, gj)];
        }
    }
    let (eigenvalues, eigenvectors) = if n > 0 {
        eigen::symmetric_eigen(&mat)
    } else {
        (Vec::new(), DMatrix::zeros(0, 0))
    };
    let components = guide.component_count();
    // The kernel of a graph Laplacian has one constant vector per connected
    // component; everything above index c-1 is a positive eigenvalue.
    let zeta: Vec<f64> = eigenvalues[components..].iter().rev().copied().collect();
    GuideLaplacian {
        matrix: mat,
        dirichlet,
        zeta,
        eigenvalues,
        eigenvectors,
        components,
        contact,
        interior,
    }
}

/// Supremum of the essential spectrum of the bridge-deleted operator,
/// computed by a transverse Floquet sweep of the bridge-deleted host
/// cylinder (the finite guide does not shift the essential spectrum).
pub fn bridge_deleted_essential_sup(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    phi_grid: usize,
) -> f64 {
    let d = guide.dim_guide;
    let trans_dim = spec.dim_total - d;
    let pts = torus_grid(phi_grid);
    let grid = grid_product(&pts, trans_dim);
    let n = spec.nu();
    let mut sup = f64::NEG_INFINITY;
    for phi in &grid {
        let mut mat = DMatrix::<Complex64>::zeros(n, n);
        for e in &spec.edges {
            let (long, trans) = split_index(&e.index, d);
            if long.iter().any(|&t| t != 0) {
                continue;
            }
            let m = e.multiplicity as f64;
            let angle: f64 = trans.iter().zip(phi).map(|(&t, &x)| t as f64 * x).sum();
            let phase = Complex64::new(angle.cos(), angle.sin()) * m;
            mat[(e.u, e.u)] += Complex64::new(m, 0.0);
            mat[(e.v, e.v)] += Complex64::new(m, 0.0);
            mat[(e.u, e.v)] -= phase;
            mat[(e.v, e.u)] -= phase.conj();
        }
        let top = eigen::hermitian_eigenvalues(&mat)
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY);
        sup = sup.max(top);
    }
    sup
}

/// The bracketing values `mu_j = max(mu~_j, sup ess)` for `j = 1..count`:
/// `mu~_j` is the j-th descending eigenvalue of the truncated bridge-deleted
/// operator whose eigenvector passes the localization filter, and the
/// essential supremum comes from the transverse Floquet sweep.
pub fn mu_values(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    window: CylinderWindow,
    count: usize,
) -> Result<Vec<f64>> {
    if window.half_width < 5 {
        return Err(Error::WindowTooSmall(
            "localization filter needs a half width of at least 5".into(),
        ));
    }
    let map = window_map(spec, guide, window)?;
    let sup_ess = bridge_deleted_essential_sup(spec, guide, 256);
    let bd = assemble_bridge_deleted(spec, guide, window)?;
    let (vals, vecs) = bd.eigen();
    let mut accepted = Vec::with_capacity(count);
    for k in (0..vals.len()).rev() {
        if accepted.len() == count {
            break;
        }
        // Only values strictly above the essential supremum can be discrete
        // on the infinite cylinder; the rest are covered by sup_ess anyway.
        if vals[k] <= sup_ess {
            break;
        }
        let amps: Vec<f64> = vecs.column(k).iter().map(|z| z.norm_sqr()).collect();
        if map.localized(&amps) {
            accepted.push(vals[k]);
        }
    }
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let mu_tilde = accepted.get(j).copied().unwrap_or(f64::NEG_INFINITY);
        out.push(mu_tilde.max(sup_ess));
    }
    Ok(out)
}
