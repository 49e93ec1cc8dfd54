//! Large-multiplicity asymptotics: first-order band positions as guide
//! edge multiplicities are scaled by `t -> infinity`.
//!
//! For a simple positive guide eigenvalue `zeta_j` with unit eigenvector
//! `f_j`, the j-th guided band satisfies
//! `lambda_j(theta, t) = t zeta_j + W_j(theta) + O(1/t)` with
//!
//! ```text
//! W_j(theta) = sum_{v in V01} kappa0_v f_j(v)^2
//!            - sum_{host edges joining two contact rows} m cos<tau_long, theta> f_j(u) f_j(v),
//! ```
//!
//! the sum running over oriented host edges whose endpoint rows are both
//! attached. Bridges (nonzero longitudinal index) contribute oscillating
//! cosines; host edges with zero longitudinal index joining two distinct
//! contact rows degenerate to constant couplings and are kept, since the
//! first-order term is the full quadratic form of the host operator on the
//! embedded eigenvector. Eigenvectors vanishing on the contact set give
//! `W_j = 0`: the band collapses to the flat point `{t zeta_j}`.

use nalgebra::DVector;
use std::collections::BTreeMap;

use crate::cylinder::{guide_laplacian, CylinderWindow};
use crate::error::{Error, Result};
use crate::floquet::symmetric_grid;
use crate::graph::{split_index, GuideSpec, PeriodicGraphSpec};
use crate::guided::{guided_spectrum, Certificate};
use crate::numerics::golden_max;
use crate::tolerances as tol;

/// Grid density per dimension for the extrema search.
const EXTREMA_GRID: usize = 401;

/// First-order profile of one guided band.
#[derive(Debug, Clone)]
pub struct AsymptoticProfile {
    /// 1-based index into the descending positive guide eigenvalues.
    pub j: usize,
    pub zeta: f64,
    /// Unit eigenvector on the guide vertex set.
    pub vector: DVector<f64>,
    /// Constant part of W (contact degrees plus zero-index couplings).
    pub constant: f64,
    /// Oscillating part: coefficient of `cos<tau, theta>` per canonical
    /// longitudinal index `tau`.
    pub cosines: Vec<(Vec<i64>, f64)>,
    pub w_minus: f64,
    pub w_plus: f64,
    /// True when the eigenvector vanishes on the contact set.
    pub flat: bool,
}

impl AsymptoticProfile {
    /// Evaluate `W_j` at one quasimomentum.
    pub fn w(&self, theta: &[f64]) -> f64 {
        let mut out = self.constant;
        for (tau, coeff) in &self.cosines {
            let phase: f64 = tau
                .iter()
                .zip(theta)
                .map(|(&t, &th)| t as f64 * th)
                .sum();
            out += coeff * phase.cos();
        }
        out
    }

    /// Band-width scale `W_j^* = W_j^+ - W_j^-`.
    pub fn w_dot(&self) -> f64 {
        self.w_plus - self.w_minus
    }
}

/// Flip the sign of `tau` so its first nonzero entry is positive; cosine
/// terms are even in `tau`, so this canonical form merges reversals.
fn canonical_tau(tau: &[i64]) -> Vec<i64> {
    match tau.iter().find(|&&t| t != 0) {
        Some(&t) if t < 0 => tau.iter().map(|x| -x).collect(),
        _ => tau.to_vec(),
    }
}

/// Grid-then-golden extremum search over the torus `[-pi, pi]^d`.
/// Returns (min, max) of the cosine sum to about 1e-8.
fn w_extrema(profile: &AsymptoticProfile, d: usize) -> (f64, f64) {
    if profile.cosines.is_empty() {
        return (profile.constant, profile.constant);
    }
    let pts = symmetric_grid(EXTREMA_GRID);
    let mut grid_best: [(Vec<f64>, f64); 2] = [
        (vec![0.0; d], f64::INFINITY),
        (vec![0.0; d], f64::NEG_INFINITY),
    ];
    let mut counter = vec![0usize; d];
    loop {
        let theta: Vec<f64> = counter.iter().map(|&i| pts[i]).collect();
        let v = profile.w(&theta);
        if v < grid_best[0].1 {
            grid_best[0] = (theta.clone(), v);
        }
        if v > grid_best[1].1 {
            grid_best[1] = (theta, v);
        }
        let mut k = 0;
        while k < d {
            counter[k] += 1;
            if counter[k] < pts.len() {
                break;
            }
            counter[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    // Coordinate-wise golden refinement around each grid winner.
    let step = 2.0 * std::f64::consts::PI / (EXTREMA_GRID - 1) as f64;
    let mut out = [0.0f64; 2];
    for (which, (start, val)) in grid_best.iter().enumerate() {
        let maximize = which == 1;
        let mut point = start.clone();
        let mut best = *val;
        for _ in 0..3 {
            for axis in 0..d {
                let eval = |x: f64| {
                    let mut th = point.clone();
                    th[axis] = x;
                    let v = profile.w(&th);
                    Some(if maximize { v } else { -v })
                };
                let (x, v) =
                    golden_max(eval, point[axis] - step, point[axis] + step, 1e-10, 120);
                if let Some(v) = v {
                    let v = if maximize { v } else { -v };
                    let better = if maximize { v > best } else { v < best };
                    if better {
                        best = v;
                        point[axis] = x;
                    }
                }
            }
        }
        out[which] = best;
    }
    (out[0], out[1])
}

/// Build the first-order profile for the j-th (1-based, descending)
/// positive guide eigenvalue. Degenerate eigenvalues are refused: the
/// first-order term is basis-dependent there.
pub fn wj_function(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    j: usize,
) -> Result<AsymptoticProfile> {
    let gl = guide_laplacian(guide);
    let p = gl.p();
    if j == 0 || j > p {
        return Err(Error::Validation(format!(
            "band index {j} out of range: the guide has {p} positive eigenvalues"
        )));
    }
    let zeta = gl.zeta[j - 1];
    let n = guide.nu1();
    let col = n - j; // ascending eigenvalue index for the j-th descending
    let scale = zeta.abs().max(1.0);
    let degenerate = [col.checked_sub(1), Some(col + 1)]
        .into_iter()
        .flatten()
        .filter(|&k| k < n)
        .any(|k| k != col && (gl.eigenvalues[k] - zeta).abs() < 1e-8 * scale);
    if degenerate {
        return Err(Error::Degenerate(format!(
            "guide eigenvalue zeta_{j} = {zeta:.9} is degenerate; the first-order \
             band profile is only defined for simple eigenvalues"
        )));
    }
    let mut vector = gl.eigenvectors.column(col).into_owned();
    vector /= vector.norm();

    let d = guide.dim_guide;
    let host_deg = spec.degrees();
    // (lattice vertex, transverse offset) -> contact guide vertex.
    let attached: BTreeMap<(usize, Vec<i64>), usize> = guide
        .attachments
        .iter()
        .map(|a| ((a.lattice_vertex, a.transverse_offset.clone()), a.guide_vertex))
        .collect();

    let mut constant = 0.0;
    let mut restriction_norm = 0.0f64;
    for a in &guide.attachments {
        let f = vector[a.guide_vertex];
        restriction_norm += f * f;
        constant += host_deg[a.lattice_vertex] as f64 * f * f;
    }
    let flat = restriction_norm.sqrt() < tol::EIGENVECTOR_RESIDUAL;

    let mut cosines: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for e in spec.oriented_edges() {
        let (long, trans) = split_index(&e.index, d);
        for a in &guide.attachments {
            if a.lattice_vertex != e.from {
                continue;
            }
            let target: Vec<i64> = a
                .transverse_offset
                .iter()
                .zip(&trans)
                .map(|(o, t)| o + t)
                .collect();
            let Some(&g2) = attached.get(&(e.to, target)) else {
                continue;
            };
            let term = -(e.multiplicity as f64) * vector[a.guide_vertex] * vector[g2];
            if long.iter().all(|&t| t == 0) {
                constant += term; // cos(0) = 1
            } else {
                *cosines.entry(canonical_tau(&long)).or_insert(0.0) += term;
            }
        }
    }
    let cosines: Vec<(Vec<i64>, f64)> = cosines
        .into_iter()
        .filter(|(_, c)| c.abs() > 1e-15)
        .collect();

    let mut profile = AsymptoticProfile {
        j,
        zeta,
        vector,
        constant,
        cosines,
        w_minus: 0.0,
        w_plus: 0.0,
        flat,
    };
    let (lo, hi) = w_extrema(&profile, d);
    profile.w_minus = lo;
    profile.w_plus = hi;
    Ok(profile)
}

/// Predicted edges of band j at multiplicity scale `t`: the interval
/// `[t zeta_j + W^-, t zeta_j + W^+]`, or the point `{t zeta_j}` for flat
/// profiles.
pub fn predicted_band_edges(profile: &AsymptoticProfile, t: u64) -> (f64, f64) {
    let base = t as f64 * profile.zeta;
    if profile.flat {
        (base, base)
    } else {
        (base + profile.w_minus, base + profile.w_plus)
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub t: u64,
    pub measured: (f64, f64),
    pub predicted: (f64, f64),
    pub residual: (f64, f64),
    pub width: f64,
}

/// Measured vs predicted edges over a multiplicity ladder, with fitted
/// log-log decay exponents of the residuals (expected near -1).
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub j: usize,
    pub zeta: f64,
    pub w_minus: f64,
    pub w_plus: f64,
    pub flat: bool,
    pub rows: Vec<ConvergenceRow>,
    pub lo_slope: Option<f64>,
    pub hi_slope: Option<f64>,
}

/// Least-squares slope of ln(res) against ln(t); None when every residual
/// is below resolution (the flat case).
fn fitted_slope(ts: &[u64], residuals: &[f64]) -> Option<f64> {
    if residuals.iter().all(|&r| r < 1e-10) {
        return None;
    }
    let xs: Vec<f64> = ts.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|&r| r.max(1e-12).ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Run the sweep solver at each multiplicity in `t_list` (guide edges
/// scaled by t, host untouched) and compare band j against the first-order
/// prediction.
pub fn convergence_study(
    spec: &PeriodicGraphSpec,
    guide: &GuideSpec,
    j: usize,
    t_list: &[u64],
    grid: usize,
    window: CylinderWindow,
) -> Result<ConvergenceReport> {
    if t_list.len() < 2 || t_list.windows(2).any(|w| w[0] >= w[1]) || t_list[0] < 1 {
        return Err(Error::Validation(
            "t_list must be ascending with at least two entries, all >= 1".into(),
        ));
    }
    let profile = wj_function(spec, guide, j)?;
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let scaled = guide.scaled(t);
        let spectrum = guided_spectrum(spec, &scaled, grid, window)?;
        let band = spectrum.branch_bands.get(j - 1).ok_or_else(|| {
            Error::Solver(format!(
                "band {j} not traced at t = {t}: only {} bands found",
                spectrum.branch_bands.len()
            ))
        })?;
        let measured = (band.lo, band.hi);
        let predicted = predicted_band_edges(&profile, t);
        rows.push(ConvergenceRow {
            t,
            measured,
            predicted,
            residual: (
                (measured.0 - predicted.0).abs(),
                (measured.1 - predicted.1).abs(),
            ),
            width: band.width(),
        });
    }
    let lo_res: Vec<f64> = rows.iter().map(|r| r.residual.0).collect();
    let hi_res: Vec<f64> = rows.iter().map(|r| r.residual.1).collect();
    Ok(ConvergenceReport {
        j,
        zeta: profile.zeta,
        w_minus: profile.w_minus,
        w_plus: profile.w_plus,
        flat: profile.flat,
        rows,
        lo_slope: fitted_slope(t_list, &lo_res),
        hi_slope: fitted_slope(t_list, &hi_res),
    })
}

/// Classical degree bounds on the extreme positive eigenvalues of each
/// guide component: with component order n and degrees kappa,
///
/// ```text
/// n/(n-1) max kappa <= zeta_1 <= max_{u~v} (kappa_u + kappa_v)
/// min_{u~v} (kappa_u + kappa_v) - (n-2) <= zeta_min <= n/(n-1) min kappa
/// ```
///
/// Every inequality is evaluated with its margin; failures are reported,
/// not raised (the zeta_min lower bound fails already on paths and stars).
pub fn guide_eigenvalue_bounds(guide: &GuideSpec) -> Vec<Certificate> {
    let gl = guide_laplacian(guide);
    let comp = guide.components();
    let mut certs = Vec::new();
    for c in 0..guide.component_count() {
        let members: Vec<usize> = (0..guide.nu1()).filter(|&v| comp[v] == c).collect();
        let n = members.len();
        if n < 2 {
            continue; // no positive eigenvalues to bound
        }
        let mut block = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, &vi) in members.iter().enumerate() {
            for (j, &vj) in members.iter().enumerate() {
                block[(i, j)] = gl.matrix[(vi, vj)];
            }
        }
        let evals = crate::eigen::symmetric_eigenvalues(&block);
        let zeta_top = evals[n - 1];
        let zeta_min = evals[1]; // one kernel vector per connected component
        let kappa: Vec<f64> = (0..n).map(|i| block[(i, i)]).collect();
        let kappa_max = kappa.iter().copied().fold(f64::MIN, f64::max);
        let kappa_min = kappa.iter().copied().fold(f64::MAX, f64::min);
        let mut adj_sum_max = f64::MIN;
        let mut adj_sum_min = f64::MAX;
        for e in &guide.edges {
            if e.u == e.v || comp[e.u] != c {
                continue;
            }
            let (iu, iv) = (
                members.iter().position(|&m| m == e.u).unwrap(),
                members.iter().position(|&m| m == e.v).unwrap(),
            );
            let s = kappa[iu] + kappa[iv];
            adj_sum_max = adj_sum_max.max(s);
            adj_sum_min = adj_sum_min.min(s);
        }
        let ratio = n as f64 / (n as f64 - 1.0);
        let checks = [
            (
                format!("component {c} zeta_1 lower bound"),
                zeta_top - ratio * kappa_max,
                format!("{:.9} <= zeta_1 = {zeta_top:.9}", ratio * kappa_max),
            ),
            (
                format!("component {c} zeta_1 upper bound"),
                adj_sum_max - zeta_top,
                format!("zeta_1 = {zeta_top:.9} <= {adj_sum_max:.9}"),
            ),
            (
                format!("component {c} zeta_min lower bound"),
                zeta_min - (adj_sum_min - (n as f64 - 2.0)),
                format!(
                    "{:.9} <= zeta_min = {zeta_min:.9}",
                    adj_sum_min - (n as f64 - 2.0)
                ),
            ),
            (
                format!("component {c} zeta_min upper bound"),
                ratio * kappa_min - zeta_min,
                format!("zeta_min = {zeta_min:.9} <= {:.9}", ratio * kappa_min),
            ),
        ];
        for (name, margin, detail) in checks {
            certs.push(Certificate {
                name,
                passed: margin >= -1e-9,
                margin,
                detail,
            });
        }
    }
    certs
}
