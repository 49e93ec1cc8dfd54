//! Periodic graphs with guides: the combinatorial data model.
//!
//! A `Z^D`-periodic graph is described by its finite quotient: a vertex list
//! and a list of edges, each carrying an integer *index* `tau` in `Z^D` that
//! records which copy of the fundamental cell the edge lands in. The oriented
//! reversal of an edge with index `tau` carries `-tau` and is never listed
//! separately. A *guide* is a finite decoration repeated along the first
//! `d < D` coordinate directions and glued to the host along an attachment
//! list; attached guide vertices are identified with host cylinder vertices.
//!
//! Degrees count oriented edges leaving a vertex, so a loop contributes 2 and
//! an edge of multiplicity `m` contributes `m` to each endpoint.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Lattice translation in the period basis; length equals `dim_total`.
pub type IndexVector = Vec<i64>;

/// A vertex of the quotient graph. Coordinates are optional and expressed in
/// the period basis; they feed [`compute_edge_indices`] and play no role in
/// any spectral computation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientVertex {
    pub id: String,
    pub coords: Option<Vec<f64>>,
}

/// An edge class of the quotient graph. Endpoints are indices into the
/// spec's vertex list; `index` is the translation part, and the reversed
/// orientation (with index `-tau`) is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedEdge {
    pub u: usize,
    pub v: usize,
    pub index: IndexVector,
    pub multiplicity: u64,
}

/// A finite quotient description of a connected `Z^D`-periodic graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGraphSpec {
    pub dim_total: usize,
    pub vertices: Vec<QuotientVertex>,
    pub edges: Vec<IndexedEdge>,
}

/// An edge of the guide graph; endpoints index into the guide vertex list.
/// Guide edges carry no index: the guide lives inside one longitudinal cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuideEdge {
    pub u: usize,
    pub v: usize,
    pub multiplicity: u64,
}

/// Gluing datum: `guide_vertex` is identified with the host cylinder vertex
/// obtained from `lattice_vertex` shifted by `transverse_offset` (length
/// `D - d`) in the non-guide directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub guide_vertex: usize,
    pub lattice_vertex: usize,
    pub transverse_offset: Vec<i64>,
}

/// A finite guide decoration, repeated along the first `dim_guide`
/// coordinate directions of the host.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideSpec {
    pub dim_guide: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<GuideEdge>,
    pub attachments: Vec<Attachment>,
}

/// Bridge counts of the cylinder quotient. A cylinder edge is a bridge iff
/// its longitudinal index part is nonzero; `beta_01` counts oriented bridges
/// with both endpoints in the attachment set, so a non-loop bridge between
/// two attached vertices contributes twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeStats {
    pub beta_per_vertex: BTreeMap<String, u64>,
    pub beta_plus: u64,
    pub beta_01: u64,
}

/// One oriented edge of the quotient graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedEdge {
    pub from: usize,
    pub to: usize,
    pub index: IndexVector,
    pub multiplicity: u64,
}

impl PeriodicGraphSpec {
    /// Number of quotient vertices.
    pub fn nu(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Both orientations of every listed edge class. A loop yields two
    /// oriented loops with indices `tau` and `-tau`.
    pub fn oriented_edges(&self) -> Vec<OrientedEdge> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            out.push(OrientedEdge {
                from: e.u,
                to: e.v,
                index: e.index.clone(),
                multiplicity: e.multiplicity,
            });
            out.push(OrientedEdge {
                from: e.v,
                to: e.u,
                index: e.index.iter().map(|t| -t).collect(),
                multiplicity: e.multiplicity,
            });
        }
        out
    }

    /// Degree of each quotient vertex (oriented edges starting there).
    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.vertices.len()];
        for e in self.oriented_edges() {
            deg[e.from] += e.multiplicity;
        }
        deg
    }

    /// Maximum vertex degree of the unperturbed graph.
    pub fn kappa_plus(&self) -> u64 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Check all structural invariants. Error messages name the violated
    /// invariant.
    pub fn validate(&self) -> Result<()> {
        if self.dim_total == 0 {
            return Err(Error::Validation("dim_total must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.vertices {
            if !seen.insert(v.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate quotient vertex id \"{}\"",
                    v.id
                )));
            }
            if let Some(coords) = &v.coords {
                if coords.len() != self.dim_total {
                    return Err(Error::Validation(format!(
                        "coords of vertex \"{}\" have length {}, expected dim_total = {}",
                        v.id,
                        coords.len(),
                        self.dim_total
                    )));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Validation(format!(
                        "coords of vertex \"{}\" must be finite",
                        v.id
                    )));
                }
            }
        }
        if self.vertices.is_empty() {
            return Err(Error::Validation("at least one quotient vertex required".into()));
        }
        for e in &self.edges {
            if e.u >= self.vertices.len() || e.v >= self.vertices.len() {
                return Err(Error::Validation(
                    "quotient edge references unknown vertex".into(),
                ));
            }
            if e.index.len() != self.dim_total {
                return Err(Error::Validation(format!(
                    "edge index {:?} has length {}, expected dim_total = {}",
                    e.index,
                    e.index.len(),
                    self.dim_total
                )));
            }
            if e.multiplicity == 0 {
                return Err(Error::Validation("edge multiplicity must be >= 1".into()));
            }
        }
        // Duplicate edge classes (including a listed reversal) are rejected:
        // multiplicities must be stated on a single entry.
        for (i, a) in self.edges.iter().enumerate() {
            for b in self.edges.iter().skip(i + 1) {
                let same = a.u == b.u && a.v == b.v && a.index == b.index;
                let reversed = a.u == b.v
                    && a.v == b.u
                    && a.index.iter().zip(&b.index).all(|(s, t)| *s == -t);
                if same || reversed {
                    return Err(Error::Validation(format!(
                        "edge between vertices {} and {} with index {:?} is listed twice \
                         (reversed orientations are implicit; use multiplicity)",
                        self.vertices[a.u].id, self.vertices[a.v].id, a.index
                    )));
                }
            }
        }
        for (vi, d) in self.degrees().iter().enumerate() {
            if *d == 0 {
                return Err(Error::Validation(format!(
                    "vertex \"{}\" has degree 0; every vertex must have degree >= 1",
                    self.vertices[vi].id
                )));
            }
        }
        if !self.window_connected() {
            return Err(Error::Validation(
                "the generated periodic graph is not connected".into(),
            ));
        }
        Ok(())
    }

    /// Connectivity check on a bounded window: all nodes (vertex, cell) with
    /// cells in the core {-1,0,1}^D must be mutually reachable through the
    /// window {-3..3}^D. Translation invariance then connects the whole
    /// periodic graph: translated cores overlap cell by cell.
    fn window_connected(&self) -> bool {
        const SPAN: i64 = 3;
        let d = self.dim_total;
        let nu = self.vertices.len();
        let width = (2 * SPAN + 1) as usize;
        let cells: usize = width.pow(d as u32);
        let cell_rank = |cell: &[i64]| -> Option<usize> {
            let mut r = 0usize;
            for &c in cell {
                if c.abs() > SPAN {
                    return None;
                }
                r = r * width + (c + SPAN) as usize;
            }
            Some(r)
        };
        let node = |vi: usize, rank: usize| rank * nu + vi;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); cells * nu];
        let oriented = self.oriented_edges();
        let mut cell = vec![-SPAN; d];
        loop {
            let rank = cell_rank(&cell).expect("cell in window");
            for e in &oriented {
                let target: Vec<i64> = cell.iter().zip(&e.index).map(|(c, t)| c + t).collect();
                if let Some(tr) = cell_rank(&target) {
                    adj[node(e.from, rank)].push(node(e.to, tr));
                }
            }
            // Advance the mixed-radix counter over the window.
            let mut k = 0;
            loop {
                if k == d {
                    break;
                }
                cell[k] += 1;
                if cell[k] <= SPAN {
                    break;
                }
                cell[k] = -SPAN;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        let mut visited = vec![false; cells * nu];
        let mut queue = std::collections::VecDeque::new();
        let origin_rank = cell_rank(&vec![0i64; d]).expect("origin in window");
        visited[node(0, origin_rank)] = true;
        queue.push_back(node(0, origin_rank));
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n] {
                if !visited[m] {
                    visited[m] = true;
                    queue.push_back(m);
                }
            }
        }
        // Require the core to be reached; the outer shell may be used for
        // transit only.
        let mut core_cell = vec![-1i64; d];
        loop {
            let rank = cell_rank(&core_cell).expect("core cell in window");
            for vi in 0..nu {
                if !visited[node(vi, rank)] {
                    return false;
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    break;
                }
                core_cell[k] += 1;
                if core_cell[k] <= 1 {
                    break;
                }
                core_cell[k] = -1;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        true
    }
}

impl GuideSpec {
    /// Number of guide vertices.
    pub fn nu1(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == id)
    }

    /// Degree of each guide vertex inside the guide graph.
    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.vertices.len()];
        for e in &self.edges {
            if e.u == e.v {
                deg[e.u] += 2 * e.multiplicity;
            } else {
                deg[e.u] += e.multiplicity;
                deg[e.v] += e.multiplicity;
            }
        }
        deg
    }

    /// Component label per guide vertex, labels numbered 0.. in order of
    /// first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a] = b;
            }
        }
        let mut label = BTreeMap::new();
        let mut out = Vec::with_capacity(n);
        for v in 0..n {
            let root = find(&mut parent, v);
            let next = label.len();
            out.push(*label.entry(root).or_insert(next));
        }
        out
    }

    /// Number of connected components of the guide graph.
    pub fn component_count(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Indices of attached guide vertices, in guide vertex order.
    pub fn contact_indices(&self) -> Vec<usize> {
        let attached: BTreeSet<usize> = self.attachments.iter().map(|a| a.guide_vertex).collect();
        (0..self.vertices.len()).filter(|v| attached.contains(v)).collect()
    }

    /// Indices of non-attached guide vertices, in guide vertex order.
    pub fn interior_indices(&self) -> Vec<usize> {
        let attached: BTreeSet<usize> = self.attachments.iter().map(|a| a.guide_vertex).collect();
        (0..self.vertices.len()).filter(|v| !attached.contains(v)).collect()
    }

    /// The attachment gluing a given guide vertex, if any.
    pub fn attachment_of(&self, guide_vertex: usize) -> Option<&Attachment> {
        self.attachments.iter().find(|a| a.guide_vertex == guide_vertex)
    }

    /// A copy with every guide edge multiplicity scaled by `t`. This is the
    /// coupling-strength parameter of the band-edge asymptotics.
    pub fn scaled(&self, t: u64) -> GuideSpec {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.multiplicity *= t;
        }
        out
    }

    /// Check guide invariants against the host spec.
    pub fn validate(&self, spec: &PeriodicGraphSpec) -> Result<()> {
        if self.dim_guide == 0 {
            return Err(Error::Validation("dim_guide must be at least 1".into()));
        }
        if self.dim_guide >= spec.dim_total {
            return Err(Error::Validation("d must satisfy d < D".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.vertices {
            if !seen.insert(v.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate guide vertex id \"{v}\""
                )));
            }
            if spec.vertex_index(v).is_some() {
                return Err(Error::Validation(format!(
                    "guide vertex id \"{v}\" collides with a quotient vertex id"
                )));
            }
        }
        for e in &self.edges {
            if e.u >= self.vertices.len() || e.v >= self.vertices.len() {
                return Err(Error::Validation(
                    "guide edge references unknown guide vertex".into(),
                ));
            }
            if e.multiplicity == 0 {
                return Err(Error::Validation(
                    "guide edge multiplicity must be >= 1".into(),
                ));
            }
        }
        for (i, a) in self.edges.iter().enumerate() {
            for b in self.edges.iter().skip(i + 1) {
                if (a.u == b.u && a.v == b.v) || (a.u == b.v && a.v == b.u) {
                    return Err(Error::Validation(format!(
                        "guide edge between \"{}\" and \"{}\" is listed twice; use multiplicity",
                        self.vertices[a.u], self.vertices[a.v]
                    )));
                }
            }
        }
        let trans_dim = spec.dim_total - self.dim_guide;
        let mut attached_guide = BTreeSet::new();
        let mut attached_cylinder = BTreeSet::new();
        for a in &self.attachments {
            if a.guide_vertex >= self.vertices.len() {
                return Err(Error::Validation(
                    "guide attachment references unknown guide vertex".into(),
                ));
            }
            if a.lattice_vertex >= spec.vertices.len() {
                return Err(Error::Validation(
                    "guide attachment references unknown quotient vertex".into(),
                ));
            }
            if a.transverse_offset.len() != trans_dim {
                return Err(Error::Validation(format!(
                    "attachment transverse_offset has length {}, expected D - d = {}",
                    a.transverse_offset.len(),
                    trans_dim
                )));
            }
            if !attached_guide.insert(a.guide_vertex) {
                return Err(Error::Validation(format!(
                    "guide vertex \"{}\" is attached more than once",
                    self.vertices[a.guide_vertex]
                )));
            }
            if !attached_cylinder.insert((a.lattice_vertex, a.transverse_offset.clone())) {
                return Err(Error::Validation(
                    "two attachments map to the same cylinder vertex".into(),
                ));
            }
        }
        // The union graph is connected iff the (already connected) host is
        // reached from every guide component: components without an
        // attachment float free, whatever window is examined.
        let comps = self.components();
        let ncomp = self.component_count();
        let mut comp_attached = vec![false; ncomp];
        for a in &self.attachments {
            comp_attached[comps[a.guide_vertex]] = true;
        }
        if let Some(c) = comp_attached.iter().position(|ok| !ok) {
            let witness = comps
                .iter()
                .position(|&l| l == c)
                .map(|v| self.vertices[v].clone())
                .unwrap_or_default();
            return Err(Error::Validation(format!(
                "guide component containing \"{witness}\" has no attachment; \
                 the union graph would be disconnected"
            )));
        }
        Ok(())
    }
}

/// Edge indices from endpoint coordinates in the period basis: the index is
/// the floor-part difference `[v] - [u]`, where `x = x_0 + [x]` splits a
/// point into its fractional and integer parts.
pub fn compute_edge_indices(embedded_edges: &[(Vec<f64>, Vec<f64>)]) -> Vec<IndexVector> {
    embedded_edges
        .iter()
        .map(|(u, v)| {
            u.iter()
                .zip(v)
                .map(|(cu, cv)| (cv.floor() - cu.floor()) as i64)
                .collect()
        })
        .collect()
}

/// Split a full index into its longitudinal (first `d`) and transverse parts.
pub fn split_index(index: &[i64], d: usize) -> (Vec<i64>, Vec<i64>) {
    (index[..d].to_vec(), index[d..].to_vec())
}

/// Bridge statistics of the cylinder quotient obtained from `spec` by
/// keeping the first `guide.dim_guide` directions periodic.
pub fn bridge_stats(spec: &PeriodicGraphSpec, guide: &GuideSpec) -> BridgeStats {
    let d = guide.dim_guide;
    let mut beta = vec![0u64; spec.vertices.len()];
    for e in spec.oriented_edges() {
        let (long, _) = split_index(&e.index, d);
        if long.iter().any(|&t| t != 0) {
            beta[e.from] += e.multiplicity;
        }
    }
    let mut beta_per_vertex = BTreeMap::new();
    for (vi, v) in spec.vertices.iter().enumerate() {
        beta_per_vertex.insert(v.id.clone(), beta[vi]);
    }
    for v in &guide.vertices {
        beta_per_vertex.insert(v.clone(), 0);
    }
    let beta_plus = beta.iter().copied().max().unwrap_or(0);

    // beta_01: oriented bridges with both endpoints in the attachment set.
    // Endpoints live on specific transverse cells, so the transverse index
    // part must carry one attached cylinder vertex onto another.
    let attached: BTreeSet<(usize, Vec<i64>)> = guide
        .attachments
        .iter()
        .map(|a| (a.lattice_vertex, a.transverse_offset.clone()))
        .collect();
    let mut beta_01 = 0u64;
    for e in spec.oriented_edges() {
        let (long, trans) = split_index(&e.index, d);
        if long.iter().all(|&t| t == 0) {
            continue;
        }
        for (lv, off) in &attached {
            if *lv != e.from {
                continue;
            }
            let target: Vec<i64> = off.iter().zip(&trans).map(|(o, t)| o + t).collect();
            if attached.contains(&(e.to, target)) {
                beta_01 += e.multiplicity;
            }
        }
    }
    BridgeStats {
        beta_per_vertex,
        beta_plus,
        beta_01,
    }
}

/// Maximum degree of the perturbed graph: host degrees plus guide degrees at
/// identified attachment vertices.
pub fn combined_kappa_plus(spec: &PeriodicGraphSpec, guide: &GuideSpec) -> u64 {
    let host = spec.degrees();
    let gd = guide.degrees();
    let mut best = host.iter().copied().max().unwrap_or(0);
    for (gv, d) in gd.iter().enumerate() {
        let total = match guide.attachment_of(gv) {
            Some(a) => host[a.lattice_vertex] + d,
            None => *d,
        };
        best = best.max(total);
    }
    best
}
