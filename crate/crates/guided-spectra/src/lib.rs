//! Spectral analysis of periodic discrete Laplacians perturbed by
//! lower-dimensional periodic guides.
//!
//! A host graph periodic under `Z^D` carries the combinatorial Laplacian
//! `(Del f)(v) = sum over oriented edges (v,u) of (f(v) - f(u))`. Attaching a
//! `Z^d`-periodic system of finite decorations (`d < D`) leaves the essential
//! spectrum untouched but can create guided bands: dispersion branches that
//! live above the unperturbed spectrum, and flat bands rooted in decoration
//! eigenvectors that vanish on the contact set. This crate computes
//!
//! * the unperturbed band structure over the Brillouin torus ([`floquet`]),
//! * truncated Floquet fibers on a cylinder window and the bridge split used
//!   for bracketing estimates ([`cylinder`]),
//! * guided and flat bands with certified enclosures ([`guided`]),
//! * an exact scalar dispersion solver for single-contact guides on the
//!   square lattice via a Feshbach (Schur complement) reduction ([`feshbach`]),
//! * strong-coupling asymptotics of band edges ([`asymptotics`]).
//!
//! Graph input is a quotient-graph document described in [`document`];
//! ready-made families are in [`builtin`].

pub mod asymptotics;
pub mod builtin;
pub mod cylinder;
pub mod document;
pub mod eigen;
pub mod error;
pub mod feshbach;
pub mod floquet;
pub mod graph;
pub mod guided;
pub mod numerics;
pub mod tolerances;

pub use error::{Error, Result};
pub use floquet::{Band, BandSet, HermitianMatrix, Quasimomentum};
pub use graph::{
    Attachment, BridgeStats, GuideEdge, GuideSpec, IndexVector, IndexedEdge, PeriodicGraphSpec,
    QuotientVertex,
};
