//! Shared scaffolding for the integration suites: builtin lookup plus
//! seeded random hosts and guides.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use guided_spectra::builtin::builtin_example;
use guided_spectra::{
    Attachment, GuideEdge, GuideSpec, IndexedEdge, PeriodicGraphSpec, QuotientVertex,
};

#[allow(dead_code)]
pub fn example(name: &str, key: &str, value: i64) -> (PeriodicGraphSpec, GuideSpec) {
    let params: BTreeMap<String, i64> = [(key.to_string(), value)].into();
    builtin_example(name, &params).expect("builtin example")
}

/// Random guide on `nu1 <= max_nu1` vertices: random simple edges with small
/// multiplicities, every component attached (distinct transverse offsets).
pub fn random_guide(rng: &mut ChaCha8Rng, max_nu1: usize, host_vertices: usize) -> GuideSpec {
    let nu1 = rng.gen_range(1..=max_nu1);
    let mut edges = Vec::new();
    for i in 0..nu1 {
        for j in (i + 1)..nu1 {
            if rng.gen_bool(0.45) {
                edges.push(GuideEdge { u: i, v: j, multiplicity: rng.gen_range(1..=3) });
            }
        }
    }
    if nu1 >= 2 && edges.is_empty() {
        edges.push(GuideEdge { u: 0, v: 1, multiplicity: rng.gen_range(1..=3) });
    }
    let mut guide = GuideSpec {
        dim_guide: 1,
        vertices: (0..nu1).map(|k| format!("g{k}")).collect(),
        edges,
        attachments: Vec::new(),
    };
    let comps = guide.components();
    let ncomp = guide.component_count();
    let mut offset = 0i64;
    for c in 0..ncomp {
        let v = comps.iter().position(|&l| l == c).expect("component member");
        guide.attachments.push(Attachment {
            guide_vertex: v,
            lattice_vertex: rng.gen_range(0..host_vertices),
            transverse_offset: vec![offset],
        });
        offset += 1;
    }
    // sometimes give one component a second contact
    if rng.gen_bool(0.35) {
        let unattached: Vec<usize> = (0..nu1)
            .filter(|v| guide.attachments.iter().all(|a| a.guide_vertex != *v))
            .collect();
        if !unattached.is_empty() {
            let v = unattached[rng.gen_range(0..unattached.len())];
            guide.attachments.push(Attachment {
                guide_vertex: v,
                lattice_vertex: rng.gen_range(0..host_vertices),
                transverse_offset: vec![offset],
            });
        }
    }
    guide
}

/// Random connected 2-periodic host: a quotient chain plus the two lattice
/// generators on one carrier vertex, then a few extra random edge classes.
#[allow(dead_code)]
pub fn random_host(rng: &mut ChaCha8Rng) -> PeriodicGraphSpec {
    let nu = rng.gen_range(1..=4);
    let mut edges = Vec::new();
    for k in 1..nu {
        edges.push(IndexedEdge {
            u: k - 1,
            v: k,
            index: vec![0, 0],
            multiplicity: rng.gen_range(1..=2),
        });
    }
    let carrier = rng.gen_range(0..nu);
    edges.push(IndexedEdge { u: carrier, v: carrier, index: vec![1, 0], multiplicity: 1 });
    edges.push(IndexedEdge { u: carrier, v: carrier, index: vec![0, 1], multiplicity: 1 });
    for _ in 0..rng.gen_range(0..=3) {
        let u = rng.gen_range(0..nu);
        let v = rng.gen_range(0..nu);
        let index = vec![rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
        if u == v && index == [0, 0] {
            continue;
        }
        let duplicate = edges.iter().any(|e: &IndexedEdge| {
            (e.u == u && e.v == v && e.index == index)
                || (e.u == v && e.v == u && e.index.iter().zip(&index).all(|(a, b)| *a == -b))
        });
        if duplicate {
            continue;
        }
        edges.push(IndexedEdge { u, v, index, multiplicity: rng.gen_range(1..=2) });
    }
    let spec = PeriodicGraphSpec {
        dim_total: 2,
        vertices: (0..nu)
            .map(|k| QuotientVertex { id: format!("a{k}"), coords: None })
            .collect(),
        edges,
    };
    spec.validate().expect("scaffolded host is valid");
    spec
}
