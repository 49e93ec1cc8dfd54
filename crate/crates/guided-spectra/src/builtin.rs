//! Builtin example families on the square lattice.
//!
//! All families use `D = 2`, `d = 1`: the guide repeats along the first
//! coordinate axis. Guides are parametrized by a single positive integer,
//! the pendant count `p`, edge multiplicity `s`, or coupling strength `t`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{
    Attachment, GuideEdge, GuideSpec, IndexedEdge, PeriodicGraphSpec, QuotientVertex,
};

fn square_lattice() -> PeriodicGraphSpec {
    PeriodicGraphSpec {
        dim_total: 2,
        vertices: vec![QuotientVertex {
            id: "o".into(),
            coords: Some(vec![0.0, 0.0]),
        }],
        edges: vec![
            IndexedEdge { u: 0, v: 0, index: vec![1, 0], multiplicity: 1 },
            IndexedEdge { u: 0, v: 0, index: vec![0, 1], multiplicity: 1 },
        ],
    }
}

fn get_param(params: &BTreeMap<String, i64>, name: &str, key: &str) -> Result<u64> {
    let mut unknown = params.keys().filter(|k| k.as_str() != key);
    if let Some(k) = unknown.next() {
        return Err(Error::Validation(format!(
            "example \"{name}\" does not take a parameter \"{k}\""
        )));
    }
    let value = params.get(key).copied().ok_or_else(|| {
        Error::Validation(format!("example \"{name}\" requires parameter \"{key}\""))
    })?;
    if value <= 0 {
        return Err(Error::Validation(format!(
            "parameter \"{key}\" of example \"{name}\" must be positive, got {value}"
        )));
    }
    Ok(value as u64)
}

/// Construct a builtin example family by name.
///
/// * `square_star(p)`: one vertex of each lattice row carries `p` pendant
///   edges. The guide graph is a star of order `p + 1` with attached center.
/// * `square_double_mandarin(s)`: two vertices each joined to the attached
///   center by `s` parallel edges; carries the flat band at `s`.
/// * `square_path(t)`: a path on three vertices, both edges of multiplicity
///   `t`, attached at one end.
/// * `square_multi_mandarin(p)`: `p` two-vertex components; component `j`
///   uses `j` parallel edges and attaches on transverse cell `j - 1`.
/// * `square_pendant(t)`: decorated host (square lattice plus a pendant
///   vertex per cell) with a single guide edge of multiplicity `t` hung from
///   the pendant, which starts no bridges.
pub fn builtin_example(
    name: &str,
    params: &BTreeMap<String, i64>,
) -> Result<(PeriodicGraphSpec, GuideSpec)> {
    let (spec, guide) = match name {
        "square_star" => {
            let p = get_param(params, name, "p")?;
            let mut vertices = vec!["c".to_string()];
            let mut edges = Vec::new();
            for k in 1..=p {
                vertices.push(format!("q{k}"));
                edges.push(GuideEdge { u: 0, v: k as usize, multiplicity: 1 });
            }
            (
                square_lattice(),
                GuideSpec {
                    dim_guide: 1,
                    vertices,
                    edges,
                    attachments: vec![Attachment {
                        guide_vertex: 0,
                        lattice_vertex: 0,
                        transverse_offset: vec![0],
                    }],
                },
            )
        }
        "square_double_mandarin" => {
            let s = get_param(params, name, "s")?;
            (
                square_lattice(),
                GuideSpec {
                    dim_guide: 1,
                    vertices: vec!["c".into(), "m1".into(), "m2".into()],
                    edges: vec![
                        GuideEdge { u: 0, v: 1, multiplicity: s },
                        GuideEdge { u: 0, v: 2, multiplicity: s },
                    ],
                    attachments: vec![Attachment {
                        guide_vertex: 0,
                        lattice_vertex: 0,
                        transverse_offset: vec![0],
                    }],
                },
            )
        }
        "square_path" => {
            let t = get_param(params, name, "t")?;
            (
                square_lattice(),
                GuideSpec {
                    dim_guide: 1,
                    vertices: vec!["c".into(), "p1".into(), "p2".into()],
                    edges: vec![
                        GuideEdge { u: 0, v: 1, multiplicity: t },
                        GuideEdge { u: 1, v: 2, multiplicity: t },
                    ],
                    attachments: vec![Attachment {
                        guide_vertex: 0,
                        lattice_vertex: 0,
                        transverse_offset: vec![0],
                    }],
                },
            )
        }
        "square_multi_mandarin" => {
            let p = get_param(params, name, "p")?;
            let mut vertices = Vec::new();
            let mut edges = Vec::new();
            let mut attachments = Vec::new();
            for j in 1..=p {
                vertices.push(format!("a{j}"));
                vertices.push(format!("b{j}"));
                let base = 2 * (j as usize - 1);
                edges.push(GuideEdge { u: base, v: base + 1, multiplicity: j });
                attachments.push(Attachment {
                    guide_vertex: base,
                    lattice_vertex: 0,
                    transverse_offset: vec![j as i64 - 1],
                });
            }
            (
                square_lattice(),
                GuideSpec { dim_guide: 1, vertices, edges, attachments },
            )
        }
        "square_pendant" => {
            let t = get_param(params, name, "t")?;
            let spec = PeriodicGraphSpec {
                dim_total: 2,
                vertices: vec![
                    QuotientVertex { id: "o".into(), coords: Some(vec![0.0, 0.0]) },
                    QuotientVertex { id: "w".into(), coords: Some(vec![0.5, 0.5]) },
                ],
                edges: vec![
                    IndexedEdge { u: 0, v: 0, index: vec![1, 0], multiplicity: 1 },
                    IndexedEdge { u: 0, v: 0, index: vec![0, 1], multiplicity: 1 },
                    IndexedEdge { u: 0, v: 1, index: vec![0, 0], multiplicity: 1 },
                ],
            };
            let guide = GuideSpec {
                dim_guide: 1,
                vertices: vec!["g".into(), "h".into()],
                edges: vec![GuideEdge { u: 0, v: 1, multiplicity: t }],
                attachments: vec![Attachment {
                    guide_vertex: 1,
                    lattice_vertex: 1,
                    transverse_offset: vec![0],
                }],
            };
            (spec, guide)
        }
        other => return Err(Error::UnknownExample(other.to_string())),
    };
    spec.validate()?;
    guide.validate(&spec)?;
    Ok((spec, guide))
}

/// Names accepted by [`builtin_example`], with their parameter key.
pub fn builtin_names() -> &'static [(&'static str, &'static str)] {
    &[
        ("square_star", "p"),
        ("square_double_mandarin", "s"),
        ("square_path", "t"),
        ("square_multi_mandarin", "p"),
        ("square_pendant", "t"),
    ]
}
