//! The graph spec document: one JSON object per problem.
//!
//! ```json
//! { "dim_total": 2, "dim_guide": 1,
//!   "quotient_vertices": [{"id": "o", "coords": [0.0, 0.0]}],
//!   "quotient_edges": [{"u": "o", "v": "o", "index": [1, 0]},
//!                      {"u": "o", "v": "o", "index": [0, 1]}],
//!   "guide": { "vertices": ["c", "q1"],
//!              "edges": [{"u": "c", "v": "q1"}],
//!              "attachments": [{"guide_vertex": "c", "lattice_vertex": "o",
//!                               "transverse_offset": [0]}] } }
//! ```
//!
//! Reversed edge orientations must not be listed; loops are listed once;
//! parallel edges are expressed through the `multiplicity` field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    Attachment, GuideEdge, GuideSpec, IndexedEdge, PeriodicGraphSpec, QuotientVertex,
};

fn default_multiplicity() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    u: String,
    v: String,
    index: Vec<i64>,
    #[serde(default = "default_multiplicity")]
    multiplicity: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GuideEdgeDoc {
    u: String,
    v: String,
    #[serde(default = "default_multiplicity")]
    multiplicity: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttachmentDoc {
    guide_vertex: String,
    lattice_vertex: String,
    transverse_offset: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GuideDoc {
    vertices: Vec<String>,
    edges: Vec<GuideEdgeDoc>,
    attachments: Vec<AttachmentDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    dim_total: usize,
    dim_guide: usize,
    quotient_vertices: Vec<VertexDoc>,
    quotient_edges: Vec<EdgeDoc>,
    guide: GuideDoc,
}

/// Parse and validate a graph spec document.
pub fn load_spec(document: &str) -> Result<(PeriodicGraphSpec, GuideSpec)> {
    let doc: GraphDocument = serde_json::from_str(document).map_err(Error::from_json)?;

    let vertices: Vec<QuotientVertex> = doc
        .quotient_vertices
        .iter()
        .map(|v| QuotientVertex { id: v.id.clone(), coords: v.coords.clone() })
        .collect();
    let vertex_index = |id: &str| -> Result<usize> {
        vertices
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| Error::Validation(format!("unknown quotient vertex \"{id}\"")))
    };
    let mut edges = Vec::with_capacity(doc.quotient_edges.len());
    for e in &doc.quotient_edges {
        edges.push(IndexedEdge {
            u: vertex_index(&e.u)
                .map_err(|_| Error::Validation(format!("quotient edge references unknown vertex \"{}\"", e.u)))?,
            v: vertex_index(&e.v)
                .map_err(|_| Error::Validation(format!("quotient edge references unknown vertex \"{}\"", e.v)))?,
            index: e.index.clone(),
            multiplicity: e.multiplicity,
        });
    }
    let spec = PeriodicGraphSpec { dim_total: doc.dim_total, vertices, edges };

    let guide_index = |id: &str| -> Result<usize> {
        doc.guide
            .vertices
            .iter()
            .position(|v| v == id)
            .ok_or_else(|| Error::Validation(format!("unknown guide vertex \"{id}\"")))
    };
    let mut guide_edges = Vec::with_capacity(doc.guide.edges.len());
    for e in &doc.guide.edges {
        guide_edges.push(GuideEdge {
            u: guide_index(&e.u)
                .map_err(|_| Error::Validation(format!("guide edge references unknown guide vertex \"{}\"", e.u)))?,
            v: guide_index(&e.v)
                .map_err(|_| Error::Validation(format!("guide edge references unknown guide vertex \"{}\"", e.v)))?,
            multiplicity: e.multiplicity,
        });
    }
    let mut attachments = Vec::with_capacity(doc.guide.attachments.len());
    for a in &doc.guide.attachments {
        attachments.push(Attachment {
            guide_vertex: guide_index(&a.guide_vertex).map_err(|_| {
                Error::Validation(format!(
                    "guide attachment references unknown guide vertex \"{}\"",
                    a.guide_vertex
                ))
            })?,
            lattice_vertex: spec.vertex_index(&a.lattice_vertex).ok_or_else(|| {
                Error::Validation(format!(
                    "guide attachment references unknown quotient vertex \"{}\"",
                    a.lattice_vertex
                ))
            })?,
            transverse_offset: a.transverse_offset.clone(),
        });
    }
    let guide = GuideSpec {
        dim_guide: doc.dim_guide,
        vertices: doc.guide.vertices.clone(),
        edges: guide_edges,
        attachments,
    };

    spec.validate()?;
    guide.validate(&spec)?;
    Ok((spec, guide))
}

/// Serialize a validated pair back to the document format (pretty JSON,
/// stable field order). `load_spec(serialize_spec(s, g))` reproduces the
/// inputs exactly.
pub fn serialize_spec(spec: &PeriodicGraphSpec, guide: &GuideSpec) -> String {
    let doc = GraphDocument {
        dim_total: spec.dim_total,
        dim_guide: guide.dim_guide,
        quotient_vertices: spec
            .vertices
            .iter()
            .map(|v| VertexDoc { id: v.id.clone(), coords: v.coords.clone() })
            .collect(),
        quotient_edges: spec
            .edges
            .iter()
            .map(|e| EdgeDoc {
                u: spec.vertices[e.u].id.clone(),
                v: spec.vertices[e.v].id.clone(),
                index: e.index.clone(),
                multiplicity: e.multiplicity,
            })
            .collect(),
        guide: GuideDoc {
            vertices: guide.vertices.clone(),
            edges: guide
                .edges
                .iter()
                .map(|e| GuideEdgeDoc {
                    u: guide.vertices[e.u].clone(),
                    v: guide.vertices[e.v].clone(),
                    multiplicity: e.multiplicity,
                })
                .collect(),
            attachments: guide
                .attachments
                .iter()
                .map(|a| AttachmentDoc {
                    guide_vertex: guide.vertices[a.guide_vertex].clone(),
                    lattice_vertex: spec.vertices[a.lattice_vertex].id.clone(),
                    transverse_offset: a.transverse_offset.clone(),
                })
                .collect(),
        },
    };
    serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
}
