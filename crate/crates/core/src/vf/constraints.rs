// Copyright 2026 The ribvf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


use serde::{Deserialize, Serialize};

use super::{FilterConfig, FilterError};
use crate::geometry::{Convexity, GeometryError, MeshIndex, TriMesh, TriangleRegion, VertexShape};
use crate::Vec3;

/// Which rule produced a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Condition {
    /// Closest point inside the face (or on a flat feature): the face plane.
    FacePlane = 1,
    /// Closest point on a convex edge or vertex: plane facing the position.
    ConvexFeature = 2,
    /// Closest point on a concave edge or vertex: the face plane.
    ConcaveFeature = 3,
}

impl From<Condition> for u8 {
    fn from(c: Condition) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for Condition {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Condition::FacePlane),
            2 => Ok(Condition::ConvexFeature),
            3 => Ok(Condition::ConcaveFeature),
            _ => Err(format!("unknown condition {v}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub face: usize,
    pub feature: TriangleRegion,
    pub condition: Condition,
}

/// Half-space `normalᵀΔx ≥ offset` on the position increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub normal: Vec3,
    pub offset: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub rows: Vec<ConstraintRow>,
    /// Rows were dropped to respect `max_constraints`.
    pub truncated: bool,
}

impl ConstraintSet {
    pub fn normals(&self) -> Vec<Vec3> {
        self.rows.iter().map(|r| r.normal).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.offset).collect()
    }
}

/// Closed fixture mesh with its spatial index and per-feature convexity.
#[derive(Debug, Clone)]
pub struct Fixture {
    index: MeshIndex,
    edge_shape: Vec<[Convexity; 3]>,
    vertex_shape: Vec<VertexShape>,
}

impl Fixture {
    /// Rejects meshes with boundary edges: the rules need both faces of
    /// every edge.
    pub fn new(mesh: TriMesh) -> Result<Self, GeometryError> {
        let edge_shape = (0..mesh.face_count())
            .map(|f| {
                let mut s = [Convexity::Planar; 3];
                for (i, slot) in s.iter_mut().enumerate() {
                    *slot = mesh.edge_convexity(mesh.face_edge(f, i as u8))?;
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        let vertex_shape = (0..mesh.vertices().len())
            .map(|v| mesh.vertex_shape(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Fixture { index: MeshIndex::new(mesh), edge_shape, vertex_shape })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.index.mesh()
    }

    pub fn index(&self) -> &MeshIndex {
        &self.index
    }

    /// Unsigned distance from `q` to the fixture surface, if within `max`.
    pub fn distance(&self, q: &Vec3, max: f64) -> Option<f64> {
        self.index.closest_point(q, max).map(|p| p.distance)
    }
}

/// Assembles the constraint rows for position `x`.
pub fn build_constraints(fixture: &Fixture, x: &Vec3, cfg: &FilterConfig) -> Result<ConstraintSet, FilterError> {
    build_constraints_for_step(fixture, x, cfg, cfg.cull_radius - cfg.probe_radius)
}

/// Like [`build_constraints`], but only faces that a move of length `step`
/// could bring within the probe radius contribute rows.
///
/// Faces farther than `probe_radius + step` cannot bind. Dropping them
/// matters at concave features, whose extended face plane may pass close
/// to `x` although the face itself is out of reach.
pub fn build_constraints_for_step(
    fixture: &Fixture,
    x: &Vec3,
    cfg: &FilterConfig,
    step: f64,
) -> Result<ConstraintSet, FilterError> {
    let r = cfg.probe_radius;
    let reach = (r + step.max(0.0)).min(cfg.cull_radius);
    if let Some((p, signed, _)) = fixture.index.signed_closest(x, cfg.cull_radius) {
        if signed < r - cfg.penetration_tolerance {
            return Err(FilterError::Penetration { face: p.face, depth: r - signed });
        }
    }
    let mut rows: Vec<ConstraintRow> = Vec::new();
    for face in fixture.index.faces_in_sphere(x, reach) {
        let Some(row) = face_row(fixture, face, x, r) else { continue };
        let duplicate = rows
            .iter()
            .any(|old| old.normal.dot(&row.normal) > 1.0 - 1e-9 && (old.offset - row.offset).abs() < 1e-9);
        if !duplicate {
            rows.push(row);
        }
    }
    let truncated = rows.len() > cfg.max_constraints;
    if truncated {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| rows[b].offset.total_cmp(&rows[a].offset).then(a.cmp(&b)));
        let mut keep = order[..cfg.max_constraints].to_vec();
        keep.sort_unstable();
        rows = keep.into_iter().map(|i| rows[i]).collect();
    }
    Ok(ConstraintSet { rows, truncated })
}

/// Row contributed by one face, or `None` when the face does not bound
/// motion from `x` (the position is behind it at a flat or concave feature).
pub(crate) fn face_row(fixture: &Fixture, face: usize, x: &Vec3, r: f64) -> Option<ConstraintRow> {
    let mesh = fixture.mesh();
    let cp = mesh.closest_point_on_face(face, x);
    let n_face = mesh.normal(face);
    let to_x = x - cp.point;
    let above = n_face.dot(&to_x) > 0.0;
    let shape = match cp.region {
        TriangleRegion::Interior => None,
        TriangleRegion::Edge(i) => Some(match fixture.edge_shape[face][i as usize] {
            Convexity::Convex => VertexShape::Convex,
            Convexity::Concave => VertexShape::Concave,
            Convexity::Planar => VertexShape::Planar,
        }),
        TriangleRegion::Vertex(i) => Some(fixture.vertex_shape[mesh.faces()[face][i as usize]]),
    };
    let (normal, condition) = match shape {
        None | Some(VertexShape::Planar) if above => (n_face, Condition::FacePlane),
        Some(VertexShape::Concave) if above => (n_face, Condition::ConcaveFeature),
        Some(VertexShape::Convex) | Some(VertexShape::Saddle) => {
            let d = to_x.norm();
            if d <= 0.0 {
                return None;
            }
            (to_x / d, Condition::ConvexFeature)
        }
        _ => return None,
    };
    Some(ConstraintRow {
        normal,
        offset: -normal.dot(&to_x) + r,
        provenance: Provenance { face, feature: cp.region, condition },
    })
}
