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

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::triangle::{self, ClosestPoint, TriangleRegion};
use super::{Aabb, GeometryError, Plane, Vec3};

/// Unordered vertex pair identifying an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey(pub usize, pub usize);

impl EdgeKey {
    pub fn new(a: usize, b: usize) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }
}

/// Dihedral classification of an edge seen from outside the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Convex,
    Concave,
    Planar,
}

/// Local shape of the surface around a vertex, from its incident edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexShape {
    /// No concave incident edge and at least one convex edge.
    Convex,
    /// No convex incident edge and at least one concave edge.
    Concave,
    /// Both convex and concave incident edges.
    Saddle,
    /// All incident edges planar.
    Planar,
}

/// Closest point on a whole mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshPoint {
    pub point: Vec3,
    pub face: usize,
    pub region: TriangleRegion,
    pub distance: f64,
}

/// Nearest ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub face: usize,
    pub t: f64,
    pub barycentric: [f64; 3],
}

/// Indexed triangle mesh with edge and vertex adjacency.
///
/// Faces wind counter-clockwise around their outward normal. Construction
/// rejects out-of-range indices, degenerate faces and edges shared by more
/// than two faces.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
    edges: HashMap<EdgeKey, Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if let Some(v) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite { vertex: v });
        }
        let mut normals = Vec::with_capacity(faces.len());
        let mut edges: HashMap<EdgeKey, Vec<usize>> = HashMap::with_capacity(faces.len() * 3 / 2);
        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(GeometryError::IndexOutOfRange { face: fi, index: bad, vertices: n });
            }
            let tri = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let normal = triangle::face_normal(&tri).map_err(|_| GeometryError::DegenerateFace { face: fi })?;
            normals.push(normal);
            for k in 0..3 {
                let key = EdgeKey::new(f[k], f[(k + 1) % 3]);
                let incident = edges.entry(key).or_default();
                incident.push(fi);
                if incident.len() > 2 {
                    return Err(GeometryError::NonManifoldEdge { a: key.0, b: key.1 });
                }
                vertex_faces[f[k]].push(fi);
            }
        }
        Ok(TriMesh { vertices, faces, normals, edges, vertex_faces })
    }

    /// Concatenates meshes; returns the merged mesh and, per face, the index
    /// of the input mesh it came from.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a TriMesh>) -> Result<(TriMesh, Vec<usize>), GeometryError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut tags = Vec::new();
        for (pi, part) in parts.into_iter().enumerate() {
            let base = vertices.len();
            vertices.extend_from_slice(&part.vertices);
            faces.extend(part.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
            tags.extend(std::iter::repeat(pi).take(part.faces.len()));
        }
        Ok((TriMesh::new(vertices, faces)?, tags))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn normal(&self, face: usize) -> Vec3 {
        self.normals[face]
    }

    pub fn edge_faces(&self, edge: EdgeKey) -> Option<&[usize]> {
        self.edges.get(&edge).map(Vec::as_slice)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &[usize])> {
        self.edges.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn vertex_faces(&self, vertex: usize) -> &[usize] {
        &self.vertex_faces[vertex]
    }

    /// Every edge has exactly two incident faces.
    pub fn is_closed(&self) -> bool {
        !self.edges.is_empty() && self.edges.values().all(|f| f.len() == 2)
    }

    /// Signed enclosed volume; positive for a closed outward-wound mesh.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| self.vertices[f[0]].dot(&self.vertices[f[1]].cross(&self.vertices[f[2]])))
            .sum::<f64>()
            / 6.0
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Global edge key of local edge `local` (0..3) of `face`.
    pub fn face_edge(&self, face: usize, local: u8) -> EdgeKey {
        let f = self.faces[face];
        EdgeKey::new(f[local as usize], f[(local as usize + 1) % 3])
    }

    /// Classifies the dihedral at an interior edge: convex when the normal of
    /// one face points away from the opposite vertex of the other.
    pub fn edge_convexity(&self, edge: EdgeKey) -> Result<Convexity, GeometryError> {
        let incident = self.edges.get(&edge).ok_or(GeometryError::UnknownEdge { a: edge.0, b: edge.1 })?;
        if incident.len() != 2 {
            return Err(GeometryError::BoundaryEdge { a: edge.0, b: edge.1 });
        }
        let (fa, fb) = (incident[0], incident[1]);
        let opposite = self.faces[fb]
            .iter()
            .copied()
            .find(|&v| v != edge.0 && v != edge.1)
            .expect("face has a vertex off its own edge");
        let mid = (self.vertices[edge.0] + self.vertices[edge.1]) * 0.5;
        let to_opposite = self.vertices[opposite] - mid;
        let s = self.normals[fa].dot(&to_opposite) / to_opposite.norm();
        Ok(if s.abs() <= 1e-9 {
            Convexity::Planar
        } else if s < 0.0 {
            Convexity::Convex
        } else {
            Convexity::Concave
        })
    }

    pub fn vertex_shape(&self, vertex: usize) -> Result<VertexShape, GeometryError> {
        let (mut convex, mut concave) = (false, false);
        for &f in &self.vertex_faces[vertex] {
            let face = self.faces[f];
            for &w in &face {
                if w == vertex {
                    continue;
                }
                match self.edge_convexity(EdgeKey::new(vertex, w))? {
                    Convexity::Convex => convex = true,
                    Convexity::Concave => concave = true,
                    Convexity::Planar => {}
                }
            }
        }
        Ok(match (convex, concave) {
            (true, false) => VertexShape::Convex,
            (false, true) => VertexShape::Concave,
            (true, true) => VertexShape::Saddle,
            (false, false) => VertexShape::Planar,
        })
    }

    /// Closest point of a single face to `q`.
    pub fn closest_point_on_face(&self, face: usize, q: &Vec3) -> ClosestPoint {
        triangle::closest_point_unchecked(q, &self.triangle(face))
    }

    /// Exhaustive closest point over all faces; ties keep the lowest face index.
    pub fn closest_point(&self, q: &Vec3) -> Option<MeshPoint> {
        closest_among(self, q, 0..self.faces.len())
    }

    /// All faces whose closest point to `center` lies within `radius`, by
    /// exhaustive scan. Sorted by face index.
    pub fn faces_in_sphere(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        (0..self.faces.len())
            .filter(|&f| (self.closest_point_on_face(f, center).point - center).norm_squared() <= r2)
            .collect()
    }

    /// Nearest intersection with ray parameter `t > 1e-9`. `dir` need not be
    /// unit length; the returned `t` is in units of `dir`.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        for face in 0..self.faces.len() {
            let tri = self.triangle(face);
            let Some(hit) = triangle::ray_triangle(origin, dir, &tri) else { continue };
            if hit.t <= 1e-9 {
                continue;
            }
            // strictly nearer by a relative margin, so a shared-edge tie keeps the lower index
            let nearer = match &best {
                None => true,
                Some(b) => hit.t < b.t - 1e-12 * b.t.max(1.0),
            };
            if nearer {
                let [w0, w1, w2] = hit.barycentric;
                best = Some(RayHit {
                    point: tri[0] * w0 + tri[1] * w1 + tri[2] * w2,
                    face,
                    t: hit.t,
                    barycentric: hit.barycentric,
                });
            }
        }
        best
    }

    /// Generalised winding number of the surface around `q` (1 inside a
    /// closed outward mesh, 0 outside).
    pub fn winding_number(&self, q: &Vec3) -> f64 {
        let mut total = 0.0;
        for f in &self.faces {
            let a = self.vertices[f[0]] - q;
            let b = self.vertices[f[1]] - q;
            let c = self.vertices[f[2]] - q;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn contains(&self, q: &Vec3) -> bool {
        self.winding_number(q) > 0.5
    }

    /// Total length of the plane/mesh intersection polyline. Vertices exactly
    /// on the plane count as lying on its positive side, so every crossing is
    /// counted once.
    pub fn slice_length(&self, plane: &Plane) -> f64 {
        let side: Vec<f64> = self.vertices.iter().map(|v| plane.signed_distance(v)).collect();
        let above = |i: usize| side[i] >= 0.0;
        let mut total = 0.0;
        for f in &self.faces {
            let ups = f.iter().filter(|&&i| above(i)).count();
            if ups == 0 || ups == 3 {
                continue;
            }
            let mut pts = [Vec3::zeros(); 2];
            let mut n = 0;
            for k in 0..3 {
                let (i, j) = (f[k], f[(k + 1) % 3]);
                if above(i) != above(j) {
                    let (pi, pj) = (self.vertices[i], self.vertices[j]);
                    let t = side[i] / (side[i] - side[j]);
                    pts[n] = pi + (pj - pi) * t;
                    n += 1;
                }
            }
            total += (pts[1] - pts[0]).norm();
        }
        total
    }

    /// Applies `f` to every vertex, keeping the connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<TriMesh, GeometryError> {
        TriMesh::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> TriMesh {
        let faces = self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
        TriMesh::new(self.vertices.clone(), faces).expect("flipping preserves validity")
    }
}

pub(crate) fn closest_among(mesh: &TriMesh, q: &Vec3, faces: impl IntoIterator<Item = usize>) -> Option<MeshPoint> {
    let mut best: Option<MeshPoint> = None;
    for face in faces {
        let cp = mesh.closest_point_on_face(face, q);
        let d = (cp.point - q).norm();
        if best.map_or(true, |b| d < b.distance) {
            best = Some(MeshPoint { point: cp.point, face, region: cp.region, distance: d });
        }
    }
    best
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_is_closed_and_outward() {
        let c = cube(0.5);
        assert!(c.is_closed());
        assert!((c.signed_volume() - 1.0).abs() < 1e-12);
        assert!(c.flipped().signed_volume() < 0.0);
    }

    #[test]
    fn cube_edge_is_convex() {
        let c = cube(0.5);
        // edge between bottom face and front face
        assert_eq!(c.edge_convexity(EdgeKey::new(0, 1)).unwrap(), Convexity::Convex);
        // diagonal of a face is planar
        assert_eq!(c.edge_convexity(EdgeKey::new(0, 2)).unwrap(), Convexity::Planar);
        assert_eq!(c.vertex_shape(0).unwrap(), VertexShape::Convex);
    }

    #[test]
    fn l_prism_inner_corner_is_concave() {
        let (m, inner) = l_prism();
        assert!(m.is_closed());
        assert!(m.signed_volume() > 0.0);
        assert_eq!(m.edge_convexity(inner).unwrap(), Convexity::Concave);
        assert_eq!(m.edge_convexity(EdgeKey::new(0, 6)).unwrap(), Convexity::Convex);
    }

    #[test]
    fn boundary_edge_rejected() {
        let m = TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(m.edge_convexity(EdgeKey::new(0, 1)), Err(GeometryError::BoundaryEdge { .. })));
        assert!(!m.is_closed());
    }

    #[test]
    fn construction_rejects_bad_input() {
        let v = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 1, 3]]), Err(GeometryError::IndexOutOfRange { .. })));
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 1, 1]]), Err(GeometryError::DegenerateFace { .. })));
        let mut v4 = v.clone();
        v4.push(Vec3::new(0.0, 0.0, 1.0));
        v4.push(Vec3::new(0.0, 0.0, -1.0));
        let f = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(matches!(TriMesh::new(v4, f), Err(GeometryError::NonManifoldEdge { .. })));
    }

    #[test]
    fn raycast_from_inside_sphere_hits_radius() {
        let s = uv_sphere(1.0, 24, 48);
        // chord sagitta bound for the coarsest edge
        let tol = 1.0 - (std::f64::consts::PI / 24.0).cos() + 1e-12;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let o = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            let hit = s.raycast(&o, &d).expect("ray from inside must exit");
            let r = hit.point.norm();
            assert!(r <= 1.0 + 1e-12 && r >= 1.0 - 2.0 * tol, "r = {r}");
            // on the face plane, inside the face
            let tri = s.triangle(hit.face);
            assert!(s.normal(hit.face).dot(&(hit.point - tri[0])).abs() < 1e-9);
            assert!(hit.barycentric.iter().all(|&w| w >= -1e-9));
        }
    }

    #[test]
    fn raycast_parallel_to_plane_misses() {
        let quad = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        assert!(quad.raycast(&Vec3::new(-1.0, 0.5, 0.1), &Vec3::new(1.0, 0.0, 0.0)).is_none());
        // through the shared diagonal: one hit, lowest face index
        let hit = quad.raycast(&Vec3::new(0.5, 0.5, 1.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(hit.face, 0);
    }

    #[test]
    fn winding_number_inside_outside() {
        let s = uv_sphere(1.0, 12, 24);
        assert!((s.winding_number(&Vec3::zeros()) - 1.0).abs() < 1e-9);
        assert!(s.winding_number(&Vec3::new(2.0, 0.0, 0.0)).abs() < 1e-9);
        assert!(s.contains(&Vec3::new(0.3, 0.2, -0.1)));
    }

    #[test]
    fn slice_of_cube_is_square_perimeter() {
        let c = cube(0.5);
        let p = Plane::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 0.1)).unwrap();
        assert!((c.slice_length(&p) - 4.0).abs() < 1e-12);
        // slicing exactly through a vertex layer still counts once
        let p = Plane::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 0.5)).unwrap();
        let len = c.slice_length(&p);
        assert!(len.abs() < 1e-12 || (len - 4.0).abs() < 1e-12, "len {len}");
    }

    #[test]
    fn sphere_larger_than_mesh_selects_all() {
        let c = cube(0.5);
        assert_eq!(c.faces_in_sphere(&Vec3::zeros(), 10.0).len(), 12);
        assert!(c.faces_in_sphere(&Vec3::new(5.0, 5.0, 5.0), 0.001).is_empty());
    }
}
