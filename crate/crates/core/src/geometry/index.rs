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

use super::mesh::{closest_among, MeshPoint, TriMesh};
use super::triangle::TriangleRegion;
use super::{Aabb, Vec3};

const MAX_CELLS: usize = 1 << 21;

/// Uniform-grid face index over an owned mesh.
///
/// Faces are binned into every cell their bounding box touches, so a cell
/// lookup is a conservative superset; every query then filters candidates
/// with the exact triangle distance. Results therefore equal the exhaustive
/// scans on [`TriMesh`].
#[derive(Debug, Clone)]
pub struct MeshIndex {
    mesh: TriMesh,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
    bounds: Aabb,
    vertex_normals: Vec<Vec3>,
}

impl MeshIndex {
    /// Builds with a cell edge of roughly twice the mean triangle edge.
    pub fn new(mesh: TriMesh) -> Self {
        let mean_edge = mean_edge_length(&mesh);
        Self::with_cell_size(mesh, 2.0 * mean_edge)
    }

    pub fn with_cell_size(mesh: TriMesh, cell: f64) -> Self {
        let bounds = mesh.aabb();
        let extent = if bounds.is_empty() { Vec3::zeros() } else { bounds.max - bounds.min };
        let mut cell = if cell.is_finite() && cell > 0.0 { cell } else { extent.max().max(1e-3) };
        let dims_for = |c: f64| extent.map(|e| ((e / c).floor() as usize + 1).max(1));
        let mut dims = dims_for(cell);
        while dims.iter().product::<usize>() > MAX_CELLS {
            cell *= 1.5;
            dims = dims_for(cell);
        }
        let dims = [dims[0], dims[1], dims[2]];
        let origin = if bounds.is_empty() { Vec3::zeros() } else { bounds.min };
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let mut index = MeshIndex {
            mesh,
            origin,
            cell,
            dims,
            cells: Vec::new(),
            bounds,
            vertex_normals: Vec::new(),
        };
        for f in 0..index.mesh.face_count() {
            let b = Aabb::from_points(index.mesh.triangle(f).iter());
            let (lo, hi) = index.cell_range(&b);
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        cells[index.flat(x, y, z)].push(f as u32);
                    }
                }
            }
        }
        index.cells = cells;
        index.vertex_normals = angle_weighted_normals(&index.mesh);
        index
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> TriMesh {
        self.mesh
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    fn flat(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    fn cell_range(&self, b: &Aabb) -> ([usize; 3], [usize; 3]) {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for i in 0..3 {
            let to_cell = |v: f64| (((v - self.origin[i]) / self.cell).floor().max(0.0) as usize).min(self.dims[i] - 1);
            lo[i] = to_cell(b.min[i]);
            hi[i] = to_cell(b.max[i]);
        }
        (lo, hi)
    }

    /// Candidate faces whose bounding boxes may touch `query`; sorted, unique.
    pub fn candidates(&self, query: &Aabb) -> Vec<usize> {
        if self.bounds.is_empty() || query.distance(&self.bounds) > 0.0 {
            return Vec::new();
        }
        let (lo, hi) = self.cell_range(query);
        let mut out = Vec::new();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    out.extend(self.cells[self.flat(x, y, z)].iter().map(|&f| f as usize));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Exact set of faces whose closest point to `center` is within `radius`.
    pub fn faces_in_sphere(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let query = Aabb { min: center.add_scalar(-radius), max: center.add_scalar(radius) };
        let mut faces = self.candidates(&query);
        faces.retain(|&f| (self.mesh.closest_point_on_face(f, center).point - center).norm_squared() <= r2);
        faces
    }

    /// Nearest surface point if one lies within `max_radius`.
    pub fn closest_point(&self, q: &Vec3, max_radius: f64) -> Option<MeshPoint> {
        let query = Aabb { min: q.add_scalar(-max_radius), max: q.add_scalar(max_radius) };
        closest_among(&self.mesh, q, self.candidates(&query)).filter(|p| p.distance <= max_radius)
    }

    /// Nearest surface point within `max_radius` together with a signed
    /// distance (negative inside), the sign taken from the angle-weighted
    /// pseudo-normal of the nearest feature.
    pub fn signed_closest(&self, q: &Vec3, max_radius: f64) -> Option<(MeshPoint, f64, Vec3)> {
        let p = self.closest_point(q, max_radius)?;
        let n = self.pseudo_normal(&p);
        let d = q - p.point;
        let sign = if d.dot(&n) < 0.0 { -1.0 } else { 1.0 };
        Some((p, sign * p.distance, n))
    }

    /// Outward normal associated with the closest feature.
    pub fn pseudo_normal(&self, p: &MeshPoint) -> Vec3 {
        let f = self.mesh.faces()[p.face];
        match p.region {
            TriangleRegion::Interior => self.mesh.normal(p.face),
            TriangleRegion::Edge(i) => {
                let key = self.mesh.face_edge(p.face, i);
                let n: Vec3 = self
                    .mesh
                    .edge_faces(key)
                    .map(|fs| fs.iter().map(|&g| self.mesh.normal(g)).sum())
                    .unwrap_or_else(|| self.mesh.normal(p.face));
                n.try_normalize(1e-300).unwrap_or_else(|| self.mesh.normal(p.face))
            }
            TriangleRegion::Vertex(i) => self.vertex_normals[f[i as usize]],
        }
    }
}

fn mean_edge_length(mesh: &TriMesh) -> f64 {
    if mesh.face_count() == 0 {
        return 1.0;
    }
    let total: f64 = (0..mesh.face_count())
        .map(|f| {
            let t = mesh.triangle(f);
            (t[1] - t[0]).norm() + (t[2] - t[1]).norm() + (t[0] - t[2]).norm()
        })
        .sum();
    total / (3.0 * mesh.face_count() as f64)
}

fn angle_weighted_normals(mesh: &TriMesh) -> Vec<Vec3> {
    let mut normals = vec![Vec3::zeros(); mesh.vertices().len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let t = mesh.triangle(fi);
        for k in 0..3 {
            let a = t[(k + 1) % 3] - t[k];
            let b = t[(k + 2) % 3] - t[k];
            let angle = a.angle(&b);
            normals[f[k]] += mesh.normal(fi) * angle;
        }
    }
    for n in &mut normals {
        *n = n.try_normalize(1e-300).unwrap_or_else(Vec3::zeros);
    }
    normals
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::uv_sphere;
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn grid_query_equals_exhaustive_scan(
            cx in -1.5f64..1.5, cy in -1.5f64..1.5, cz in -1.5f64..1.5, r in 0.001f64..1.2,
            cell in 0.02f64..0.8,
        ) {
            let mesh = uv_sphere(1.0, 16, 32);
            let idx = MeshIndex::with_cell_size(mesh.clone(), cell);
            let c = Vec3::new(cx, cy, cz);
            prop_assert_eq!(idx.faces_in_sphere(&c, r), mesh.faces_in_sphere(&c, r));
        }
    }

    #[test]
    fn grid_query_equals_exhaustive_on_10k_faces() {
        // 10k-face sphere against random spheres
        let mesh = uv_sphere(1.0, 71, 71);
        assert!(mesh.face_count() >= 9_900);
        let idx = MeshIndex::new(mesh.clone());
        let mut s: u64 = 17;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let c = Vec3::new(next() * 3.0 - 1.5, next() * 3.0 - 1.5, next() * 3.0 - 1.5);
            let r = next() * 0.6 + 1e-3;
            assert_eq!(idx.faces_in_sphere(&c, r), mesh.faces_in_sphere(&c, r));
        }
    }

    #[test]
    fn signed_distance_of_sphere() {
        let idx = MeshIndex::new(uv_sphere(1.0, 24, 48));
        let (_, d, _) = idx.signed_closest(&Vec3::new(0.0, 0.0, 0.9), 0.5).unwrap();
        assert!(d < 0.0);
        let (_, d, _) = idx.signed_closest(&Vec3::new(0.0, 1.05, 0.0), 0.5).unwrap();
        assert!(d > 0.0);
        assert!(idx.closest_point(&Vec3::new(3.0, 0.0, 0.0), 0.5).is_none());
    }
}
