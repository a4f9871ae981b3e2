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

//! Single-triangle queries: closest point with feature classification,
//! face normal and ray intersection.

use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Triangles with area at or below this are rejected as degenerate (m²).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Barycentric slack accepted by ray/triangle intersection.
pub const BARYCENTRIC_TOLERANCE: f64 = 1e-9;

/// Where on a triangle the closest point landed.
///
/// Edge `i` joins local vertex `i` to vertex `(i + 1) % 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum TriangleRegion {
    Interior,
    Edge(u8),
    Vertex(u8),
}

impl TriangleRegion {
    pub fn is_interior(self) -> bool {
        matches!(self, TriangleRegion::Interior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub region: TriangleRegion,
    /// Weights of the three corners, summing to one.
    pub barycentric: [f64; 3],
}

fn check_area(tri: &[Vec3; 3]) -> Result<Vec3, GeometryError> {
    let cross = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let area = 0.5 * cross.norm();
    if !(area > MIN_TRIANGLE_AREA) {
        return Err(GeometryError::DegenerateTriangle { area });
    }
    Ok(cross)
}

/// Unit normal following the winding order (counter-clockwise seen from the
/// side the normal points to).
pub fn face_normal(tri: &[Vec3; 3]) -> Result<Vec3, GeometryError> {
    check_area(tri).map(|c| c.normalize())
}

/// Closest point of `tri` to `q`, tagged with the Voronoi feature it lies in.
pub fn closest_point_on_triangle(q: &Vec3, tri: &[Vec3; 3]) -> Result<ClosestPoint, GeometryError> {
    check_area(tri)?;
    Ok(closest_point_unchecked(q, tri))
}

/// Same as [`closest_point_on_triangle`] without the degeneracy check. Callers
/// must guarantee the triangle has positive area.
pub(crate) fn closest_point_unchecked(p: &Vec3, tri: &[Vec3; 3]) -> ClosestPoint {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return vertex(a, 0);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return vertex(b, 1);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return ClosestPoint {
            point: a + ab * v,
            region: TriangleRegion::Edge(0),
            barycentric: [1.0 - v, v, 0.0],
        };
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return vertex(c, 2);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return ClosestPoint {
            point: a + ac * w,
            region: TriangleRegion::Edge(2),
            barycentric: [1.0 - w, 0.0, w],
        };
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return ClosestPoint {
            point: b + (c - b) * w,
            region: TriangleRegion::Edge(1),
            barycentric: [0.0, 1.0 - w, w],
        };
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    ClosestPoint {
        point: a + ab * v + ac * w,
        region: TriangleRegion::Interior,
        barycentric: [1.0 - v - w, v, w],
    }
}

fn vertex(p: Vec3, i: u8) -> ClosestPoint {
    let mut barycentric = [0.0; 3];
    barycentric[i as usize] = 1.0;
    ClosestPoint { point: p, region: TriangleRegion::Vertex(i), barycentric }
}

/// Ray parameter and barycentric coordinates of a ray/triangle hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    pub barycentric: [f64; 3],
}

/// Möller–Trumbore intersection, double sided. Accepts hits whose barycentric
/// coordinates are within [`BARYCENTRIC_TOLERANCE`] of the triangle so rays
/// through shared edges are never lost between two faces.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<TriangleHit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(&pvec) * inv;
    if u < -BARYCENTRIC_TOLERANCE || u > 1.0 + BARYCENTRIC_TOLERANCE {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < -BARYCENTRIC_TOLERANCE || u + v > 1.0 + BARYCENTRIC_TOLERANCE {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    Some(TriangleHit { t, barycentric: [1.0 - u - v, u, v] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_tri() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    #[test]
    fn projection_above_centroid_is_interior() {
        let cp = closest_point_on_triangle(&Vec3::new(0.25, 0.25, 1.0), &unit_tri()).unwrap();
        assert!((cp.point - Vec3::new(0.25, 0.25, 0.0)).norm() < 1e-15);
        assert_eq!(cp.region, TriangleRegion::Interior);
    }

    #[test]
    fn far_corner_is_vertex() {
        let cp = closest_point_on_triangle(&Vec3::new(2.0, -1.0, 0.0), &unit_tri()).unwrap();
        assert_eq!(cp.point, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(cp.region, TriangleRegion::Vertex(1));
    }

    #[test]
    fn beside_hypotenuse_is_edge_one() {
        let cp = closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.3), &unit_tri()).unwrap();
        assert_eq!(cp.region, TriangleRegion::Edge(1));
        assert!((cp.point - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let tri = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert!(matches!(
            closest_point_on_triangle(&Vec3::zeros(), &tri),
            Err(GeometryError::DegenerateTriangle { .. })
        ));
        assert!(face_normal(&tri).is_err());
    }

    #[test]
    fn normal_follows_winding() {
        let t = unit_tri();
        assert_eq!(face_normal(&t).unwrap(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(face_normal(&[t[0], t[2], t[1]]).unwrap(), Vec3::new(0.0, 0.0, -1.0));
    }

    fn random_tri(rng: &mut ChaCha8Rng) -> [Vec3; 3] {
        loop {
            let t = [0, 1, 2].map(|_| {
                Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            if check_area(&t).map(|c| c.norm() > 1e-3).unwrap_or(false) {
                return t;
            }
        }
    }

    #[test]
    fn random_normals_orthogonal_to_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let t = random_tri(&mut rng);
            let n = face_normal(&t).unwrap();
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(&(t[1] - t[0])).abs() < 1e-9);
            assert!(n.dot(&(t[2] - t[0])).abs() < 1e-9);
            // cyclic permutations agree, swaps negate
            let cyc = face_normal(&[t[1], t[2], t[0]]).unwrap();
            let swp = face_normal(&[t[1], t[0], t[2]]).unwrap();
            assert!((cyc - n).norm() < 1e-9);
            assert!((swp + n).norm() < 1e-9);
        }
    }

    /// Independent oracle: dense grid over barycentric coordinates then a
    /// local refinement around the best cell, so the oracle never calls the
    /// region logic above.
    fn grid_oracle(q: &Vec3, t: &[Vec3; 3]) -> f64 {
        let step = 1e-3;
        let n = (1.0 / step) as usize;
        let eval = |u: f64, v: f64| (t[0] * (1.0 - u - v) + t[1] * u + t[2] * v - q).norm();
        let (mut bu, mut bv, mut best) = (0.0, 0.0, f64::INFINITY);
        for i in 0..=n {
            let u = i as f64 * step;
            for j in 0..=(n - i) {
                let v = j as f64 * step;
                let d = eval(u, v);
                if d < best {
                    best = d;
                    bu = u;
                    bv = v;
                }
            }
        }
        // shrink a pattern search inside the simplex
        let mut h = step;
        while h > 1e-12 {
            let mut improved = false;
            for (du, dv) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, -h), (-h, h)] {
                let (u, v) = (bu + du, bv + dv);
                if u < 0.0 || v < 0.0 || u + v > 1.0 {
                    continue;
                }
                let d = eval(u, v);
                if d < best {
                    best = d;
                    bu = u;
                    bv = v;
                    improved = true;
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best
    }

    #[test]
    fn random_pairs_match_barycentric_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let t = random_tri(&mut rng);
            let q = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let cp = closest_point_on_triangle(&q, &t).unwrap();
            let oracle = grid_oracle(&q, &t);
            let got = (cp.point - q).norm();
            assert!((got - oracle).abs() < 1e-6, "got {got} oracle {oracle}");
            // never further than any corner
            for v in &t {
                assert!(got <= (v - q).norm() + 1e-15);
            }
        }
    }

    #[test]
    fn ray_hits_inside_and_misses_outside() {
        let t = unit_tri();
        let hit = ray_triangle(&Vec3::new(0.2, 0.2, 1.0), &Vec3::new(0.0, 0.0, -1.0), &t).unwrap();
        assert!((hit.t - 1.0).abs() < 1e-15);
        assert!(ray_triangle(&Vec3::new(0.8, 0.8, 1.0), &Vec3::new(0.0, 0.0, -1.0), &t).is_none());
        // parallel ray
        assert!(ray_triangle(&Vec3::new(0.2, 0.2, 1.0), &Vec3::new(1.0, 0.0, 0.0), &t).is_none());
    }
}
