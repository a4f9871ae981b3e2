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

use super::index::MeshIndex;
use super::triangle::{closest_point_unchecked, ray_triangle};
use super::{Aabb, Vec3};

/// Closest points between segments `p1-q1` and `p2-q2`.
pub fn segment_segment_closest(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (Vec3, Vec3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return (*p1, *p2);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

fn segment_crosses(a: &Vec3, b: &Vec3, tri: &[Vec3; 3]) -> bool {
    ray_triangle(a, &(b - a), tri).map_or(false, |h| (0.0..=1.0).contains(&h.t))
}

/// Exact distance between two non-degenerate triangles (0 if they touch).
pub fn triangle_distance(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> f64 {
    for i in 0..3 {
        let j = (i + 1) % 3;
        if segment_crosses(&t1[i], &t1[j], t2) || segment_crosses(&t2[i], &t2[j], t1) {
            return 0.0;
        }
    }
    let mut best = f64::INFINITY;
    for v in t1 {
        best = best.min((closest_point_unchecked(v, t2).point - v).norm());
    }
    for v in t2 {
        best = best.min((closest_point_unchecked(v, t1).point - v).norm());
    }
    for i in 0..3 {
        for j in 0..3 {
            let (p, q) = segment_segment_closest(&t1[i], &t1[(i + 1) % 3], &t2[j], &t2[(j + 1) % 3]);
            best = best.min((p - q).norm());
        }
    }
    best
}

/// Minimum distance between the surfaces of two meshes, capped at `cutoff`:
/// returns `cutoff` whenever the true distance is at least that large.
pub fn mesh_distance(a: &MeshIndex, b: &MeshIndex, cutoff: f64) -> f64 {
    if a.bounds().distance(&b.bounds()) >= cutoff {
        return cutoff;
    }
    let (ma, mb) = (a.mesh(), b.mesh());
    let mut best = cutoff;
    for fa in 0..ma.face_count() {
        let ta = ma.triangle(fa);
        let query = Aabb::from_points(ta.iter()).inflate(best);
        for fb in b.candidates(&query) {
            let d = triangle_distance(&ta, &mb.triangle(fb));
            if d < best {
                best = d;
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::cube;
    use super::*;

    #[test]
    fn parallel_offset_triangles() {
        let t1 = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let t2 = t1.map(|v| v + Vec3::new(0.0, 0.0, 0.25));
        assert!((triangle_distance(&t1, &t2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn piercing_triangles_touch() {
        let t1 = [Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let t2 = [Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.1, 0.0, 1.0), Vec3::new(-0.1, 0.2, 1.0)];
        assert_eq!(triangle_distance(&t1, &t2), 0.0);
    }

    #[test]
    fn crossed_edges() {
        let t1 = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let t2 = [Vec3::new(0.5, 0.3, -1.0), Vec3::new(0.5, 0.3, 1.0), Vec3::new(0.5, 2.0, 0.0)];
        assert!((triangle_distance(&t1, &t2) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cubes_apart_and_overlapping() {
        let a = MeshIndex::new(cube(0.5));
        let b = MeshIndex::new(cube(0.5).map_vertices(|v| v + Vec3::new(1.3, 0.0, 0.0)).unwrap());
        assert!((mesh_distance(&a, &b, 1.0) - 0.3).abs() < 1e-12);
        assert_eq!(mesh_distance(&a, &b, 0.1), 0.1);
        let c = MeshIndex::new(cube(0.5).map_vertices(|v| v + Vec3::new(0.7, 0.2, 0.1)).unwrap());
        assert_eq!(mesh_distance(&a, &c, 1.0), 0.0);
    }
}
