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


use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use rstar::primitives::GeomWithData;
use rstar::{PointDistance, RTree};

use super::BodyError;
use crate::geometry::{io, TriMesh};
use crate::Vec3;

/// Fewest points accepted by the fitter.
pub const MIN_FIT_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Per-point colour, carried along but never used by fitting.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self, min_points: usize) -> Result<(), BodyError> {
        if self.points.len() < min_points {
            return Err(BodyError::Cloud(format!("{} points, need at least {min_points}", self.points.len())));
        }
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(BodyError::Cloud(format!("point {i} is not finite")));
        }
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(BodyError::Cloud("colour count differs from point count".into()));
            }
        }
        Ok(())
    }

    /// Loads `.ply` (binary or ASCII vertices) or `.xyz` text.
    pub fn load(path: &Path) -> Result<Self, BodyError> {
        let file = File::open(path).map_err(|e| BodyError::Cloud(format!("{}: {e}", path.display())))?;
        let r = BufReader::new(file);
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let points = match ext.as_str() {
            "ply" => io::read_ply_points(r)?,
            "xyz" | "txt" => io::read_xyz(r)?,
            _ => return Err(BodyError::Cloud(format!("unknown point cloud extension '{ext}'"))),
        };
        Ok(PointCloud::new(points))
    }
}

/// Nearest-neighbour index over a fixed point set.
pub struct NearestIndex {
    tree: RTree<GeomWithData<[f64; 3], usize>>,
    len: usize,
}

impl NearestIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let raw = points.iter().enumerate().map(|(i, p)| GeomWithData::new([p.x, p.y, p.z], i)).collect();
        NearestIndex { tree: RTree::bulk_load(raw), len: points.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `(squared distance, index)` of the nearest stored point.
    ///
    /// # Panics
    /// If the index is empty.
    pub fn nearest(&self, q: &Vec3) -> (f64, usize) {
        let q = [q.x, q.y, q.z];
        let n = self.tree.nearest_neighbor(&q).expect("nearest query on an empty index");
        (n.distance_2(&q), n.data)
    }

    /// Nearest match for every query, computed in parallel.
    pub fn nearest_all(&self, queries: &[Vec3]) -> Vec<(f64, usize)> {
        queries.par_iter().map(|q| self.nearest(q)).collect()
    }

    /// Mean squared nearest-neighbour distance; summed in query order so
    /// the result does not depend on thread scheduling.
    pub fn mean_squared(&self, queries: &[Vec3]) -> f64 {
        let d = self.nearest_all(queries);
        d.iter().map(|(d2, _)| d2).sum::<f64>() / queries.len() as f64
    }
}

/// Mean squared nearest-neighbour distance from `a` to `b` plus from `b`
/// to `a`.
///
/// ```
/// use ribvf::body::{chamfer_distance, PointCloud};
/// use ribvf::Vec3;
///
/// let a = PointCloud::new(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]);
/// let b = PointCloud::new(a.points.iter().map(|p| p + Vec3::new(0.01, 0.0, 0.0)).collect());
/// let d = chamfer_distance(&a, &b).unwrap();
/// assert!((d - 2e-4).abs() < 1e-15);
/// ```
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, BodyError> {
    if a.is_empty() || b.is_empty() {
        return Err(BodyError::Cloud("chamfer distance needs two non-empty clouds".into()));
    }
    let ia = NearestIndex::new(&a.points);
    let ib = NearestIndex::new(&b.points);
    Ok(ib.mean_squared(&a.points) + ia.mean_squared(&b.points))
}

/// `n` points drawn uniformly by area from the surface of `mesh`.
pub fn sample_surface<R: Rng + ?Sized>(mesh: &TriMesh, n: usize, rng: &mut R) -> Vec<Vec3> {
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(f);
        total += 0.5 * (b - a).cross(&(c - a)).norm();
        cumulative.push(total);
    }
    (0..n)
        .map(|_| {
            let t = rng.gen::<f64>() * total;
            let f = cumulative.partition_point(|&c| c < t).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect()
}
