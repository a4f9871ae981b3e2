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

//! Triangle-mesh and plane primitives shared by the rest of the crate.
//!
//! Everything here is a pure function of immutable inputs. Closest-point
//! queries report which triangle feature (interior, edge, vertex) the
//! nearest point lies on, because the fixture constraint rules branch on it.

mod distance;
mod index;
pub mod io;
mod mesh;
mod triangle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distance::{mesh_distance, segment_segment_closest, triangle_distance};
pub use index::MeshIndex;
pub use mesh::{Convexity, EdgeKey, MeshPoint, RayHit, TriMesh, VertexShape};
pub use triangle::{
    closest_point_on_triangle, face_normal, ray_triangle, ClosestPoint, TriangleHit, TriangleRegion,
    BARYCENTRIC_TOLERANCE, MIN_TRIANGLE_AREA,
};

#[cfg(test)]
pub(crate) use mesh::fixtures;

/// Position (metres) or direction.
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate triangle (area {area:.3e} m²)")]
    DegenerateTriangle { area: f64 },
    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },
    #[error("face {face} references vertex {index} but the mesh has {vertices} vertices")]
    IndexOutOfRange { face: usize, index: usize, vertices: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("edge ({a}, {b}) is shared by more than two faces")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is a boundary edge")]
    BoundaryEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is not part of the mesh")]
    UnknownEdge { a: usize, b: usize },
    #[error("plane normal must be non-zero")]
    ZeroNormal,
    #[error("{0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for GeometryError {
    fn from(e: std::io::Error) -> Self {
        GeometryError::Io(e.to_string())
    }
}

/// Oriented plane through `point` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    normal: Vec3,
    point: Vec3,
}

impl Plane {
    /// Normalises `normal`; rejects a zero vector.
    pub fn new(normal: Vec3, point: Vec3) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(Plane { normal: normal / n, point })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn point(&self) -> Vec3 {
        self.point
    }

    pub fn signed_distance(&self, q: &Vec3) -> f64 {
        self.normal.dot(&(q - self.point))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn inflate(&self, by: f64) -> Aabb {
        Aabb { min: self.min.add_scalar(-by), max: self.max.add_scalar(by) }
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            (self.max - self.min).norm()
        }
    }

    /// Euclidean gap between two boxes (0 when they overlap).
    pub fn distance(&self, other: &Aabb) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let gap = (other.min[i] - self.max[i]).max(self.min[i] - other.max[i]).max(0.0);
            d2 += gap * gap;
        }
        d2.sqrt()
    }
}
