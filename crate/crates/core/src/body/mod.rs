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


//! Parametric torso model, point-cloud fitting and anthropometric
//! measurements.
//!
//! A [`BodyInstance`] is generated from [`ShapeParams`] and [`PoseParams`].
//! The skin mesh and the internal rib surface have a fixed topology for a
//! given resolution, so the rib border vertex indices never change with the
//! parameters.

mod cloud;
mod fit;
mod measure;
mod params;
mod torso;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, TriMesh};
use crate::Vec3;

pub use cloud::{chamfer_distance, sample_surface, NearestIndex, PointCloud, MIN_FIT_POINTS};
pub use fit::{fit_body, fit_body_with, FitOptions, FitReport, FitResult, Stage, StageReport, REQUIRED_LANDMARKS};
pub use measure::{measure, Measurements};
pub use params::{
    BodyDocument, PoseDocument, PoseParams, ShapeParams, FORMAT_VERSION, POSE_PARAM_COUNT, SHAPE_PARAM_COUNT,
};
pub use torso::{ModelOptions, DEFAULT_RIB_RELIEF, LANDMARK_NAMES, RIBS_PER_SIDE, RIB_SAMPLES};

/// Cross-section segments used when none is given.
pub const DEFAULT_RESOLUTION: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BodyError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("format: {0}")]
    Format(String),
    #[error("point cloud: {0}")]
    Cloud(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Rib `index` (1 = uppermost) on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RibId {
    pub side: Side,
    pub index: u8,
}

impl std::fmt::Display for RibId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rib_{}_{}", self.side.as_str(), self.index)
    }
}

/// Vertex indices into [`BodyInstance::rib_mesh`] along the upper and
/// lower edge of one rib, ordered from the spine toward the sternum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RibBorder {
    pub id: RibId,
    pub superior: Vec<usize>,
    pub inferior: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BodyInstance {
    pub shape: ShapeParams,
    pub pose: PoseParams,
    pub resolution: usize,
    /// Closed, outward-wound skin surface.
    pub skin: TriMesh,
    /// Point on the spine at mid rib-cage height.
    pub spine_center: Vec3,
    /// Unit vector up the spine at `spine_center`.
    pub spine_axis: Vec3,
    /// Open ribbon surface, one strip per rib.
    pub rib_mesh: TriMesh,
    pub rib_borders: Vec<RibBorder>,
    pub landmarks: BTreeMap<String, Vec3>,
}

/// Builds the torso with the default rib relief.
///
/// ```
/// use ribvf::body::{generate_body, PoseParams, ShapeParams};
///
/// let body = generate_body(&ShapeParams::default(), &PoseParams::default(), 32).unwrap();
/// assert!(body.skin.is_closed());
/// assert!(body.skin.signed_volume() > 0.0);
/// assert_eq!(body.rib_borders.len(), 12);
/// ```
pub fn generate_body(shape: &ShapeParams, pose: &PoseParams, resolution: usize) -> Result<BodyInstance, BodyError> {
    torso::build(shape, pose, &ModelOptions::new(resolution))
}

pub fn generate_body_with(
    shape: &ShapeParams,
    pose: &PoseParams,
    options: &ModelOptions,
) -> Result<BodyInstance, BodyError> {
    torso::build(shape, pose, options)
}

impl BodyInstance {
    pub fn rib_border(&self, id: RibId) -> Option<&RibBorder> {
        self.rib_borders.iter().find(|b| b.id == id)
    }

    /// Border positions `(superior, inferior)` of one rib.
    pub fn rib_border_points(&self, id: RibId) -> Option<(Vec<Vec3>, Vec<Vec3>)> {
        let b = self.rib_border(id)?;
        let v = self.rib_mesh.vertices();
        Some((b.superior.iter().map(|&i| v[i]).collect(), b.inferior.iter().map(|&i| v[i]).collect()))
    }

    pub fn landmark(&self, name: &str) -> Option<Vec3> {
        self.landmarks.get(name).copied()
    }

    /// Skin vertices followed by face centroids; the point set compared
    /// against scans during fitting.
    pub fn model_points(&self) -> Vec<Vec3> {
        model_points(&self.skin)
    }
}

pub(crate) fn model_points(skin: &TriMesh) -> Vec<Vec3> {
    let mut pts = skin.vertices().to_vec();
    pts.extend((0..skin.face_count()).map(|f| {
        let [a, b, c] = skin.triangle(f);
        (a + b + c) / 3.0
    }));
    pts
}
