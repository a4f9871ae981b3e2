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


//! Rib curves on the skin and the forbidden-region tubes built on them.
//!
//! Rib border vertices are projected radially from the spine axis onto the
//! skin, each border is fitted with a cubic, and an elliptical tube is
//! swept along the mean of the two cubics.

mod curve;
mod projection;
mod tube;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::{BodyInstance, RibId};
use crate::geometry::{io, mesh_distance, GeometryError, MeshIndex, TriMesh};
use crate::vf::Fixture;

pub use curve::{chord_parameters, fit_rib_curves, Cubic, RibCurve, MIN_CURVE_SAMPLES};
pub use projection::{project_onto_skin, project_rib_vertices};
pub use tube::{build_tube, rotation_minimizing_frames, VFTube};

pub const SIDECAR_VERSION: u32 = 1;

/// Tubes closer than this are checked exactly for contact.
const CONTACT_CUTOFF: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RibError {
    #[error("body has no rib {0}")]
    UnknownRib(RibId),
    #[error("projection of {rib} vertex {vertex} missed the skin")]
    ProjectionMiss { rib: RibId, vertex: usize },
    #[error("cubic fit needs at least 4 samples, got {samples}")]
    Underdetermined { samples: usize },
    #[error("tube for {rib} is degenerate: {reason}")]
    Degenerate { rib: RibId, reason: String },
    #[error("tubes {a} and {b} intersect")]
    Intersection { a: RibId, b: RibId },
    #[error("invalid tube configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubeConfig {
    /// Minor axis as a fraction of the mean rib width on the skin.
    pub c_prop: f64,
    /// Stations along the curve, excluding the first.
    pub segments: usize,
    /// Vertices per cross-section.
    pub ring_sides: usize,
}

impl Default for TubeConfig {
    fn default() -> Self {
        TubeConfig { c_prop: 0.5, segments: 32, ring_sides: 16 }
    }
}

impl TubeConfig {
    pub fn validate(&self) -> Result<(), RibError> {
        if self.segments < 8 || self.ring_sides < 8 {
            return Err(RibError::Config(format!(
                "segments and ring_sides must be at least 8 (got {} and {})",
                self.segments, self.ring_sides
            )));
        }
        if !(self.c_prop > 0.0) || !self.c_prop.is_finite() {
            return Err(RibError::Config(format!("c_prop must be positive, got {}", self.c_prop)));
        }
        Ok(())
    }
}

/// All tubes of one body together with their merged mesh.
#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub config: TubeConfig,
    pub curves: Vec<RibCurve>,
    pub tubes: Vec<VFTube>,
    /// Union of the tube meshes.
    pub merged: TriMesh,
    /// Index into `tubes` for every face of `merged`.
    pub tags: Vec<usize>,
}

pub fn rib_curve(body: &BodyInstance, id: RibId) -> Result<RibCurve, RibError> {
    let (sup, inf) = project_rib_vertices(body, id)?;
    fit_rib_curves(id, &sup, &inf)
}

/// Builds one tube per rib and rejects the set if any two tubes touch.
pub fn build_all_fixtures(body: &BodyInstance, config: &TubeConfig) -> Result<FixtureSet, RibError> {
    config.validate()?;
    let mut curves = Vec::with_capacity(body.rib_borders.len());
    let mut tubes = Vec::with_capacity(body.rib_borders.len());
    for border in &body.rib_borders {
        let curve = rib_curve(body, border.id)?;
        tubes.push(build_tube(&curve, config)?);
        curves.push(curve);
    }
    let indices: Vec<MeshIndex> = tubes.iter().map(|t| MeshIndex::new(t.mesh.clone())).collect();
    for i in 0..tubes.len() {
        for j in i + 1..tubes.len() {
            if mesh_distance(&indices[i], &indices[j], CONTACT_CUTOFF) <= 0.0 {
                return Err(RibError::Intersection { a: tubes[i].id, b: tubes[j].id });
            }
        }
    }
    let (merged, tags) = TriMesh::merge(tubes.iter().map(|t| &t.mesh))?;
    Ok(FixtureSet { config: *config, curves, tubes, merged, tags })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeRecord {
    pub name: String,
    pub id: RibId,
    pub minor_axis: f64,
    pub major_axis: f64,
    pub superior: Cubic,
    pub inferior: Cubic,
    pub central: Cubic,
}

/// JSON companion of an exported tube OBJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub config: TubeConfig,
    pub tubes: Vec<TubeRecord>,
}

impl FixtureSet {
    pub fn tube(&self, id: RibId) -> Option<&VFTube> {
        self.tubes.iter().find(|t| t.id == id)
    }

    pub fn curve(&self, id: RibId) -> Option<&RibCurve> {
        self.curves.iter().find(|c| c.id == id)
    }

    /// Rib owning face `face` of the merged mesh.
    pub fn face_rib(&self, face: usize) -> RibId {
        self.tubes[self.tags[face]].id
    }

    /// Filter fixture over the merged mesh.
    pub fn fixture(&self) -> Result<Fixture, GeometryError> {
        Fixture::new(self.merged.clone())
    }

    /// One OBJ object per tube, named `rib_<side>_<index>`.
    pub fn write_obj<W: Write>(&self, w: W) -> Result<(), GeometryError> {
        let names: Vec<String> = self.tubes.iter().map(|t| t.id.to_string()).collect();
        let objects: Vec<(&str, &TriMesh)> = names.iter().map(String::as_str).zip(self.tubes.iter().map(|t| &t.mesh)).collect();
        io::write_obj(w, &objects)
    }

    pub fn sidecar(&self) -> Sidecar {
        let tubes = self
            .tubes
            .iter()
            .zip(&self.curves)
            .map(|(t, c)| TubeRecord {
                name: t.id.to_string(),
                id: t.id,
                minor_axis: t.minor_axis,
                major_axis: t.major_axis,
                superior: c.superior,
                inferior: c.inferior,
                central: c.central,
            })
            .collect();
        Sidecar { format_version: SIDECAR_VERSION, config: self.config, tubes }
    }
}
