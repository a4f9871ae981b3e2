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


use nalgebra::{Rotation3, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BodyError;
use crate::Vec3;

pub const FORMAT_VERSION: u32 = 1;

/// Torso shape. Lengths in metres; `rib_spacing` and `squareness` are
/// unitless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    /// Crotch to top of the torso.
    pub torso_height: f64,
    pub chest_half_width: f64,
    pub chest_half_depth: f64,
    pub waist_half_width: f64,
    pub waist_half_depth: f64,
    /// Drop of the shoulder line below the top of the torso.
    pub shoulder_drop: f64,
    /// Vertical span from the first to the sixth rib, at the back.
    pub rib_cage_extent: f64,
    /// Ratio between successive rib gaps going down; 1 is even spacing.
    pub rib_spacing: f64,
    /// Superellipse exponent of the cross-sections; 2 is an ellipse.
    pub squareness: f64,
    /// Distance of the spine behind the section centre at chest level.
    pub spine_offset: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            torso_height: 0.62,
            chest_half_width: 0.17,
            chest_half_depth: 0.12,
            waist_half_width: 0.15,
            waist_half_depth: 0.105,
            shoulder_drop: 0.05,
            rib_cage_extent: 0.22,
            rib_spacing: 1.0,
            squareness: 2.6,
            spine_offset: 0.06,
        }
    }
}

pub const SHAPE_PARAM_COUNT: usize = 10;

impl ShapeParams {
    pub const NAMES: [&'static str; SHAPE_PARAM_COUNT] = [
        "torso_height",
        "chest_half_width",
        "chest_half_depth",
        "waist_half_width",
        "waist_half_depth",
        "shoulder_drop",
        "rib_cage_extent",
        "rib_spacing",
        "squareness",
        "spine_offset",
    ];

    pub fn to_array(&self) -> [f64; SHAPE_PARAM_COUNT] {
        [
            self.torso_height,
            self.chest_half_width,
            self.chest_half_depth,
            self.waist_half_width,
            self.waist_half_depth,
            self.shoulder_drop,
            self.rib_cage_extent,
            self.rib_spacing,
            self.squareness,
            self.spine_offset,
        ]
    }

    pub fn from_array(a: [f64; SHAPE_PARAM_COUNT]) -> Self {
        ShapeParams {
            torso_height: a[0],
            chest_half_width: a[1],
            chest_half_depth: a[2],
            waist_half_width: a[3],
            waist_half_depth: a[4],
            shoulder_drop: a[5],
            rib_cage_extent: a[6],
            rib_spacing: a[7],
            squareness: a[8],
            spine_offset: a[9],
        }
    }

    /// Multiplies every length by `k`, leaving the unitless parameters.
    pub fn scaled(&self, k: f64) -> Self {
        let mut a = self.to_array();
        for (i, v) in a.iter_mut().enumerate() {
            if i != 7 && i != 8 {
                *v *= k;
            }
        }
        ShapeParams::from_array(a)
    }

    /// Random subject: an overall size factor in [0.9, 1.1] over the
    /// default lengths, each length then varied by up to ±6 %, spacing in
    /// [0.9, 1.1] and squareness in [2.2, 3.0]. Invalid draws are redrawn.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let size = rng.gen_range(0.9..1.1);
            let mut a = ShapeParams::default().scaled(size).to_array();
            for (i, v) in a.iter_mut().enumerate() {
                if i != 7 && i != 8 {
                    *v *= rng.gen_range(0.94..1.06);
                }
            }
            a[7] = rng.gen_range(0.9..1.1);
            a[8] = rng.gen_range(2.2..3.0);
            let s = ShapeParams::from_array(a);
            if s.validate().is_ok() {
                return s;
            }
        }
    }

    pub fn validate(&self) -> Result<(), BodyError> {
        let bad = |m: String| Err(BodyError::Params(m));
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(2.0..=6.0).contains(&self.squareness) {
            return bad(format!("squareness must be in [2, 6], got {}", self.squareness));
        }
        if !(self.rib_spacing > 0.5 && self.rib_spacing < 2.0) {
            return bad(format!("rib_spacing must be in (0.5, 2), got {}", self.rib_spacing));
        }
        let h = self.torso_height;
        if self.shoulder_drop >= 0.3 * h {
            return bad("shoulder_drop must be below 30% of torso_height".into());
        }
        let rib_bottom = h - self.shoulder_drop - super::torso::RIB_TOP_BELOW_SHOULDER * h - self.rib_cage_extent;
        if rib_bottom <= (super::torso::WAIST_LEVEL + 0.02) * h {
            return bad("rib cage reaches below the waist".into());
        }
        if self.spine_offset >= 0.8 * self.chest_half_depth.min(self.waist_half_depth) {
            return bad("spine_offset places the spine outside the torso".into());
        }
        Ok(())
    }
}

/// Global placement plus four trunk joints (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseParams {
    /// Axis-angle; magnitude is the angle.
    pub rotation: Vec3,
    pub translation: Vec3,
    /// Forward bend of the upper trunk about the lateral axis.
    pub flexion: f64,
    /// Sideways bend about the antero-posterior axis.
    pub lateral_bend: f64,
    /// Twist about the spine.
    pub axial_twist: f64,
    /// Tilt of the shoulder line.
    pub shoulder_tilt: f64,
}

pub const POSE_PARAM_COUNT: usize = 10;

impl PoseParams {
    pub fn to_array(&self) -> [f64; POSE_PARAM_COUNT] {
        let (r, t) = (self.rotation, self.translation);
        [r.x, r.y, r.z, t.x, t.y, t.z, self.flexion, self.lateral_bend, self.axial_twist, self.shoulder_tilt]
    }

    pub fn from_array(a: [f64; POSE_PARAM_COUNT]) -> Self {
        PoseParams {
            rotation: Vec3::new(a[0], a[1], a[2]),
            translation: Vec3::new(a[3], a[4], a[5]),
            flexion: a[6],
            lateral_bend: a[7],
            axial_twist: a[8],
            shoulder_tilt: a[9],
        }
    }

    pub fn joints(&self) -> [f64; 4] {
        [self.flexion, self.lateral_bend, self.axial_twist, self.shoulder_tilt]
    }

    pub fn global_rotation(&self) -> Rotation3<f64> {
        Rotation3::new(self.rotation)
    }

    pub fn global_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_scaled_axis(self.rotation)
    }

    pub fn validate(&self) -> Result<(), BodyError> {
        let a = self.to_array();
        if !a.iter().all(|v| v.is_finite()) {
            return Err(BodyError::Params("pose has non-finite values".into()));
        }
        if self.rotation.norm() > std::f64::consts::PI + 1e-12 {
            return Err(BodyError::Params("global rotation angle exceeds π".into()));
        }
        if self.joints().iter().any(|j| j.abs() > std::f64::consts::FRAC_PI_2) {
            return Err(BodyError::Params("joint angles must be within ±π/2".into()));
        }
        Ok(())
    }
}

/// On-disk form of shape and pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyDocument {
    pub format_version: u32,
    pub shape: ShapeParams,
    pub pose: PoseParams,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    super::DEFAULT_RESOLUTION
}

impl BodyDocument {
    pub fn new(shape: ShapeParams, pose: PoseParams, resolution: usize) -> Self {
        BodyDocument { format_version: FORMAT_VERSION, shape, pose, resolution }
    }

    pub fn from_json(s: &str) -> Result<Self, BodyError> {
        let doc: BodyDocument = serde_json::from_str(s).map_err(|e| BodyError::Format(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(BodyError::Format(format!("unsupported format_version {}", doc.format_version)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }
}

/// On-disk pose alone (fit initialisation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDocument {
    pub format_version: u32,
    pub pose: PoseParams,
}

impl PoseDocument {
    pub fn from_json(s: &str) -> Result<PoseParams, BodyError> {
        let doc: PoseDocument = serde_json::from_str(s).map_err(|e| BodyError::Format(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(BodyError::Format(format!("unsupported format_version {}", doc.format_version)));
        }
        Ok(doc.pose)
    }

    pub fn to_json(pose: &PoseParams) -> String {
        serde_json::to_string_pretty(&PoseDocument { format_version: FORMAT_VERSION, pose: *pose }).expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_shapes_are_valid_and_seeded() {
        use rand::SeedableRng;
        let draw = |seed| ShapeParams::sample(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
        for seed in 0..200 {
            let s = draw(seed);
            s.validate().unwrap();
            let ratio = s.torso_height / ShapeParams::default().torso_height;
            assert!((0.9 * 0.94..1.1 * 1.06).contains(&ratio));
        }
    }

    #[test]
    fn defaults_are_valid() {
        ShapeParams::default().validate().unwrap();
        PoseParams::default().validate().unwrap();
    }

    #[test]
    fn ranges_are_enforced() {
        let s = ShapeParams { squareness: 1.9, ..ShapeParams::default() };
        assert!(s.validate().is_err());
        let s = ShapeParams { rib_spacing: 2.0, ..ShapeParams::default() };
        assert!(s.validate().is_err());
        let s = ShapeParams { chest_half_width: -0.1, ..ShapeParams::default() };
        assert!(s.validate().is_err());
        let p = PoseParams { flexion: 1.6, ..PoseParams::default() };
        assert!(p.validate().is_err());
        let p = PoseParams { rotation: Vec3::new(0.0, 3.2, 0.0), ..PoseParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn document_roundtrip_and_version() {
        let doc = BodyDocument::new(ShapeParams::default(), PoseParams { flexion: 0.1, ..Default::default() }, 32);
        let back = BodyDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let bumped = doc.to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(BodyDocument::from_json(&bumped).is_err());
        let json = serde_json::to_value(doc).unwrap();
        assert!(json["shape"]["rib_cage_extent"].is_number());
    }

    #[test]
    fn array_roundtrip() {
        let s = ShapeParams::default();
        assert_eq!(ShapeParams::from_array(s.to_array()), s);
        let p = PoseParams { translation: Vec3::new(1.0, 2.0, 3.0), axial_twist: 0.2, ..Default::default() };
        assert_eq!(PoseParams::from_array(p.to_array()), p);
    }
}
