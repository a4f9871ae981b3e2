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


//! Analytic torso: superellipse cross-sections lofted along the spine.
//!
//! Local frame: `y` runs up the spine from the crotch, `z` points anterior,
//! `+x` is the subject's left. The spine line is the `y` axis; section
//! centres sit up to `spine_offset` in front of it, furthest at the chest. The pose translation is the world
//! position of [`Profile::origin`]. Every length in the model is
//! proportional to a shape parameter, so scaling all lengths scales the
//! whole body.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};

use super::params::{PoseParams, ShapeParams};
use super::{BodyError, BodyInstance, RibBorder, RibId, Side};
use crate::geometry::TriMesh;
use crate::Vec3;

/// Waist height as a fraction of torso height.
pub const WAIST_LEVEL: f64 = 0.40;
/// First rib sits this fraction of torso height below the shoulder line.
pub const RIB_TOP_BELOW_SHOULDER: f64 = 0.08;
pub const RIBS_PER_SIDE: usize = 6;
/// Border vertices per rib edge.
pub const RIB_SAMPLES: usize = 12;
/// Half-angle of the gap left around the sternum (rad from the front).
const STERNUM_GAP: f64 = 0.12 * PI;
/// Chest measurement level, as a fraction of the rib cage below its top.
const CHEST_IN_CAGE: f64 = 0.35;
/// Rib depth inside the skin, as a fraction of the section radius.
const RIB_DEPTH: f64 = 0.88;
/// Rib thickness as a fraction of the mean rib gap.
const RIB_THICKNESS: f64 = 0.33;
/// Drop of each rib from back to front, as a fraction of the mean gap.
const RIB_SLOPE: f64 = 0.6;
/// Extent of the rib band along each rib, in the `u` parameter.
const RIB_U: (f64, f64) = (0.06, 0.92);

pub const DEFAULT_RIB_RELIEF: f64 = 0.015;

pub const LANDMARK_NAMES: [&str; 6] = ["shoulder_left", "shoulder_right", "sternum", "crotch", "chest", "waist"];

/// Mesh density and surface detail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Segments per cross-section; the loft has twice as many rings.
    pub resolution: usize,
    /// Relative height of the skin ridges over each rib.
    pub rib_relief: f64,
}

impl ModelOptions {
    pub fn new(resolution: usize) -> Self {
        ModelOptions { resolution, rib_relief: DEFAULT_RIB_RELIEF }
    }

    pub fn rings(&self) -> usize {
        2 * self.resolution + 1
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn sgn_pow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

/// Vertical layout and section profile derived from shape parameters.
#[derive(Debug, Clone)]
pub(crate) struct Profile {
    s: ShapeParams,
    pub h: f64,
    pub y_shoulder: f64,
    pub y_waist: f64,
    pub y_chest: f64,
    pub y_rib_bottom: f64,
    rib_back: [f64; RIBS_PER_SIDE],
    gap: f64,
    exponent: f64,
}

impl Profile {
    pub fn new(s: &ShapeParams) -> Self {
        let h = s.torso_height;
        let y_shoulder = h - s.shoulder_drop;
        let y_rib_top = y_shoulder - RIB_TOP_BELOW_SHOULDER * h;
        let e = s.rib_cage_extent;
        let mut rib_back = [0.0; RIBS_PER_SIDE];
        let total: f64 = (0..RIBS_PER_SIDE - 1).map(|j| s.rib_spacing.powi(j as i32)).sum();
        let mut acc = 0.0;
        for (k, y) in rib_back.iter_mut().enumerate() {
            *y = y_rib_top - e * acc / total;
            if k + 1 < RIBS_PER_SIDE {
                acc += s.rib_spacing.powi(k as i32);
            }
        }
        Profile {
            s: *s,
            h,
            y_shoulder,
            y_waist: WAIST_LEVEL * h,
            y_chest: y_rib_top - CHEST_IN_CAGE * e,
            y_rib_bottom: y_rib_top - e,
            rib_back,
            gap: e / (RIBS_PER_SIDE - 1) as f64,
            exponent: 2.0 / s.squareness,
        }
    }

    fn blend(&self, y: f64) -> f64 {
        smoothstep((y - self.y_waist) / (self.y_rib_bottom - self.y_waist))
    }

    pub fn half_axes(&self, y: f64) -> (f64, f64) {
        let t = self.blend(y);
        let s = &self.s;
        let mut a = s.waist_half_width + (s.chest_half_width - s.waist_half_width) * t;
        let mut b = s.waist_half_depth + (s.chest_half_depth - s.waist_half_depth) * t;
        if y > self.y_shoulder {
            let u = smoothstep((y - self.y_shoulder) / (self.h - self.y_shoulder));
            a *= 1.0 - 0.3 * u;
            b *= 1.0 - 0.15 * u;
        }
        (a, b)
    }

    /// Model point placed at the pose translation: mid-height, between the
    /// waist and chest section centres.
    pub fn origin(&self) -> Vec3 {
        Vec3::new(0.0, 0.5 * self.h, 0.6 * self.s.spine_offset)
    }

    /// Section centre depth: the chest bulges forward of the line through
    /// the pelvis and the neck.
    pub fn center_z(&self, y: f64) -> f64 {
        let upper = smoothstep((y - self.y_chest) / (self.h - self.y_chest));
        self.s.spine_offset * (0.3 + 0.7 * self.blend(y) * (1.0 - 0.5 * upper))
    }

    /// Section point at azimuth `psi` (from anterior toward the left),
    /// `scale` times the section radius away from the centre.
    pub fn section_point(&self, y: f64, psi: f64, scale: f64) -> Vec3 {
        let (a, b) = self.half_axes(y);
        let x = a * sgn_pow(psi.sin(), self.exponent);
        let z = b * sgn_pow(psi.cos(), self.exponent);
        Vec3::new(scale * x, y, self.center_z(y) + scale * z)
    }

    /// Back-to-front rib parameter of azimuth `psi`; 0 at the spine, 1 at
    /// the sternum gap.
    fn rib_u(psi: f64) -> f64 {
        let p = psi.sin().atan2(psi.cos()).abs();
        (PI - p) / (PI - STERNUM_GAP)
    }

    fn rib_azimuth(side: Side, u: f64) -> f64 {
        let p = PI - u * (PI - STERNUM_GAP);
        match side {
            Side::Left => p,
            Side::Right => -p,
        }
    }

    pub fn rib_height(&self, k: usize, u: f64) -> f64 {
        self.rib_back[k] - RIB_SLOPE * self.gap * u
    }

    pub fn rib_thickness(&self) -> f64 {
        RIB_THICKNESS * self.gap
    }

    fn relief(&self, y: f64, psi: f64) -> f64 {
        let u = Self::rib_u(psi);
        let w = smoothstep(u / 0.2) * smoothstep((1.0 - u) / 0.15);
        if w == 0.0 {
            return 0.0;
        }
        let sigma = 0.25 * self.gap;
        let bumps: f64 = (0..RIBS_PER_SIDE)
            .map(|k| {
                let d = (y - self.rib_height(k, u)) / sigma;
                (-0.5 * d * d).exp()
            })
            .sum();
        w * bumps
    }

    pub fn skin_point(&self, y: f64, psi: f64, relief: f64) -> Vec3 {
        let scale = if relief == 0.0 { 1.0 } else { 1.0 + relief * self.relief(y, psi) };
        self.section_point(y, psi, scale)
    }
}

/// Maps local model points into the world for a pose.
#[derive(Debug, Clone)]
pub(crate) struct Deform {
    pose: PoseParams,
    global: Rotation3<f64>,
    h: f64,
    y_waist: f64,
    y_chest: f64,
    origin: Vec3,
    articulated: bool,
}

impl Deform {
    pub fn new(profile: &Profile, pose: &PoseParams) -> Self {
        Deform {
            pose: *pose,
            global: pose.global_rotation(),
            h: profile.h,
            y_waist: profile.y_waist,
            y_chest: profile.y_chest,
            origin: profile.origin(),
            articulated: pose.joints() != [0.0; 4],
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        if self.articulated {
            let y = p.y;
            let w_shoulder = smoothstep((y - self.y_chest) / (self.h - self.y_chest));
            if w_shoulder > 0.0 {
                let pivot = Vec3::new(0.0, self.y_chest, 0.0);
                q = pivot + Rotation3::from_axis_angle(&Vector3::z_axis(), self.pose.shoulder_tilt * w_shoulder) * (q - pivot);
            }
            // Trunk joints bend the two halves in opposite directions, so
            // they leave the mean orientation to the global rotation.
            let w = smoothstep((y - 0.25 * self.h) / (0.5 * self.h)) - 0.5;
            if w != 0.0 {
                let pivot = Vec3::new(0.0, self.y_waist, 0.0);
                let r = Rotation3::from_axis_angle(&Vector3::z_axis(), self.pose.lateral_bend * w)
                    * Rotation3::from_axis_angle(&Vector3::x_axis(), self.pose.flexion * w)
                    * Rotation3::from_axis_angle(&Vector3::y_axis(), self.pose.axial_twist * w);
                q = pivot + r * (q - pivot);
            }
        }
        self.global * (q - self.origin) + self.pose.translation
    }
}

/// Number of concentric rings closing each end of the loft.
fn cap_rings(res: usize) -> usize {
    (res / 4).max(2)
}

/// Rings in bottom-to-top order: bottom cap (inner to outer), the side
/// rings, then the top cap (outer to inner).
fn ring_count(opts: &ModelOptions) -> usize {
    2 * (cap_rings(opts.resolution) - 1) + opts.rings()
}

fn ring_index(res: usize, ring: usize, j: usize) -> usize {
    1 + ring * res + (j % res)
}

/// Skin vertex positions; the order matches [`skin_faces`].
pub(crate) fn skin_vertices(shape: &ShapeParams, pose: &PoseParams, opts: &ModelOptions) -> Vec<Vec3> {
    let profile = Profile::new(shape);
    let deform = Deform::new(&profile, pose);
    let res = opts.resolution;
    let rings = opts.rings();
    let caps = cap_rings(res);
    let psi = |j: usize| 2.0 * PI * j as f64 / res as f64;
    let mut v = Vec::with_capacity(ring_count(opts) * res + 2);
    v.push(Vec3::new(0.0, 0.0, profile.center_z(0.0)));
    for k in 1..caps {
        let f = k as f64 / caps as f64;
        v.extend((0..res).map(|j| profile.section_point(0.0, psi(j), f)));
    }
    for i in 0..rings {
        let y = profile.h * i as f64 / (rings - 1) as f64;
        v.extend((0..res).map(|j| profile.skin_point(y, psi(j), opts.rib_relief)));
    }
    for k in (1..caps).rev() {
        let f = k as f64 / caps as f64;
        v.extend((0..res).map(|j| profile.section_point(profile.h, psi(j), f)));
    }
    v.push(Vec3::new(0.0, profile.h, profile.center_z(profile.h)));
    v.iter().map(|p| deform.apply(p)).collect()
}

pub(crate) fn skin_faces(opts: &ModelOptions) -> Vec<[usize; 3]> {
    let res = opts.resolution;
    let rings = ring_count(opts);
    let top = rings * res + 1;
    let mut f = Vec::with_capacity(2 * res * rings);
    for j in 0..res {
        f.push([0, ring_index(res, 0, j + 1), ring_index(res, 0, j)]);
    }
    for i in 0..rings - 1 {
        for j in 0..res {
            let (a, b) = (ring_index(res, i, j), ring_index(res, i, j + 1));
            let (c, d) = (ring_index(res, i + 1, j), ring_index(res, i + 1, j + 1));
            f.push([a, b, c]);
            f.push([b, d, c]);
        }
    }
    for j in 0..res {
        f.push([top, ring_index(res, rings - 1, j), ring_index(res, rings - 1, j + 1)]);
    }
    f
}

/// Named landmarks in world coordinates.
pub(crate) fn landmarks(shape: &ShapeParams, pose: &PoseParams) -> BTreeMap<String, Vec3> {
    let p = Profile::new(shape);
    let d = Deform::new(&p, pose);
    let (a_sh, _) = p.half_axes(p.y_shoulder);
    let (_, b_ch) = p.half_axes(p.y_chest);
    let local = [
        Vec3::new(a_sh, p.y_shoulder, p.center_z(p.y_shoulder)),
        Vec3::new(-a_sh, p.y_shoulder, p.center_z(p.y_shoulder)),
        Vec3::new(0.0, p.y_chest, p.center_z(p.y_chest) + b_ch),
        Vec3::new(0.0, 0.0, p.center_z(0.0)),
        Vec3::new(0.0, p.y_chest, p.center_z(p.y_chest)),
        Vec3::new(0.0, p.y_waist, p.center_z(p.y_waist)),
    ];
    LANDMARK_NAMES.iter().zip(local).map(|(n, q)| (n.to_string(), d.apply(&q))).collect()
}

pub(crate) fn rib_ids() -> Vec<RibId> {
    [Side::Left, Side::Right]
        .into_iter()
        .flat_map(|side| (1..=RIBS_PER_SIDE as u8).map(move |index| RibId { side, index }))
        .collect()
}

/// Rib ribbon mesh and its border index sets. Indices depend only on the
/// constants above, never on the parameters.
fn rib_surface(p: &Profile, d: &Deform) -> (Vec<Vec3>, Vec<[usize; 3]>, Vec<RibBorder>) {
    let n = RIB_SAMPLES;
    let half = 0.5 * p.rib_thickness();
    let mut v = Vec::new();
    let mut f = Vec::new();
    let mut borders = Vec::new();
    for id in rib_ids() {
        let base = v.len();
        let k = id.index as usize - 1;
        let us: Vec<f64> = (0..n).map(|i| RIB_U.0 + (RIB_U.1 - RIB_U.0) * i as f64 / (n - 1) as f64).collect();
        for (edge, sign) in [(0, 1.0), (1, -1.0)] {
            let _ = edge;
            for &u in &us {
                let psi = Profile::rib_azimuth(id.side, u);
                let y = p.rib_height(k, u) + sign * half;
                v.push(d.apply(&p.section_point(y, psi, RIB_DEPTH)));
            }
        }
        for i in 0..n - 1 {
            let (s0, s1, i0, i1) = (base + i, base + i + 1, base + n + i, base + n + i + 1);
            f.push([s0, i0, i1]);
            f.push([s0, i1, s1]);
        }
        borders.push(RibBorder { id, superior: (base..base + n).collect(), inferior: (base + n..base + 2 * n).collect() });
    }
    (v, f, borders)
}

pub(crate) fn build(shape: &ShapeParams, pose: &PoseParams, opts: &ModelOptions) -> Result<BodyInstance, BodyError> {
    shape.validate()?;
    pose.validate()?;
    if opts.resolution < 16 {
        return Err(BodyError::Params(format!("resolution must be at least 16, got {}", opts.resolution)));
    }
    let profile = Profile::new(shape);
    let deform = Deform::new(&profile, pose);
    let skin = TriMesh::new(skin_vertices(shape, pose, opts), skin_faces(opts))?;
    let (rv, rf, rib_borders) = rib_surface(&profile, &deform);
    let rib_mesh = TriMesh::new(rv, rf)?;
    let y_mid = profile.rib_height(0, 0.0) - 0.5 * shape.rib_cage_extent;
    let s_local = Vec3::new(0.0, y_mid, 0.0);
    let eps = 1e-3 * shape.torso_height;
    let up = deform.apply(&(s_local + Vec3::y() * eps));
    let down = deform.apply(&(s_local - Vec3::y() * eps));
    Ok(BodyInstance {
        shape: *shape,
        pose: *pose,
        resolution: opts.resolution,
        skin,
        spine_center: deform.apply(&s_local),
        spine_axis: (up - down).normalize(),
        rib_mesh,
        rib_borders,
        landmarks: landmarks(shape, pose),
    })
}
