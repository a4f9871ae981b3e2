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


use super::{HarnessError, OperatorConfig};
use crate::body::{BodyInstance, RibId, Side};
use crate::geometry::{segment_segment_closest, MeshIndex};
use crate::ribs::{project_onto_skin, FixtureSet};
use crate::Vec3;

/// Standard visiting order of the four anterior areas.
pub const AREA_ORDER: [u8; 4] = [11, 12, 14, 13];

/// Stations per rib polyline used for the on-rib test.
const RIB_STATIONS: usize = 101;

/// Side and the (upper, lower) rib pair bounding an exam area. Areas 11
/// and 13 sit low on the right and left, 12 and 14 high.
pub fn area_ribs(area: u8) -> Option<(Side, u8, u8)> {
    match area {
        11 => Some((Side::Right, 4, 5)),
        12 => Some((Side::Right, 2, 3)),
        13 => Some((Side::Left, 4, 5)),
        14 => Some((Side::Left, 2, 3)),
        _ => None,
    }
}

/// One intercostal target on the skin.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamArea {
    pub id: u8,
    pub upper: RibId,
    pub lower: RibId,
    pub target: Vec3,
    /// Outward skin normal at the target.
    pub normal: Vec3,
    /// Unit tangent pointing across the gap toward the lower rib.
    pub toward_lower: Vec3,
    /// Unit tangent along the ribs.
    pub along: Vec3,
}

#[derive(Debug, Clone)]
struct RibPath {
    side: Side,
    points: Vec<Vec3>,
    half_width: f64,
}

/// Exam areas with the geometry needed to judge a placement.
#[derive(Debug, Clone)]
pub struct Exam {
    pub areas: Vec<ExamArea>,
    pub patch_radius: f64,
    skin: MeshIndex,
    spine_center: Vec3,
    spine_axis: Vec3,
    ribs: Vec<RibPath>,
}

impl Exam {
    pub fn new(body: &BodyInstance, fixtures: &FixtureSet, skin: MeshIndex, op: &OperatorConfig) -> Result<Self, HarnessError> {
        let ribs = fixtures
            .curves
            .iter()
            .map(|c| RibPath {
                side: c.id.side,
                points: (0..RIB_STATIONS).map(|i| c.central.eval(i as f64 / (RIB_STATIONS - 1) as f64)).collect(),
                half_width: 0.5 * c.mean_width(),
            })
            .collect();
        let mut exam = Exam {
            areas: Vec::new(),
            patch_radius: op.patch_radius,
            skin,
            spine_center: body.spine_center,
            spine_axis: body.spine_axis,
            ribs,
        };
        for &id in &op.areas {
            let (side, hi, lo) = area_ribs(id).ok_or_else(|| HarnessError::Config(format!("unknown exam area {id}")))?;
            let upper = RibId { side, index: hi };
            let lower = RibId { side, index: lo };
            let curve = |r: RibId| fixtures.curve(r).ok_or_else(|| HarnessError::Config(format!("no curve for {r}")));
            let (a, b) = (curve(upper)?.central.eval(op.target_t), curve(lower)?.central.eval(op.target_t));
            let target = exam
                .project((a + b) * 0.5)
                .ok_or_else(|| HarnessError::Config(format!("area {id} target misses the skin")))?;
            let normal = exam.skin_normal(&target);
            let across = b - a;
            let toward_lower = (across - normal * across.dot(&normal)).normalize();
            let along = normal.cross(&toward_lower);
            exam.areas.push(ExamArea { id, upper, lower, target, normal, toward_lower, along });
        }
        Ok(exam)
    }

    pub fn area(&self, id: u8) -> Option<&ExamArea> {
        self.areas.iter().find(|a| a.id == id)
    }

    pub fn skin(&self) -> &MeshIndex {
        &self.skin
    }

    /// Radial projection of `v` onto the skin along the ray from the spine
    /// axis. `v` may lie on either side of the skin.
    pub fn project(&self, v: Vec3) -> Option<Vec3> {
        let level = self.spine_center + self.spine_axis * (v - self.spine_center).dot(&self.spine_axis);
        let inner = level + (v - level) * 0.5;
        project_onto_skin(self.skin.mesh(), &self.spine_center, &self.spine_axis, &inner)
    }

    /// Outward normal of the skin feature nearest to `p`.
    pub fn skin_normal(&self, p: &Vec3) -> Vec3 {
        let mut radius = 0.05;
        loop {
            if let Some(cp) = self.skin.closest_point(p, radius) {
                return self.skin.pseudo_normal(&cp);
            }
            radius *= 2.0;
        }
    }

    /// Skin point under a probe centred at `probe`, if the skin is within
    /// `reach`.
    pub fn contact_point(&self, probe: &Vec3, reach: f64) -> Option<Vec3> {
        self.skin.closest_point(probe, reach).map(|p| p.point)
    }

    /// Distance from `p` to the nearest rib centre line on `side`, minus
    /// that rib's half width (negative on the rib).
    pub fn rib_clearance(&self, side: Side, p: &Vec3) -> f64 {
        self.ribs
            .iter()
            .filter(|r| r.side == side)
            .map(|r| polyline_distance(&r.points, p) - r.half_width)
            .fold(f64::INFINITY, f64::min)
    }

    /// Skin point `p` lies in the intercostal patch of `area`.
    pub fn in_patch(&self, area: &ExamArea, p: &Vec3) -> bool {
        (p - area.target).norm() <= self.patch_radius && self.rib_clearance(area.upper.side, p) > 0.0
    }

    /// Skin point offset from the area target by `(across, along)` metres
    /// in the tangent plane, with its normal.
    pub fn aim(&self, area: &ExamArea, across: f64, along: f64) -> Option<(Vec3, Vec3)> {
        let p = self.project(area.target + area.toward_lower * across + area.along * along)?;
        Some((p, self.skin_normal(&p)))
    }

    /// Path from `from` to `to` (both at `standoff` above the skin) that
    /// keeps that standoff: heights along the spine axis and azimuths
    /// about it are interpolated linearly and each station is lifted off
    /// the skin along the local normal. Stations are at most `step` apart
    /// before lifting.
    pub fn standoff_path(&self, from: &Vec3, to: &Vec3, standoff: f64, step: f64) -> Vec<Vec3> {
        let axis = self.spine_axis;
        let cyl = |p: &Vec3| {
            let rel = p - self.spine_center;
            let h = rel.dot(&axis);
            let radial = rel - axis * h;
            (h, radial)
        };
        let (h0, r0) = cyl(from);
        let (h1, r1) = cyl(to);
        let (e1, e2) = basis(&axis, &r0);
        let theta = |r: &Vec3| r.dot(&e2).atan2(r.dot(&e1));
        let (t0, mut t1) = (theta(&r0), theta(&r1));
        if t1 - t0 > std::f64::consts::PI {
            t1 -= 2.0 * std::f64::consts::PI;
        } else if t0 - t1 > std::f64::consts::PI {
            t1 += 2.0 * std::f64::consts::PI;
        }
        let mean_radius = 0.5 * (r0.norm() + r1.norm());
        let arc = ((h1 - h0).powi(2) + ((t1 - t0) * mean_radius).powi(2)).sqrt();
        let n = ((arc / step).ceil() as usize).max(1);
        let mut path = Vec::with_capacity(n + 1);
        path.push(*from);
        for i in 1..n {
            let s = i as f64 / n as f64;
            let h = h0 + (h1 - h0) * s;
            let t = t0 + (t1 - t0) * s;
            let dir = e1 * t.cos() + e2 * t.sin();
            let probe = self.spine_center + axis * h + dir * mean_radius;
            match self.project(probe) {
                Some(p) => path.push(p + self.skin_normal(&p) * standoff),
                None => continue,
            }
        }
        path.push(*to);
        path
    }
}

fn basis(axis: &Vec3, radial: &Vec3) -> (Vec3, Vec3) {
    let e1 = radial.try_normalize(1e-12).unwrap_or_else(|| {
        let pick = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        (pick - axis * pick.dot(axis)).normalize()
    });
    (e1, axis.cross(&e1))
}

fn polyline_distance(points: &[Vec3], p: &Vec3) -> f64 {
    points
        .windows(2)
        .map(|w| {
            let (on_segment, _) = segment_segment_closest(&w[0], &w[1], p, p);
            (on_segment - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}
