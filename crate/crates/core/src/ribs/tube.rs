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


use std::f64::consts::PI;

use super::curve::RibCurve;
use super::{RibError, TubeConfig};
use crate::body::RibId;
use crate::geometry::TriMesh;
use crate::Vec3;

/// Closed tube of elliptical cross-section swept along a rib's central
/// curve.
///
/// The minor axis lies across the rib in the skin surface; the major axis
/// is perpendicular to it and to the curve, i.e. along the skin normal.
#[derive(Debug, Clone, PartialEq)]
pub struct VFTube {
    pub id: RibId,
    pub mesh: TriMesh,
    /// Full length of the minor axis (m).
    pub minor_axis: f64,
    /// Full length of the major axis (m); always twice the minor axis.
    pub major_axis: f64,
}

/// Rotation-minimising frames by double reflection, started from
/// `reference` made orthogonal to the first tangent.
pub fn rotation_minimizing_frames(points: &[Vec3], tangents: &[Vec3], reference: &Vec3) -> Vec<Vec3> {
    let t0 = tangents[0];
    let mut r = (reference - t0 * reference.dot(&t0)).normalize();
    let mut frames = Vec::with_capacity(points.len());
    frames.push(r);
    for i in 0..points.len() - 1 {
        let v1 = points[i + 1] - points[i];
        let c1 = v1.dot(&v1);
        if c1 == 0.0 {
            frames.push(r);
            continue;
        }
        let r_l = r - v1 * (2.0 / c1 * v1.dot(&r));
        let t_l = tangents[i] - v1 * (2.0 / c1 * v1.dot(&tangents[i]));
        let v2 = tangents[i + 1] - t_l;
        let c2 = v2.dot(&v2);
        r = if c2 == 0.0 { r_l } else { r_l - v2 * (2.0 / c2 * v2.dot(&r_l)) };
        frames.push(r);
    }
    frames
}

/// Sweeps the tube for `curve`. Axis lengths follow from the mean border
/// separation and `config.c_prop`.
pub fn build_tube(curve: &RibCurve, config: &TubeConfig) -> Result<VFTube, RibError> {
    config.validate()?;
    let minor = config.c_prop * curve.mean_width();
    let major = 2.0 * minor;
    if !(minor > 0.0) || !minor.is_finite() {
        return Err(RibError::Degenerate { rib: curve.id, reason: format!("minor axis {minor:e}") });
    }
    let (semi_major, semi_minor) = (0.5 * major, 0.5 * minor);
    let n = config.segments;
    let ts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    for k in 0..2 * n + 1 {
        let t = k as f64 / (2 * n) as f64;
        let rho = curve.central.curvature_radius(t);
        if rho < semi_major {
            return Err(RibError::Degenerate {
                rib: curve.id,
                reason: format!("curvature radius {rho:.4} m below the {semi_major:.4} m semi-axis at t = {t:.3}"),
            });
        }
    }
    let centres: Vec<Vec3> = ts.iter().map(|&t| curve.central.eval(t)).collect();
    let mut tangents = Vec::with_capacity(ts.len());
    for (&t, _) in ts.iter().zip(&centres) {
        let d = curve.central.derivative(t);
        tangents.push(d.try_normalize(1e-300).ok_or_else(|| RibError::Degenerate {
            rib: curve.id,
            reason: format!("zero tangent at t = {t:.3}"),
        })?);
    }
    let across = |i: usize| curve.superior.eval(ts[i]) - curve.inferior.eval(ts[i]);
    let frames = rotation_minimizing_frames(&centres, &tangents, &across(0));

    let sides = config.ring_sides;
    let mut vertices = Vec::with_capacity((n + 1) * sides + 2);
    vertices.push(centres[0]);
    let mut prev_phi = 0.0;
    for i in 0..=n {
        let t = tangents[i];
        let r = frames[i];
        let s = t.cross(&r);
        let w = across(i);
        let w = w - t * w.dot(&t);
        // angle of the across-rib direction in the transported frame; the
        // ellipse is symmetric under half turns, so stay nearest the last
        let mut phi = w.dot(&s).atan2(w.dot(&r));
        while phi - prev_phi > 0.5 * PI {
            phi -= PI;
        }
        while phi - prev_phi < -0.5 * PI {
            phi += PI;
        }
        prev_phi = phi;
        let m = r * phi.cos() + s * phi.sin();
        let nrm = t.cross(&m);
        for k in 0..sides {
            let th = 2.0 * PI * k as f64 / sides as f64;
            vertices.push(centres[i] + nrm * (semi_major * th.cos()) + m * (semi_minor * th.sin()));
        }
    }
    vertices.push(centres[n]);
    let last = vertices.len() - 1;
    let ring = |i: usize, k: usize| 1 + i * sides + k % sides;
    let mut faces = Vec::with_capacity(2 * sides * (n + 1));
    for k in 0..sides {
        faces.push([0, ring(0, k + 1), ring(0, k)]);
        faces.push([last, ring(n, k), ring(n, k + 1)]);
    }
    for i in 0..n {
        let axis = (centres[i] + centres[i + 1]) * 0.5;
        for k in 0..sides {
            let (a, b, c, d) = (ring(i, k), ring(i, k + 1), ring(i + 1, k + 1), ring(i + 1, k));
            // twisted rings make the quads non-planar; split along the
            // diagonal that folds outward so the tube has no false creases
            if folds_outward(&vertices, &axis, [a, b, d], c) {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            } else {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    let mut mesh = TriMesh::new(vertices, faces)?;
    if mesh.signed_volume() < 0.0 {
        mesh = mesh.flipped();
    }
    Ok(VFTube { id: curve.id, mesh, minor_axis: minor, major_axis: major })
}

/// True when `opposite` lies on the inner side of triangle `tri`, the
/// outside being away from `axis`.
fn folds_outward(v: &[Vec3], axis: &Vec3, tri: [usize; 3], opposite: usize) -> bool {
    let (p, q, r) = (v[tri[0]], v[tri[1]], v[tri[2]]);
    let mut n = (q - p).cross(&(r - p));
    if n.dot(&((p + q + r) / 3.0 - axis)) < 0.0 {
        n = -n;
    }
    n.dot(&(v[opposite] - p)) <= 0.0
}
