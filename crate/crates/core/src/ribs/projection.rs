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


use super::RibError;
use crate::body::{BodyInstance, RibId};
use crate::geometry::TriMesh;
use crate::Vec3;

/// Back-off of the ray origin along the ray, so a vertex lying on the
/// skin still registers its own hit.
const RAY_BACKOFF: f64 = 1e-7;

/// Projects `v` onto `skin` along the ray from the spine axis through `v`.
///
/// The spine point is first slid along `axis` to the axial coordinate of
/// `v`, so the ray is perpendicular to the axis and the projection keeps
/// the axial coordinate.
pub fn project_onto_skin(skin: &TriMesh, spine: &Vec3, axis: &Vec3, v: &Vec3) -> Option<Vec3> {
    let axis = axis.try_normalize(1e-300)?;
    let level = spine + axis * (v - spine).dot(&axis);
    let dir = (v - level).try_normalize(1e-12)?;
    let origin = v - dir * RAY_BACKOFF;
    skin.raycast(&origin, &dir).map(|hit| origin + dir * hit.t)
}

/// On-skin `(superior, inferior)` samples of one rib, in the border order
/// (spine toward sternum).
pub fn project_rib_vertices(body: &BodyInstance, id: RibId) -> Result<(Vec<Vec3>, Vec<Vec3>), RibError> {
    let border = body.rib_border(id).ok_or(RibError::UnknownRib(id))?;
    let verts = body.rib_mesh.vertices();
    let project = |indices: &[usize]| -> Result<Vec<Vec3>, RibError> {
        indices
            .iter()
            .map(|&i| {
                project_onto_skin(&body.skin, &body.spine_center, &body.spine_axis, &verts[i])
                    .ok_or(RibError::ProjectionMiss { rib: id, vertex: i })
            })
            .collect()
    };
    Ok((project(&border.superior)?, project(&border.inferior)?))
}
