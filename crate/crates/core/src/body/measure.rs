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


use serde::{Deserialize, Serialize};

use super::BodyInstance;
use crate::geometry::Plane;

/// Anthropometric measurements in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    /// Chest circumference.
    pub cc: f64,
    /// Waist circumference.
    pub wc: f64,
    /// Shoulder-to-crotch height along the spine axis.
    pub sch: f64,
}

/// Circumferences are perimeters of the skin cut by the plane normal to
/// the spine axis through the chest and waist landmarks.
pub fn measure(body: &BodyInstance) -> Measurements {
    let axis = body.spine_axis;
    let lm = |n: &str| body.landmarks[n];
    let cut = |n: &str| Plane::new(axis, lm(n)).map(|p| body.skin.slice_length(&p)).unwrap_or(0.0);
    let shoulders = 0.5 * (lm("shoulder_left") + lm("shoulder_right"));
    Measurements { cc: cut("chest"), wc: cut("waist"), sch: (shoulders - lm("crotch")).dot(&axis) }
}
