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

use super::{ProbeState, Wrench};
use crate::geometry::MeshIndex;

/// How far below the probe surface contact is still resolved (m). Deeper
/// positions read as no contact, so this bounds the detectable indentation.
pub const DEPTH_QUERY: f64 = 0.05;

/// Penalty contact law between the spherical probe and the skin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactModel {
    /// N/m
    pub stiffness: f64,
    /// N·s/m along the normal
    pub damping: f64,
    /// Coulomb coefficient capping the tangential force.
    pub friction: f64,
    /// N·s/m, viscous tangential drag below the Coulomb cap.
    pub friction_viscosity: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        ContactModel { stiffness: 500.0, damping: 5.0, friction: 0.3, friction_viscosity: 50.0 }
    }
}

/// Wrench of the skin on a probe of radius `r`. Zero out of contact.
pub fn contact_wrench(state: &ProbeState, skin: &MeshIndex, r: f64, cm: &ContactModel) -> Wrench {
    let x = state.position;
    let Some((cp, signed, pseudo)) = skin.signed_closest(&x, r + DEPTH_QUERY) else {
        return Wrench::zero();
    };
    let depth = r - signed;
    if depth <= 0.0 {
        return Wrench::zero();
    }
    let offset = x - cp.point;
    let n = if cp.distance > 1e-9 { offset / cp.distance * signed.signum() } else { pseudo };
    let vn = state.velocity.dot(&n);
    let normal = (cm.stiffness * depth - cm.damping * vn).max(0.0);
    let vt = state.velocity - n * vn;
    let mut tangential = -vt * cm.friction_viscosity;
    let cap = cm.friction * normal;
    let t = tangential.norm();
    if t > cap {
        tangential *= cap / t;
    }
    let force = n * normal + tangential;
    let torque = (cp.point - x).cross(&force);
    Wrench { force, torque }
}
