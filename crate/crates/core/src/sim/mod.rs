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


//! Virtual follower robot.
//!
//! The end effector is a mass-spring-damper about the filtered reference,
//! `Λẍ = K(x_d − x) − Dẋ + F_ext`, where `F_ext` is the force the skin
//! exerts on the probe. Orientation is not part of the impedance loop; it
//! relaxes toward a fixed exam orientation.

mod contact;
mod follower;
mod impedance;
mod latest;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

pub use contact::{contact_wrench, ContactModel, DEPTH_QUERY};
pub use follower::{spawn_follower, Follower, FollowerCommand, FollowerConfig, FollowerFrame, FollowerHandle, LeaderSample, Scene};
pub use impedance::{ImpedanceModel, ImpedanceParams, Integrator};
pub use latest::Latest;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("integration fault: tracking error {error:.3e} m exceeds bound {bound:.3e} m")]
    IntegrationFault { error: f64, bound: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Wrench::default()
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vec3::zeros() && self.torque == Vec3::zeros()
    }
}

/// End-effector state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vec3,
    /// Wrench the environment applies to the probe.
    pub wrench: Wrench,
}

impl ProbeState {
    pub fn at_rest(position: Vec3) -> Self {
        ProbeState { position, orientation: UnitQuaternion::identity(), velocity: Vec3::zeros(), wrench: Wrench::zero() }
    }
}
