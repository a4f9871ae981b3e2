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


//! Forbidden-region filtering of reference motion.
//!
//! Each control cycle the fixture faces near the current position are turned
//! into half-space constraints on the increment Δx (one plane per face,
//! chosen by where the face's closest point lies and how the surface bends
//! there), and the commanded increment is replaced by the nearest admissible
//! one. The probe is a sphere of radius `r`, so the planes are pushed out by
//! `r`: the centre stays outside the fixture dilated by the probe radius.

mod constraints;
mod filter;
pub mod qp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

pub use constraints::{build_constraints, build_constraints_for_step, Condition, ConstraintRow, ConstraintSet, Fixture, Provenance};
pub use filter::{filter_step, solve_qp, FilterOutput, FilterResult, ReferenceFilter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("position is {depth:.4} m inside the offset surface (face {face})")]
    Penetration { face: usize, depth: f64 },
    #[error("step of {step:.4} m exceeds the cull margin of {limit:.4} m")]
    StepTooLarge { step: f64, limit: f64 },
    #[error("invalid filter config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Probe radius `r` (m).
    pub probe_radius: f64,
    /// Faces whose closest point is farther than this are ignored (m).
    pub cull_radius: f64,
    /// Largest reference increment accepted per cycle (m).
    pub max_step: f64,
    pub max_constraints: usize,
    pub solver_tolerance: f64,
    /// Slack below `r` tolerated before reporting a penetration (m).
    pub penetration_tolerance: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            probe_radius: 0.01,
            cull_radius: 0.02,
            max_step: 0.005,
            max_constraints: 64,
            solver_tolerance: 1e-9,
            penetration_tolerance: 1e-3,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |m: &str| Err(FilterError::Config(m.to_string()));
        if !(self.probe_radius > 0.0) {
            return bad("probe_radius must be positive");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if !(self.cull_radius > self.probe_radius + self.max_step) {
            return bad("cull_radius must exceed probe_radius + max_step");
        }
        if self.max_constraints < 16 {
            return bad("max_constraints must be at least 16");
        }
        if !(self.solver_tolerance > 0.0) || !(self.penetration_tolerance >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }
}
