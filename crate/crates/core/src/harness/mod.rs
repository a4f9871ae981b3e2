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


//! Session engine: scripted or recorded exams replayed through the
//! follower, frame logs, metrics, and the live session endpoint.
//!
//! A [`Session`] bundles everything a run needs: the generated body, its
//! rib fixtures, the follower scene and the exam areas on the skin.

mod analyze;
mod exam;
mod log;
mod operator;
pub mod protocol;
mod replay;
mod server;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::{generate_body, BodyError, BodyInstance, PoseParams, ShapeParams, DEFAULT_RESOLUTION};
use crate::geometry::{GeometryError, MeshIndex};
use crate::ribs::{build_all_fixtures, FixtureSet, RibError, TubeConfig};
use crate::sim::{FollowerConfig, Scene, SimError};
use crate::Vec3;

pub use analyze::{analyze, AreaMetrics, ExamMetrics, PlotSeries, Report, SafetyAudit};
pub use exam::{area_ribs, Exam, ExamArea, AREA_ORDER};
pub use log::{LogHeader, SessionLog, LOG_FORMAT_VERSION};
pub use operator::{Observation, Operator, OperatorConfig, OperatorPlan, OperatorStep, Phase, RecordedOperator, ScriptedOperator};
pub use replay::{run_replay, run_replay_with, ReplayOutput, SessionFrame};
pub use server::{serve, ServerHandle};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Ribs(#[from] RibError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("log: {0}")]
    Log(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a replay or a live session is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub shape: ShapeParams,
    pub pose: PoseParams,
    pub resolution: usize,
    pub tubes: TubeConfig,
    pub follower: FollowerConfig,
    pub operator: OperatorConfig,
    pub seed: u64,
    /// State frames per second sent to viewers.
    pub frame_rate: f64,
    /// Distance of the start position in front of the sternum (m).
    pub start_clearance: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            shape: ShapeParams::default(),
            pose: PoseParams::default(),
            resolution: DEFAULT_RESOLUTION,
            tubes: TubeConfig::default(),
            follower: FollowerConfig::default(),
            operator: OperatorConfig::default(),
            seed: 0,
            frame_rate: 60.0,
            start_clearance: 0.08,
        }
    }
}

impl SessionConfig {
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let cfg: SessionConfig = serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.shape.validate()?;
        self.pose.validate()?;
        self.tubes.validate()?;
        self.follower.filter.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.follower.impedance.validate()?;
        self.operator.validate()?;
        if !(self.frame_rate >= 30.0 && self.frame_rate.is_finite()) {
            return Err(HarnessError::Config(format!("frame_rate must be at least 30 Hz, got {}", self.frame_rate)));
        }
        if !(self.start_clearance > self.follower.filter.probe_radius) {
            return Err(HarnessError::Config("start_clearance must exceed the probe radius".into()));
        }
        Ok(())
    }
}

/// Built geometry of one session.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: SessionConfig,
    pub body: BodyInstance,
    pub fixtures: FixtureSet,
    pub scene: Arc<Scene>,
    pub exam: Arc<Exam>,
    /// Probe position at the start of every run.
    pub start: Vec3,
}

impl Session {
    pub fn build(config: SessionConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let body = generate_body(&config.shape, &config.pose, config.resolution)?;
        let fixtures = build_all_fixtures(&body, &config.tubes)?;
        let skin = MeshIndex::new(body.skin.clone());
        let scene = Arc::new(Scene { skin: skin.clone(), fixture: fixtures.fixture()? });
        let exam = Arc::new(Exam::new(&body, &fixtures, skin, &config.operator)?);
        let sternum = body.landmark("sternum").ok_or_else(|| HarnessError::Config("body has no sternum landmark".into()))?;
        let normal = exam.skin_normal(&sternum);
        let start = sternum + normal * config.start_clearance;
        Ok(Session { config, body, fixtures, scene, exam, start })
    }
}
