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


use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use super::analyze::{analyze, ExamMetrics};
use super::log::{LogHeader, SessionLog, LOG_FORMAT_VERSION};
use super::operator::{Observation, Operator, OperatorPlan, OperatorStep, Phase, ScriptedOperator};
use super::{HarnessError, Session};
use crate::body::Side;
use crate::sim::{Follower, FollowerConfig, FollowerFrame, LeaderSample, Wrench, DEPTH_QUERY};
use crate::Vec3;

/// Slack added to the per-area timeouts before a scripted run is cut off (s).
const RUN_SLACK: f64 = 60.0;

/// One control cycle of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFrame {
    pub t: f64,
    /// Raw leader reference.
    pub leader: Vec3,
    /// Reference after the fixture filter.
    pub filtered: Vec3,
    pub probe: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vec3,
    /// Wrench of the skin on the probe.
    pub wrench: Wrench,
    pub active_constraints: usize,
    pub clamped: bool,
    pub vf_enabled: bool,
    pub hold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    /// The operator judged the placement valid this cycle.
    #[serde(default)]
    pub valid: bool,
    /// The probe presses on skin over a rib.
    #[serde(default)]
    pub on_rib: bool,
}

impl SessionFrame {
    pub fn from_follower(f: &FollowerFrame) -> Self {
        SessionFrame {
            t: f.time,
            leader: f.leader,
            filtered: f.filtered,
            probe: f.state.position,
            orientation: f.state.orientation,
            velocity: f.state.velocity,
            wrench: f.state.wrench,
            active_constraints: f.active_constraints,
            clamped: f.clamped,
            vf_enabled: f.vf_enabled,
            hold: f.hold,
            fault: f.fault.clone(),
            area: None,
            phase: None,
            valid: false,
            on_rib: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub log: SessionLog,
    pub metrics: ExamMetrics,
    /// Aim plan of a scripted run.
    pub plan: Option<OperatorPlan>,
}

/// Scripted exam with the session seed and the fixture on or off.
pub fn run_replay(session: &Session, vf: bool) -> Result<ReplayOutput, HarnessError> {
    let cfg = &session.config;
    let plan = OperatorPlan::draw(&cfg.operator, cfg.seed);
    let mut op = ScriptedOperator::new(
        session.exam.clone(),
        cfg.operator.clone(),
        plan.clone(),
        session.start,
        cfg.follower.impedance.period,
        cfg.follower.filter.probe_radius,
    )?;
    let limit = cfg.operator.areas.len() as f64 * (cfg.operator.area_timeout + RUN_SLACK);
    let mut out = run_replay_with(session, &mut op, vf, Some(cfg.seed), limit)?;
    out.plan = Some(plan);
    Ok(out)
}

/// Drives the follower with `operator` until it reports done or
/// `max_duration` seconds have been simulated.
pub fn run_replay_with(
    session: &Session,
    operator: &mut dyn Operator,
    vf: bool,
    seed: Option<u64>,
    max_duration: f64,
) -> Result<ReplayOutput, HarnessError> {
    let cfg = FollowerConfig { vf_enabled: vf, ..session.config.follower };
    let r = cfg.filter.probe_radius;
    let mut follower = Follower::new(session.scene.clone(), cfg, session.start)?;
    let header = LogHeader {
        format_version: LOG_FORMAT_VERSION,
        period: cfg.impedance.period,
        start_time: 0.0,
        vf_enabled: vf,
        seed,
        areas: session.exam.areas.iter().map(|a| a.id).collect(),
        probe_radius: r,
        dwell: session.config.operator.dwell,
    };
    let mut frames = Vec::new();
    let mut obs = Observation { time: 0.0, probe: session.start, force: follower.state().wrench.force };
    let max_steps = (max_duration / cfg.impedance.period).ceil() as u64;
    let mut complete = false;
    for _ in 0..max_steps {
        let step: OperatorStep = operator.step(&obs);
        if step.done {
            complete = true;
            break;
        }
        let f = follower.step(step.leader.map(|position| LeaderSample { position }))?;
        let mut frame = SessionFrame::from_follower(&f);
        frame.area = step.area;
        frame.phase = step.phase;
        frame.valid = step.valid;
        frame.on_rib = !f.state.wrench.is_zero() && presses_on_rib(session, &f.state.position, r);
        obs = Observation { time: f.time, probe: f.state.position, force: f.state.wrench.force };
        frames.push(frame);
    }
    let log = SessionLog { header, frames, complete };
    let metrics = analyze(&log, None, 1).metrics;
    Ok(ReplayOutput { log, metrics, plan: None })
}

fn presses_on_rib(session: &Session, probe: &Vec3, r: f64) -> bool {
    let Some(cp) = session.exam.contact_point(probe, r + DEPTH_QUERY) else { return false };
    [Side::Left, Side::Right].into_iter().any(|side| session.exam.rib_clearance(side, &cp) < 0.0)
}
