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


use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use super::contact::{contact_wrench, ContactModel};
use super::impedance::{ImpedanceModel, ImpedanceParams};
use super::latest::Latest;
use super::{ProbeState, SimError};
use crate::geometry::MeshIndex;
use crate::vf::{FilterConfig, FilterError, Fixture, ReferenceFilter};
use crate::Vec3;

/// Immutable geometry shared by the follower and its observers.
#[derive(Debug)]
pub struct Scene {
    pub skin: MeshIndex,
    pub fixture: Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowerConfig {
    pub impedance: ImpedanceParams,
    pub contact: ContactModel,
    pub filter: FilterConfig,
    pub vf_enabled: bool,
    /// Seconds without a leader sample before holding position.
    pub starvation_timeout: f64,
    pub exam_orientation: UnitQuaternion<f64>,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        FollowerConfig {
            impedance: ImpedanceParams::default(),
            contact: ContactModel::default(),
            filter: FilterConfig::default(),
            vf_enabled: true,
            starvation_timeout: 0.1,
            exam_orientation: UnitQuaternion::identity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderSample {
    pub position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FollowerCommand {
    SetVf(bool),
    /// Teleport probe, filter and leader reference to `position`, at rest.
    Reset(Vec3),
}

/// One control cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerFrame {
    pub step: u64,
    pub time: f64,
    pub leader: Vec3,
    pub filtered: Vec3,
    pub state: ProbeState,
    pub active_constraints: usize,
    pub clamped: bool,
    pub vf_enabled: bool,
    pub hold: bool,
    /// Penetration fault reported by the filter this cycle.
    pub fault: Option<String>,
}

/// Fixed-rate follower loop body.
#[derive(Debug, Clone)]
pub struct Follower {
    scene: Arc<Scene>,
    cfg: FollowerConfig,
    model: ImpedanceModel,
    filter: ReferenceFilter,
    state: ProbeState,
    step: u64,
    leader: Vec3,
    last_leader_step: u64,
}

impl Follower {
    pub fn new(scene: Arc<Scene>, cfg: FollowerConfig, start: Vec3) -> Result<Self, SimError> {
        cfg.filter.validate().map_err(|e| SimError::Params(e.to_string()))?;
        if !(cfg.starvation_timeout > 0.0) {
            return Err(SimError::Params("starvation_timeout must be positive".into()));
        }
        let model = ImpedanceModel::new(cfg.impedance)?;
        let mut f = Follower {
            filter: ReferenceFilter::new(start, cfg.vf_enabled, cfg.filter),
            scene,
            cfg,
            model,
            state: ProbeState::at_rest(start),
            step: 0,
            leader: start,
            last_leader_step: 0,
        };
        f.state.orientation = cfg.exam_orientation;
        f.state.wrench = f.contact(&f.state);
        Ok(f)
    }

    fn contact(&self, s: &ProbeState) -> super::Wrench {
        contact_wrench(s, &self.scene.skin, self.cfg.filter.probe_radius, &self.cfg.contact)
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn config(&self) -> &FollowerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ProbeState {
        &self.state
    }

    pub fn filtered(&self) -> Vec3 {
        self.filter.position()
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.impedance.period
    }

    pub fn apply(&mut self, cmd: FollowerCommand) {
        match cmd {
            FollowerCommand::SetVf(on) => self.filter.set_enabled(on),
            FollowerCommand::Reset(p) => {
                self.state = ProbeState { orientation: self.cfg.exam_orientation, ..ProbeState::at_rest(p) };
                self.state.wrench = self.contact(&self.state);
                self.filter.reset(p);
                self.leader = p;
                self.last_leader_step = self.step;
            }
        }
    }

    /// Runs one period, ingesting `leader` if a fresh sample arrived.
    pub fn step(&mut self, leader: Option<LeaderSample>) -> Result<FollowerFrame, SimError> {
        self.step += 1;
        if let Some(s) = leader {
            self.leader = s.position;
            self.last_leader_step = self.step;
        }
        let dt = self.cfg.impedance.period;
        let hold = (self.step - self.last_leader_step) as f64 * dt > self.cfg.starvation_timeout;
        let (mut active, mut clamped, mut fault) = (0, false, None);
        if !hold {
            match self.filter.update(&self.leader, &self.scene.fixture) {
                Ok(out) => {
                    if let Some(r) = out.result {
                        active = r.active.len();
                        clamped = r.clamped;
                    }
                }
                Err(e @ FilterError::Penetration { .. }) => fault = Some(e.to_string()),
                Err(e) => return Err(SimError::Params(e.to_string())),
            }
        }
        let target = self.filter.position();
        let mut next = self.model.step(&self.state, &target, &self.state.wrench.force, &self.cfg.exam_orientation)?;
        next.wrench = self.contact(&next);
        self.state = next;
        Ok(FollowerFrame {
            step: self.step,
            time: self.time(),
            leader: self.leader,
            filtered: target,
            state: self.state,
            active_constraints: active,
            clamped,
            vf_enabled: self.filter.enabled(),
            hold,
            fault,
        })
    }
}

/// Running follower thread.
pub struct FollowerHandle {
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<Result<Follower, SimError>>>,
}

impl FollowerHandle {
    /// Stops the loop and returns the follower, or the fault that ended it.
    pub fn stop(mut self) -> Result<Follower, SimError> {
        self.stop.store(true, Ordering::SeqCst);
        self.join.take().expect("joined once").join().expect("follower thread panicked")
    }

    pub fn is_finished(&self) -> bool {
        self.join.as_ref().map_or(true, |j| j.is_finished())
    }
}

impl Drop for FollowerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

/// Runs `follower` on its own thread at the control rate (or as fast as
/// possible when `realtime` is false), reading the newest leader sample
/// each cycle and publishing every frame.
pub fn spawn_follower(
    mut follower: Follower,
    leader: Arc<Latest<LeaderSample>>,
    frames: Arc<Latest<FollowerFrame>>,
    commands: Receiver<FollowerCommand>,
    realtime: bool,
) -> FollowerHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let join = std::thread::spawn(move || {
        let period = Duration::from_secs_f64(follower.config().impedance.period);
        let start = Instant::now();
        let mut seen = 0;
        let mut k: u32 = 0;
        while !flag.load(Ordering::SeqCst) {
            while let Ok(cmd) = commands.try_recv() {
                follower.apply(cmd);
            }
            let sample = leader.newer_than(seen).map(|(seq, s)| {
                seen = seq;
                s
            });
            let frame = follower.step(sample)?;
            frames.publish(frame);
            k = k.wrapping_add(1);
            if realtime {
                let due = start + period * k;
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                }
            }
        }
        Ok(follower)
    });
    FollowerHandle { stop, join: Some(join) }
}
