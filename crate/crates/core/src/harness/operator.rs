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


use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::exam::{Exam, AREA_ORDER};
use super::HarnessError;
use crate::sim::DEPTH_QUERY;
use crate::Vec3;

/// What the operator is doing during a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Travelling to the next area at standoff height.
    Transit,
    /// Descending along the skin normal toward the aim point.
    Approach,
    /// Holding still on the skin.
    Contact,
    /// Backing off and re-aiming within the same area.
    Correction,
    Finished,
}

impl Phase {
    /// Phases charged to the current area rather than to transit.
    pub fn in_area(self) -> bool {
        matches!(self, Phase::Approach | Phase::Contact | Phase::Correction)
    }
}

/// Follower state the operator reacts to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Time of the last completed cycle (0 before the first).
    pub time: f64,
    pub probe: Vec3,
    /// Contact force on the probe.
    pub force: Vec3,
}

/// Operator output for the next cycle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OperatorStep {
    /// Fresh leader sample, if any.
    pub leader: Option<Vec3>,
    pub area: Option<u8>,
    pub phase: Option<Phase>,
    /// The placement observed in this cycle satisfies the area's predicate.
    pub valid: bool,
    /// No more cycles are needed.
    pub done: bool,
}

/// Source of leader references.
pub trait Operator {
    fn step(&mut self, obs: &Observation) -> OperatorStep;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    /// Areas in visiting order.
    pub areas: Vec<u8>,
    /// Curve parameter of the targets, 0 at the spine and 1 at the sternum.
    pub target_t: f64,
    /// Placements farther than this from the target are invalid (m).
    pub patch_radius: f64,
    /// Height above the skin for travel and re-aiming (m).
    pub standoff: f64,
    pub transit_speed: f64,
    pub approach_speed: f64,
    pub retract_speed: f64,
    /// Descent stops once the contact force reaches this (N).
    pub contact_force: f64,
    /// Minimum force for a placement to count as contact (N).
    pub valid_force: f64,
    /// Descent beyond the standoff after which the approach is abandoned (m).
    pub overtravel: f64,
    /// Continuous valid contact required per area (s).
    pub dwell: f64,
    /// Invalid contact tolerated before backing off (s).
    pub correction_delay: f64,
    /// Systematic aiming error toward the lower rib (m).
    pub bias: f64,
    /// Standard deviation of the per-attempt aiming jitter, per axis (m).
    pub jitter: f64,
    /// Fraction of the bias that remains after a correction.
    pub correction_bias: f64,
    /// Attempts drawn per area; the last one is reused if exhausted.
    pub attempts: usize,
    /// Time allowed per area before it is recorded as failed (s).
    pub area_timeout: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            areas: AREA_ORDER.to_vec(),
            target_t: 0.85,
            patch_radius: 0.02,
            standoff: 0.03,
            transit_speed: 0.1,
            approach_speed: 0.02,
            retract_speed: 0.05,
            contact_force: 2.0,
            valid_force: 1.0,
            overtravel: 0.03,
            dwell: 2.0,
            correction_delay: 1.0,
            bias: 0.018,
            jitter: 0.005,
            correction_bias: 0.3,
            attempts: 8,
            area_timeout: 30.0,
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(format!("operator: {m}")));
        if self.areas.is_empty() {
            return bad("at least one area is required");
        }
        let positive = [
            self.patch_radius,
            self.standoff,
            self.transit_speed,
            self.approach_speed,
            self.retract_speed,
            self.contact_force,
            self.valid_force,
            self.overtravel,
            self.dwell,
            self.correction_delay,
            self.area_timeout,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return bad("distances, speeds, forces and times must be positive");
        }
        if !(self.jitter >= 0.0) || !self.bias.is_finite() || !(self.correction_bias >= 0.0) {
            return bad("jitter and correction_bias must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.target_t) {
            return bad("target_t must lie in [0, 1]");
        }
        if self.attempts == 0 {
            return bad("attempts must be at least 1");
        }
        Ok(())
    }
}

/// Aim offsets drawn ahead of a run, `(across, along)` in metres from the
/// target. Drawing does not depend on anything that happens during the
/// run, so runs with the same seed share the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorPlan {
    pub areas: Vec<(u8, Vec<[f64; 2]>)>,
}

impl OperatorPlan {
    pub fn draw(cfg: &OperatorConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let areas = cfg
            .areas
            .iter()
            .map(|&a| {
                let aims = (0..cfg.attempts)
                    .map(|k| {
                        let bias = if k == 0 { cfg.bias } else { cfg.bias * cfg.correction_bias };
                        let j0: f64 = StandardNormal.sample(&mut rng);
                        let j1: f64 = StandardNormal.sample(&mut rng);
                        [bias + cfg.jitter * j0, cfg.jitter * j1]
                    })
                    .collect();
                (a, aims)
            })
            .collect();
        OperatorPlan { areas }
    }
}

#[derive(Debug, Clone)]
struct Polyline {
    points: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(points: Vec<Vec3>) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            cumulative.push(cumulative.last().unwrap() + (w[1] - w[0]).norm());
        }
        Polyline { points, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn at(&self, s: f64) -> Vec3 {
        if s >= self.length() {
            return *self.points.last().unwrap();
        }
        let i = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let f = if seg > 0.0 { (s - self.cumulative[i]) / seg } else { 0.0 };
        self.points[i] + (self.points[i + 1] - self.points[i]) * f
    }
}

#[derive(Debug, Clone)]
struct Leg {
    path: Polyline,
    speed: f64,
    s: f64,
}

#[derive(Debug, Clone)]
enum Mode {
    /// Following legs; the approach starts from the end of the last one.
    Move { legs: Vec<Leg>, phase: Phase, aim: (Vec3, Vec3) },
    Approach { dir: Vec3, travelled: f64 },
    Contact,
    Finished,
}

enum Act {
    Stay,
    Approach(Vec3),
    Hold,
    Correct,
    Next,
}

/// Scripted stand-in for a human operator.
///
/// For every area it travels to a standoff point above its (biased,
/// jittered) aim point, descends along the skin normal until the contact
/// force reaches [`OperatorConfig::contact_force`], then holds. A placement
/// is valid while the probe presses on skin inside the intercostal patch;
/// after [`OperatorConfig::dwell`] seconds of continuous validity the area
/// is done. An invalid placement held for
/// [`OperatorConfig::correction_delay`] seconds, or a descent that finds
/// no skin, triggers a correction: back off to standoff height and
/// re-approach with the next planned aim.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    cfg: OperatorConfig,
    exam: Arc<Exam>,
    plan: OperatorPlan,
    period: f64,
    probe_radius: f64,
    area: usize,
    attempt: usize,
    mode: Mode,
    leader: Vec3,
    area_start: f64,
    valid_since: Option<f64>,
    invalid_since: Option<f64>,
}

impl ScriptedOperator {
    pub fn new(
        exam: Arc<Exam>,
        cfg: OperatorConfig,
        plan: OperatorPlan,
        start: Vec3,
        period: f64,
        probe_radius: f64,
    ) -> Result<Self, HarnessError> {
        cfg.validate()?;
        if plan.areas.len() != exam.areas.len() || plan.areas.iter().zip(&exam.areas).any(|(p, a)| p.0 != a.id) {
            return Err(HarnessError::Config("plan areas do not match the exam".into()));
        }
        let mut op = ScriptedOperator {
            cfg,
            exam,
            plan,
            period,
            probe_radius,
            area: 0,
            attempt: 0,
            mode: Mode::Finished,
            leader: start,
            area_start: 0.0,
            valid_since: None,
            invalid_since: None,
        };
        op.mode = op.travel(start, Phase::Transit, op.cfg.transit_speed);
        Ok(op)
    }

    pub fn plan(&self) -> &OperatorPlan {
        &self.plan
    }

    fn aim(&self) -> (Vec3, Vec3) {
        let aims = &self.plan.areas[self.area].1;
        let [across, along] = aims[self.attempt.min(aims.len() - 1)];
        let area = &self.exam.areas[self.area];
        self.exam.aim(area, across, along).unwrap_or((area.target, area.normal))
    }

    /// Legs from `lift` (already at standoff height) to above the current aim.
    fn travel(&self, lift: Vec3, phase: Phase, speed: f64) -> Mode {
        let aim = self.aim();
        let above = aim.0 + aim.1 * self.cfg.standoff;
        let path = self.exam.standoff_path(&lift, &above, self.cfg.standoff, 0.005);
        Mode::Move { legs: vec![Leg { path: Polyline::new(path), speed, s: 0.0 }], phase, aim }
    }

    /// Back off from the skin to standoff height, then travel.
    fn retract_and_travel(&self, probe: &Vec3, phase: Phase, speed: f64) -> Mode {
        let cp = self.exam.contact_point(probe, 0.2).unwrap_or(*probe);
        let lift = cp + self.exam.skin_normal(&cp) * self.cfg.standoff;
        let mut mode = self.travel(lift, phase, speed);
        if let Mode::Move { legs, .. } = &mut mode {
            legs.insert(0, Leg { path: Polyline::new(vec![self.leader, lift]), speed: self.cfg.retract_speed, s: 0.0 });
        }
        mode
    }

    fn next_area(&mut self, obs: &Observation) {
        self.area += 1;
        self.attempt = 0;
        self.valid_since = None;
        self.invalid_since = None;
        self.mode = if self.area >= self.exam.areas.len() {
            Mode::Finished
        } else {
            self.retract_and_travel(&obs.probe, Phase::Transit, self.cfg.transit_speed)
        };
    }

    fn correct(&mut self, obs: &Observation) {
        self.attempt += 1;
        self.valid_since = None;
        self.invalid_since = None;
        self.mode = self.retract_and_travel(&obs.probe, Phase::Correction, self.cfg.transit_speed);
    }

    fn judge(&self, obs: &Observation) -> bool {
        if obs.force.norm() < self.cfg.valid_force {
            return false;
        }
        let area = &self.exam.areas[self.area];
        self.exam
            .contact_point(&obs.probe, self.probe_radius + DEPTH_QUERY)
            .is_some_and(|cp| self.exam.in_patch(area, &cp))
    }
}

impl Operator for ScriptedOperator {
    fn step(&mut self, obs: &Observation) -> OperatorStep {
        let now = obs.time;
        let dt = self.period;
        let mut valid = false;
        if !matches!(self.mode, Mode::Finished | Mode::Move { phase: Phase::Transit, .. })
            && now - self.area_start > self.cfg.area_timeout
        {
            self.next_area(obs);
        }
        let area = self.exam.areas.get(self.area).map(|a| a.id);
        let mut act = Act::Stay;
        match &mut self.mode {
            Mode::Finished => {
                return OperatorStep { leader: Some(self.leader), phase: Some(Phase::Finished), done: true, ..OperatorStep::default() }
            }
            Mode::Move { legs, phase, aim } => {
                let leg = &mut legs[0];
                leg.s += leg.speed * dt;
                self.leader = leg.path.at(leg.s);
                if leg.s >= leg.path.length() {
                    legs.remove(0);
                    if legs.is_empty() {
                        if *phase == Phase::Transit {
                            self.area_start = now;
                        }
                        act = Act::Approach(-aim.1);
                    }
                }
            }
            Mode::Approach { dir, travelled } => {
                if obs.force.norm() >= self.cfg.contact_force {
                    act = Act::Hold;
                } else if *travelled > self.cfg.standoff + self.cfg.overtravel {
                    act = Act::Correct;
                } else {
                    *travelled += self.cfg.approach_speed * dt;
                    self.leader += *dir * (self.cfg.approach_speed * dt);
                }
            }
            Mode::Contact => {
                valid = self.judge(obs);
                if valid {
                    self.invalid_since = None;
                    let since = *self.valid_since.get_or_insert(now);
                    if now - since >= self.cfg.dwell - 0.5 * dt {
                        act = Act::Next;
                    }
                } else {
                    self.valid_since = None;
                    let since = *self.invalid_since.get_or_insert(now);
                    if now - since >= self.cfg.correction_delay - 0.5 * dt {
                        act = Act::Correct;
                    }
                }
            }
        }
        // the frame is charged to the mode that produced this leader sample
        let phase = match &self.mode {
            Mode::Move { phase, .. } => *phase,
            Mode::Approach { .. } => Phase::Approach,
            Mode::Contact => Phase::Contact,
            Mode::Finished => Phase::Finished,
        };
        match act {
            Act::Stay => {}
            Act::Approach(dir) => self.mode = Mode::Approach { dir, travelled: 0.0 },
            Act::Hold => self.mode = Mode::Contact,
            Act::Correct => self.correct(obs),
            Act::Next => self.next_area(obs),
        }
        OperatorStep { leader: Some(self.leader), area, phase: Some(phase), valid, done: false }
    }
}

/// Replays timestamped leader samples. Each cycle forwards the newest
/// sample due by the end of that cycle, or nothing if none is due.
#[derive(Debug, Clone)]
pub struct RecordedOperator {
    samples: Vec<(f64, Vec3)>,
    next: usize,
    period: f64,
}

impl RecordedOperator {
    pub fn new(samples: Vec<(f64, Vec3)>, period: f64) -> Result<Self, HarnessError> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(HarnessError::Config("recorded samples must have increasing timestamps".into()));
        }
        Ok(RecordedOperator { samples, next: 0, period })
    }
}

impl Operator for RecordedOperator {
    fn step(&mut self, obs: &Observation) -> OperatorStep {
        if self.next >= self.samples.len() {
            return OperatorStep { done: true, ..OperatorStep::default() };
        }
        let due = obs.time + self.period * (1.0 + 1e-9);
        let mut leader = None;
        while self.next < self.samples.len() && self.samples[self.next].0 <= due {
            leader = Some(self.samples[self.next].1);
            self.next += 1;
        }
        OperatorStep { leader, ..OperatorStep::default() }
    }
}
