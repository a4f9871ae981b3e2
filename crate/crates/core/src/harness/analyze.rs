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

use super::log::SessionLog;
use super::operator::Phase;
use crate::vf::Fixture;
use crate::Vec3;

/// Post-hoc slack below the probe radius tolerated by the safety audit (m).
pub const SAFETY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMetrics {
    pub area: u8,
    /// From the first descent to the end of the dwell, or to the timeout (s).
    pub duration: f64,
    /// The dwell completed.
    pub valid: bool,
    pub corrections: u32,
    /// Clamp events after the last correction.
    pub final_clamp_events: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamMetrics {
    pub areas: Vec<AreaMetrics>,
    /// Sum of the area durations plus `transit_duration` (s).
    pub total_duration: f64,
    pub transit_duration: f64,
    /// Cycles where the filter started clamping after a free cycle.
    pub clamp_events: u32,
    /// Largest contact force while pressing on skin over a rib (N).
    pub max_fixture_force: f64,
    /// Distance travelled by the probe (m).
    pub path_length: f64,
}

/// Plot-ready time series; vectors are `[x, y, z]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub time: Vec<f64>,
    pub leader: Vec<Vec3>,
    pub filtered: Vec<Vec3>,
    pub probe: Vec<Vec3>,
    pub force: Vec<Vec3>,
    pub force_norm: Vec<f64>,
    pub active_constraints: Vec<usize>,
    pub clamped: Vec<u8>,
}

/// Distance from every fixture-on filtered reference to the fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyAudit {
    pub frames_checked: usize,
    /// Signed; `None` when no checked frame came near the fixture.
    pub min_distance: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metrics: ExamMetrics,
    /// The log was cut short; metrics cover the frames present.
    pub partial: bool,
    pub series: PlotSeries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<SafetyAudit>,
}

/// Metrics and plot series of a frame log. Series keep every `stride`-th
/// frame. With a fixture the filtered references are audited against it.
pub fn analyze(log: &SessionLog, fixture: Option<&Fixture>, stride: usize) -> Report {
    let h = &log.header;
    let frames = &log.frames;
    let dt = h.period;
    let total = frames.last().map_or(0.0, |f| f.t - h.start_time);

    let mut areas = Vec::with_capacity(h.areas.len());
    for &id in &h.areas {
        let mut count = 0u64;
        let (mut run, mut best) = (0u64, 0u64);
        let (mut corrections, mut final_clamps) = (0, 0);
        let mut prev_phase = None;
        let mut prev_clamped = false;
        for f in frames.iter().filter(|f| f.area == Some(id) && f.phase.is_some_and(Phase::in_area)) {
            count += 1;
            run = if f.valid { run + 1 } else { 0 };
            best = best.max(run);
            if f.phase == Some(Phase::Correction) {
                if prev_phase != Some(Phase::Correction) {
                    corrections += 1;
                }
                final_clamps = 0;
            } else if f.clamped && !prev_clamped {
                final_clamps += 1;
            }
            prev_phase = f.phase;
            prev_clamped = f.clamped;
        }
        areas.push(AreaMetrics {
            area: id,
            duration: count as f64 * dt,
            valid: best as f64 * dt >= h.dwell + 0.5 * dt,
            corrections,
            final_clamp_events: final_clamps,
        });
    }
    let in_areas: f64 = areas.iter().map(|a| a.duration).sum();

    let mut clamp_events = 0;
    let mut prev = false;
    let mut max_force: f64 = 0.0;
    let mut path = 0.0;
    for (i, f) in frames.iter().enumerate() {
        if f.clamped && !prev {
            clamp_events += 1;
        }
        prev = f.clamped;
        if f.on_rib {
            max_force = max_force.max(f.wrench.force.norm());
        }
        if i > 0 {
            path += (f.probe - frames[i - 1].probe).norm();
        }
    }

    let mut series = PlotSeries::default();
    for f in frames.iter().step_by(stride.max(1)) {
        series.time.push(f.t);
        series.leader.push(f.leader);
        series.filtered.push(f.filtered);
        series.probe.push(f.probe);
        series.force.push(f.wrench.force);
        series.force_norm.push(f.wrench.force.norm());
        series.active_constraints.push(f.active_constraints);
        series.clamped.push(f.clamped as u8);
    }

    let safety = fixture.map(|fx| audit(log, fx));
    Report {
        metrics: ExamMetrics {
            areas,
            total_duration: total,
            transit_duration: (total - in_areas).max(0.0),
            clamp_events,
            max_fixture_force: max_force,
            path_length: path,
        },
        partial: !log.complete,
        series,
        safety,
    }
}

fn audit(log: &SessionLog, fixture: &Fixture) -> SafetyAudit {
    let r = log.header.probe_radius;
    let reach = r + 0.01;
    let mut checked = 0;
    let mut min: Option<f64> = None;
    for f in log.frames.iter().filter(|f| f.vf_enabled) {
        checked += 1;
        if let Some((_, d, _)) = fixture.index().signed_closest(&f.filtered, reach) {
            min = Some(min.map_or(d, |m| m.min(d)));
        }
    }
    let threshold = r - SAFETY_TOLERANCE;
    SafetyAudit { frames_checked: checked, min_distance: min, threshold, passed: min.map_or(true, |d| d >= threshold) }
}
