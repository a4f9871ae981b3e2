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


//! Scripted and recorded replays through the full follower pipeline.

use std::sync::OnceLock;

use proptest::prelude::*;
use ribvf::harness::{
    analyze, run_replay, run_replay_with, Observation, Operator, OperatorStep, Phase, RecordedOperator, Session,
    SessionConfig, SessionLog,
};

fn session(bias: f64) -> Session {
    let mut cfg = SessionConfig::default();
    cfg.operator.bias = bias;
    cfg.operator.jitter = 0.0;
    Session::build(cfg).unwrap()
}

fn ideal() -> &'static Session {
    static S: OnceLock<Session> = OnceLock::new();
    S.get_or_init(|| session(0.0))
}

fn biased() -> &'static Session {
    static S: OnceLock<Session> = OnceLock::new();
    S.get_or_init(|| session(0.018))
}

fn jsonl(log: &SessionLog) -> Vec<u8> {
    let mut buf = Vec::new();
    log.write_jsonl(&mut buf).unwrap();
    buf
}

#[test]
fn replays_are_bit_identical() {
    let mut cfg = SessionConfig::default();
    cfg.seed = 11;
    let a = run_replay(&Session::build(cfg.clone()).unwrap(), true).unwrap();
    let b = run_replay(&Session::build(cfg).unwrap(), true).unwrap();
    assert_eq!(jsonl(&a.log), jsonl(&b.log));
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn paired_runs_share_the_plan() {
    let s = biased();
    let on = run_replay(s, true).unwrap();
    let off = run_replay(s, false).unwrap();
    assert_eq!(on.plan, off.plan);
    assert!(on.log.header.vf_enabled && !off.log.header.vf_enabled);
    assert_eq!(on.log.header.seed, off.log.header.seed);
    assert!(on.log.frames.iter().all(|f| f.vf_enabled));
    assert!(off.log.frames.iter().all(|f| !f.vf_enabled && !f.clamped));
}

#[test]
fn ideal_aim_validates_every_area_without_clamping() {
    for vf in [true, false] {
        let out = run_replay(ideal(), vf).unwrap();
        assert!(out.log.complete);
        let m = &out.metrics;
        assert_eq!(m.areas.iter().map(|a| a.area).collect::<Vec<_>>(), vec![11, 12, 14, 13]);
        for a in &m.areas {
            assert!(a.valid && a.corrections == 0 && a.final_clamp_events == 0, "vf={vf} {a:?}");
        }
        assert_eq!(m.clamp_events, 0);
        assert_eq!(m.max_fixture_force, 0.0);
        let sum: f64 = m.areas.iter().map(|a| a.duration).sum();
        assert!((m.transit_duration + sum - m.total_duration).abs() < 1e-9);
    }
}

#[test]
fn fixture_slides_a_biased_probe_into_the_gap() {
    let s = biased();
    let on = run_replay(s, true).unwrap().metrics;
    let off = run_replay(s, false).unwrap().metrics;
    for (a, b) in on.areas.iter().zip(&off.areas) {
        assert!(a.valid && b.valid, "{a:?} {b:?}");
        // with the fixture the probe is deflected off the rib; without it
        // the operator has to back off and re-aim
        assert_eq!(a.corrections, 0, "{a:?}");
        assert!(b.corrections >= 1, "{b:?}");
        assert!(a.duration < b.duration);
    }
    assert!(on.clamp_events > 0);
    assert_eq!(on.max_fixture_force, 0.0);
    assert!(off.max_fixture_force > 1.0);
    assert!(on.total_duration < off.total_duration);
}

#[test]
fn filtered_reference_never_enters_the_offset_region() {
    let s = biased();
    let out = run_replay(s, true).unwrap();
    let report = analyze(&out.log, Some(&s.scene.fixture), 1);
    let audit = report.safety.unwrap();
    assert!(audit.passed, "{audit:?}");
    assert_eq!(audit.frames_checked, out.log.frames.len());
    assert!(audit.min_distance.unwrap() >= s.config.follower.filter.probe_radius - 1e-3);
    assert!(out.log.frames.iter().all(|f| f.fault.is_none()));
}

#[test]
fn logs_round_trip_through_jsonl() {
    let out = run_replay(ideal(), true).unwrap();
    let bytes = jsonl(&out.log);
    let back = SessionLog::read_jsonl(&bytes[..]).unwrap();
    assert_eq!(back, out.log);
    assert_eq!(analyze(&back, None, 1).metrics, out.metrics);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    out.log.save(&path).unwrap();
    assert_eq!(SessionLog::load(&path).unwrap(), out.log);
}

#[test]
fn truncated_log_is_reported_partial() {
    let out = run_replay(ideal(), true).unwrap();
    let bytes = jsonl(&out.log);
    // cut in the middle of a frame record
    let cut = bytes.len() / 2;
    let log = SessionLog::read_jsonl(&bytes[..cut]).unwrap();
    assert!(!log.complete);
    assert!(!log.frames.is_empty() && log.frames.len() < out.log.frames.len());
    assert_eq!(log.frames[..], out.log.frames[..log.frames.len()]);
    assert!(analyze(&log, None, 1).partial);

    // damage away from the end is an error, not a silent truncation
    let text = String::from_utf8(bytes).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "{\"kind\":\"frame\",";
    assert!(SessionLog::read_jsonl(lines.join("\n").as_bytes()).is_err());
}

#[test]
fn recorded_stream_reproduces_the_session() {
    let s = ideal();
    let live = run_replay(s, false).unwrap();
    let period = s.config.follower.impedance.period;
    let mut op = RecordedOperator::new(live.log.leader_samples(), period).unwrap();
    let again = run_replay_with(s, &mut op, false, None, 600.0).unwrap();
    assert!(again.log.complete);
    assert_eq!(again.log.frames.len(), live.log.frames.len());
    for (a, b) in again.log.frames.iter().zip(&live.log.frames) {
        assert_eq!((a.t, a.leader, a.filtered, a.probe), (b.t, b.leader, b.filtered, b.probe));
        assert_eq!(a.phase, None);
    }
}

#[test]
fn recorded_stream_through_the_fixture_stays_safe() {
    // a VF-off stream presses on ribs; replayed with the fixture on it must not
    let s = biased();
    let off = run_replay(s, false).unwrap();
    assert!(off.log.frames.iter().any(|f| f.on_rib));
    let mut op = RecordedOperator::new(off.log.leader_samples(), s.config.follower.impedance.period).unwrap();
    let on = run_replay_with(s, &mut op, true, None, 600.0).unwrap();
    let audit = analyze(&on.log, Some(&s.scene.fixture), 1).safety.unwrap();
    assert!(audit.passed, "{audit:?}");
    assert!(on.log.frames.iter().any(|f| f.clamped));
}

/// Sends `start` for the first `cycles` cycles, then nothing.
struct GoesSilent {
    start: ribvf::Vec3,
    cycles: usize,
}

impl Operator for GoesSilent {
    fn step(&mut self, _: &Observation) -> OperatorStep {
        let leader = (self.cycles > 0).then_some(self.start);
        self.cycles = self.cycles.saturating_sub(1);
        OperatorStep { leader, ..OperatorStep::default() }
    }
}

#[test]
fn starved_stream_holds_the_reference() {
    let s = ideal();
    let period = s.config.follower.impedance.period;
    let mut op = GoesSilent { start: s.start, cycles: 50 };
    let out = run_replay_with(s, &mut op, true, None, 0.3).unwrap();
    assert!(!out.log.complete);
    let hold_from = out.log.frames.iter().position(|f| f.hold).unwrap();
    let gap = out.log.frames[hold_from].t - out.log.frames[49].t;
    assert!(gap >= 0.1 - 1e-9 && gap <= 0.1 + 2.0 * period, "{gap}");
    assert!(out.log.frames[hold_from..].iter().all(|f| f.hold && f.filtered == s.start));
    assert!(out.log.frames[..hold_from].iter().all(|f| !f.hold));
}

#[test]
fn session_config_is_strict_json() {
    let cfg = SessionConfig::default();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(SessionConfig::from_json(&text).unwrap(), cfg);
    assert!(SessionConfig::from_json(r#"{"seed": 3, "sede": 4}"#).is_err());
    assert!(SessionConfig::from_json(r#"{"frame_rate": 10}"#).is_err());
    assert_eq!(SessionConfig::from_json(r#"{"seed": 3}"#).unwrap().seed, 3);
}

fn short_log() -> &'static Vec<u8> {
    static B: OnceLock<Vec<u8>> = OnceLock::new();
    B.get_or_init(|| {
        let mut out = run_replay(ideal(), true).unwrap();
        out.log.frames.truncate(40);
        jsonl(&out.log)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn any_truncation_reads_as_a_prefix(cut in 0usize..4096) {
        let bytes = short_log();
        let full = SessionLog::read_jsonl(&bytes[..]).unwrap();
        let header_end = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let cut = header_end + cut % (bytes.len() - header_end);
        let log = SessionLog::read_jsonl(&bytes[..cut]).unwrap();
        prop_assert!(!log.complete);
        prop_assert_eq!(&log.frames[..], &full.frames[..log.frames.len()]);
    }
}

#[test]
fn phases_cover_the_whole_exam() {
    let out = run_replay(ideal(), true).unwrap();
    let f = &out.log.frames;
    assert_eq!(f.first().unwrap().phase, Some(Phase::Transit));
    assert!(f.iter().any(|x| x.phase == Some(Phase::Approach)));
    assert!(f.iter().any(|x| x.phase == Some(Phase::Contact) && x.valid));
    assert!(f.iter().all(|x| x.valid <= (x.phase == Some(Phase::Contact))));
}
