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


//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails. Oracles here are independent of the
//! library code they check.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Matrix3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ribvf::body::{fit_body, generate_body, measure, sample_surface, PointCloud, PoseParams, ShapeParams};
use ribvf::geometry::{mesh_distance, MeshIndex, TriangleRegion};
use ribvf::harness::{run_replay, Session, SessionConfig, SessionLog};
use ribvf::ribs::build_all_fixtures;
use ribvf::sim::{Follower, ImpedanceModel, ImpedanceParams, LeaderSample, ProbeState};
use ribvf::vf::{
    filter_step, solve_qp, Condition, ConstraintRow, ConstraintSet, FilterConfig, Provenance,
    ReferenceFilter,
};
use ribvf::Vec3;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Least-distance problem by enumerating every independent active set of
/// at most three rows; the optimum is the best feasible candidate.
fn enumerate_ldp(t: &Vec3, n: &[Vec3], b: &[f64]) -> Option<f64> {
    let m = n.len();
    let feasible = |d: &Vec3| n.iter().zip(b).all(|(ni, bi)| ni.dot(d) >= bi - 1e-12);
    let mut best: Option<f64> = None;
    let mut consider = |d: Vec3| {
        if feasible(&d) {
            let f = 0.5 * (d - t).norm_squared();
            best = Some(best.map_or(f, |g: f64| g.min(f)));
        }
    };
    consider(*t);
    let mut subsets: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    for i in 0..m {
        for j in i + 1..m {
            subsets.push(vec![i, j]);
            for k in j + 1..m {
                subsets.push(vec![i, j, k]);
            }
        }
    }
    for s in subsets {
        let k = s.len();
        let mut g = Matrix3::zeros();
        let mut r = Vec3::zeros();
        for (a, &i) in s.iter().enumerate() {
            r[a] = b[i] - n[i].dot(t);
            for (c, &j) in s.iter().enumerate() {
                g[(a, c)] = n[i].dot(&n[j]);
            }
        }
        for a in k..3 {
            g[(a, a)] = 1.0;
        }
        if g.determinant().abs() < 1e-10 {
            continue;
        }
        let lambda = g.lu().solve(&r).expect("non-singular");
        let d = t + s.iter().enumerate().map(|(a, &i)| n[i] * lambda[a]).sum::<Vec3>();
        consider(d);
    }
    best
}

fn qp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = FilterConfig::default();
    let (mut worst, mut infeasible) = (0.0f64, 0usize);
    let mut times = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let m = rng.gen_range(1..=8);
        let p = unit(&mut rng) * rng.gen_range(0.0..0.005);
        let rows: Vec<ConstraintRow> = (0..m)
            .map(|_| {
                let normal = unit(&mut rng);
                ConstraintRow {
                    normal,
                    offset: normal.dot(&p) - rng.gen_range(0.0..0.004),
                    provenance: Provenance { face: 0, feature: TriangleRegion::Interior, condition: Condition::FacePlane },
                }
            })
            .collect();
        let cs = ConstraintSet { rows, truncated: false };
        let t = unit(&mut rng) * rng.gen_range(0.0..0.008);
        let start = Instant::now();
        let res = solve_qp(&t, &cs, &cfg);
        times.push(start.elapsed().as_secs_f64());
        let oracle = enumerate_ldp(&t, &cs.normals(), &cs.offsets()).expect("instances are feasible by construction");
        if res.degenerate || cs.rows.iter().any(|r| r.normal.dot(&res.delta) < r.offset - 1e-9) {
            infeasible += 1;
        }
        worst = worst.max((0.5 * (res.delta - t).norm_squared() - oracle).abs());
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    Outcome {
        name: "qp_correctness",
        passed: worst <= 1e-8 && infeasible == 0 && median < 10e-6,
        detail: format!(
            "10000 instances, max objective gap {worst:.2e} (<= 1e-8), {infeasible} infeasible, median {:.2} us (< 10 us)",
            median * 1e6
        ),
    }
}

fn safety_invariant(session: &Session) -> Outcome {
    let fixture = &session.scene.fixture;
    let cfg = FilterConfig::default();
    let r = cfg.probe_radius;
    let mesh = fixture.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut cycles, mut faults, mut min_d) = (0usize, 0usize, f64::INFINITY);
    while cycles < 100_000 {
        let face = rng.gen_range(0..mesh.face_count());
        let tri = mesh.triangle(face);
        let (u, v): (f64, f64) = (rng.gen(), rng.gen());
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        let p = tri[0] + (tri[1] - tri[0]) * u + (tri[2] - tri[0]) * v;
        let mut x = p + mesh.normal(face) * (r + rng.gen_range(0.0005..0.006));
        if fixture.distance(&x, 0.05).map_or(true, |d| d < r) {
            continue;
        }
        for _ in 0..100 {
            // random moves, biased toward the nearest tube
            let outward = fixture.index().closest_point(&x, 0.05).map_or(Vec3::zeros(), |c| (x - c.point).normalize());
            let dir = (unit(&mut rng) - outward * 0.7).normalize();
            let target = x + dir * rng.gen_range(0.0..0.008);
            match filter_step(&x, &target, fixture, &cfg) {
                Ok((next, _)) => x = next,
                Err(_) => faults += 1,
            }
            min_d = min_d.min(fixture.distance(&x, 0.05).unwrap_or(f64::INFINITY));
            cycles += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        name: "safety_invariant",
        passed: faults == 0 && min_d >= r - 1e-3 && secs < 120.0,
        detail: format!(
            "{cycles} cycles, min distance {min_d:.6} m (>= {:.3} m), {faults} faults, {secs:.1} s (< 120 s)",
            r - 1e-3
        ),
    }
}

fn sliding(session: &Session) -> Outcome {
    let fixture = &session.scene.fixture;
    let cfg = FilterConfig::default();
    let r = cfg.probe_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut cases) = (f64::INFINITY, 0);
    let mut min_gap = f64::INFINITY;
    let mut max_gap = 0.0f64;
    while cases < 100 {
        let tube = rng.gen_range(0..session.fixtures.tubes.len());
        let curve = &session.fixtures.curves[tube];
        let semi_major = 0.5 * session.fixtures.tubes[tube].major_axis;
        let outward = |t: f64| {
            let c = curve.central.eval(t);
            let tan = curve.central.derivative(t).normalize();
            let mut v = c - session.body.spine_center;
            v -= session.body.spine_axis * v.dot(&session.body.spine_axis);
            v -= tan * v.dot(&tan);
            v.normalize()
        };
        let (t0, depth) = (rng.gen_range(0.15..0.7), rng.gen_range(0.2..0.9));
        let start = curve.central.eval(t0) + outward(t0) * (semi_major + r + 0.002);
        if fixture.distance(&start, 0.05).map_or(true, |d| d < r) {
            continue;
        }
        let inside = |t: f64| curve.central.eval(t) + outward(t) * (semi_major * (1.0 - depth));
        let mut filter = ReferenceFilter::new(start, true, cfg);
        // press, then drag along the rib at 5 cm/s
        for _ in 0..200 {
            filter.update(&inside(t0), fixture).unwrap();
        }
        let length = (curve.central.eval(t0 + 0.15) - curve.central.eval(t0)).norm();
        let steps = (length / 5e-5).ceil() as usize;
        let (mut prev_ref, mut prev) = (inside(t0), filter.position());
        let (mut ref_arc, mut arc) = (0.0, 0.0);
        for i in 1..=steps {
            let leader = inside(t0 + 0.15 * i as f64 / steps as f64);
            let x = filter.update(&leader, fixture).unwrap().filtered;
            let n = fixture.index().closest_point(&x, 0.05).map(|c| (x - c.point).normalize()).unwrap();
            let tangential = |d: Vec3| (d - n * d.dot(&n)).norm();
            ref_arc += tangential(leader - prev_ref);
            arc += tangential(x - prev);
            let d = fixture.distance(&x, 0.05).unwrap();
            min_gap = min_gap.min(d - r);
            max_gap = max_gap.max(d - r);
            prev_ref = leader;
            prev = x;
        }
        worst = worst.min(arc / ref_arc);
        cases += 1;
    }
    Outcome {
        name: "sliding",
        passed: worst >= 0.9 && min_gap >= -1e-3,
        detail: format!(
            "{cases} press-and-drag cases, min tangential progress {:.1}% (>= 90%), distance to offset surface in [{min_gap:.1e}, {max_gap:.1e}] m",
            100.0 * worst
        ),
    }
}

fn impedance_fidelity(session: &Session) -> Outcome {
    let params = ImpedanceParams::default();
    let model = ImpedanceModel::new(params).unwrap();
    let k = params.stiffness[0];
    let w = k.sqrt();
    let target = Vec3::new(0.03, -0.02, 0.05);
    let mut s = ProbeState::at_rest(Vec3::zeros());
    let mut worst = 0.0f64;
    for i in 1..=2000 {
        s = model.step(&s, &target, &Vec3::zeros(), &UnitQuaternion::identity()).unwrap();
        let t = i as f64 * params.period;
        let expect = target - target * (1.0 + w * t) * (-w * t).exp();
        worst = worst.max((s.position - expect).norm());
    }
    // press 5 mm into the skin at the sternum and let it settle
    let cfg = ribvf::sim::FollowerConfig { vf_enabled: false, ..session.config.follower };
    let mut follower = Follower::new(session.scene.clone(), cfg, session.start).unwrap();
    let sternum = session.body.landmark("sternum").unwrap();
    let n = session.exam.skin_normal(&sternum);
    let press = sternum + n * (cfg.filter.probe_radius - 0.005);
    let mut frame = None;
    for _ in 0..4000 {
        frame = Some(follower.step(Some(LeaderSample { position: press })).unwrap());
    }
    let f = frame.unwrap();
    let spring = (f.state.position - f.filtered) * k;
    let force = f.state.wrench.force;
    let rel = (force - spring).norm() / force.norm();
    Outcome {
        name: "impedance_fidelity",
        passed: worst <= 1e-5 && rel <= 0.01 && force.norm() > 0.5,
        detail: format!(
            "step response max error {worst:.2e} m (<= 1e-5), static force {:.3} N vs K*offset {:.3} N, {:.3}% (<= 1%)",
            force.norm(),
            spring.norm(),
            100.0 * rel
        ),
    }
}

fn fit_truth() -> (ShapeParams, PoseParams) {
    let shape = ShapeParams {
        torso_height: 0.68,
        chest_half_width: 0.19,
        chest_half_depth: 0.13,
        waist_half_width: 0.16,
        waist_half_depth: 0.11,
        shoulder_drop: 0.055,
        rib_cage_extent: 0.24,
        rib_spacing: 1.1,
        squareness: 2.9,
        spine_offset: 0.065,
    };
    let pose = PoseParams {
        rotation: Vec3::new(-1.45, 0.1, 0.05),
        translation: Vec3::new(0.05, -0.1, 0.95),
        flexion: 0.12,
        lateral_bend: -0.06,
        axial_twist: 0.08,
        shoulder_tilt: 0.03,
    };
    (shape, pose)
}

fn perturbed(p: &PoseParams, rng: &mut ChaCha8Rng) -> PoseParams {
    let mut q = *p;
    q.translation += unit(rng) * 0.05;
    q.rotation += unit(rng) * 0.1;
    q
}

fn landmarks(all: &BTreeMap<String, Vec3>, noise: f64, rng: &mut ChaCha8Rng) -> BTreeMap<String, Vec3> {
    let g = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
    ["shoulder_left", "shoulder_right", "sternum", "crotch"]
        .iter()
        .map(|k| {
            let jitter = if noise > 0.0 { Vec3::new(g.sample(rng), g.sample(rng), g.sample(rng)) } else { Vec3::zeros() };
            (k.to_string(), all[*k] + jitter)
        })
        .collect()
}

fn fit_recovery() -> Outcome {
    let (shape, pose) = fit_truth();
    let body = generate_body(&shape, &pose, ribvf::body::DEFAULT_RESOLUTION).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud = PointCloud::new(sample_surface(&body.skin, 5000, &mut rng));
    let lm = landmarks(&body.landmarks, 0.0, &mut rng);
    let init = perturbed(&pose, &mut rng);
    let start = Instant::now();
    let fit = fit_body(&cloud, &lm, &init).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (worst, name) = ShapeParams::NAMES
        .iter()
        .zip(fit.shape.to_array().iter().zip(shape.to_array()))
        .map(|(n, (a, b))| ((a / b - 1.0).abs(), *n))
        .fold((0.0, ""), |acc, x| if x.0 > acc.0 { x } else { acc });
    Outcome {
        name: "fit_recovery",
        passed: worst <= 0.10 && fit.residual < 1e-4 && secs < 60.0,
        detail: format!(
            "worst shape error {:.1}% on {name} (<= 10%), residual {:.2e} m^2 (< 1e-4), {secs:.1} s (< 60 s)",
            100.0 * worst,
            fit.residual
        ),
    }
}

fn fit_repeatability() -> Outcome {
    let (shape, pose) = fit_truth();
    let body = generate_body(&shape, &pose, ribvf::body::DEFAULT_RESOLUTION).unwrap();
    let noise = Normal::new(0.0, 0.005).unwrap();
    let mut cc = Vec::new();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let points = sample_surface(&body.skin, 5000, &mut rng)
            .into_iter()
            .map(|p| p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let lm = landmarks(&body.landmarks, 0.01, &mut rng);
        let init = perturbed(&pose, &mut rng);
        let fit = fit_body(&PointCloud::new(points), &lm, &init).unwrap();
        let fitted = generate_body(&fit.shape, &fit.pose, ribvf::body::DEFAULT_RESOLUTION).unwrap();
        cc.push(measure(&fitted).cc);
    }
    let mean = cc.iter().sum::<f64>() / cc.len() as f64;
    let std = (cc.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (cc.len() - 1) as f64).sqrt();
    Outcome {
        name: "fit_repeatability",
        passed: std <= 0.035,
        detail: format!(
            "10 noisy refits, chest circumference {mean:.4} +/- {std:.4} m (std <= 0.035 m; truth {:.4} m)",
            measure(&body).cc
        ),
    }
}

fn tube_construction(session: &Session) -> Outcome {
    let set = build_all_fixtures(&session.body, &session.config.tubes).unwrap();
    let closed = set.tubes.iter().all(|t| t.mesh.is_closed());
    let ratio = set.tubes.iter().all(|t| t.major_axis == 2.0 * t.minor_axis);
    let idx: Vec<MeshIndex> = set.tubes.iter().map(|t| MeshIndex::new(t.mesh.clone())).collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            min_gap = min_gap.min(mesh_distance(&idx[i], &idx[j], 1.0));
        }
    }
    let skin = MeshIndex::new(session.body.skin.clone());
    let off_skin = set
        .curves
        .iter()
        .flat_map(|c| c.superior_samples.iter().chain(&c.inferior_samples))
        .map(|p| skin.closest_point(p, 1.0).map_or(f64::INFINITY, |c| c.distance))
        .fold(0.0f64, f64::max);
    Outcome {
        name: "tube_construction",
        passed: set.tubes.len() == 12 && closed && ratio && min_gap > 0.0 && off_skin <= 1e-6,
        detail: format!(
            "{} tubes, closed {closed}, major = 2 x minor {ratio}, min pairwise gap {min_gap:.4} m (> 0), max sample-to-skin {off_skin:.1e} m (<= 1e-6)",
            set.tubes.len()
        ),
    }
}

fn jsonl(log: &SessionLog) -> Vec<u8> {
    let mut buf = Vec::new();
    log.write_jsonl(&mut buf).unwrap();
    buf
}

fn timing_and_determinism() -> [Outcome; 2] {
    let (mut on, mut off) = (Vec::new(), Vec::new());
    let mut first = None;
    for seed in 0..5 {
        let cfg = SessionConfig { seed, ..SessionConfig::default() };
        let session = Session::build(cfg).unwrap();
        let a = run_replay(&session, true).unwrap();
        let b = run_replay(&session, false).unwrap();
        assert_eq!(a.plan, b.plan);
        on.push(a.metrics.total_duration);
        off.push(b.metrics.total_duration);
        if seed == 0 {
            first = Some((jsonl(&a.log), jsonl(&b.log)));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m_on, m_off) = (mean(&on), mean(&off));
    let reduction = (m_off - m_on) / m_off;
    let trend = Outcome {
        name: "timing_trend",
        passed: m_on < m_off && (0.10..=0.50).contains(&reduction),
        detail: format!(
            "5 paired replays, mean {m_on:.2} s with fixture vs {m_off:.2} s without, reduction {:.1}% (in [10%, 50%])",
            100.0 * reduction
        ),
    };
    let (a0, b0) = first.unwrap();
    let session = Session::build(SessionConfig::default()).unwrap();
    let same_on = jsonl(&run_replay(&session, true).unwrap().log) == a0;
    let same_off = jsonl(&run_replay(&session, false).unwrap().log) == b0;
    let determinism = Outcome {
        name: "determinism",
        passed: same_on && same_off,
        detail: format!(
            "rerun of seed 0: fixture-on log identical {same_on}, fixture-off log identical {same_off} ({} bytes)",
            a0.len()
        ),
    };
    [trend, determinism]
}

fn main() {
    let session = Session::build(SessionConfig::default()).expect("default session builds");
    let mut results = Vec::new();
    let mut run = |f: &dyn Fn() -> Vec<Outcome>| {
        let start = Instant::now();
        for o in f() {
            println!("{} {:<20} {} [{:.1} s]", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail, start.elapsed().as_secs_f64());
            results.push(o.passed);
        }
    };
    run(&|| vec![qp_correctness()]);
    run(&|| vec![safety_invariant(&session)]);
    run(&|| vec![sliding(&session)]);
    run(&|| vec![impedance_fidelity(&session)]);
    run(&|| vec![fit_recovery()]);
    run(&|| vec![fit_repeatability()]);
    run(&|| vec![tube_construction(&session)]);
    run(&|| timing_and_determinism().into());
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
