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


//! Staged fitting of pose and shape to a scan.
//!
//! Each round runs three stages: the global rigid pose against the
//! chamfer distance, the joint angles against the landmarks, then the
//! shape against the chamfer distance. The chamfer stages take
//! Gauss-Newton preconditioned gradient steps with backtracking halving;
//! the landmark stage is damped least squares. Model sensitivities are
//! central finite differences of the generator.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::{NearestIndex, PointCloud, MIN_FIT_POINTS};
use super::params::{PoseParams, ShapeParams};
use super::torso::{self, ModelOptions};
use super::{BodyError, DEFAULT_RESOLUTION};
use crate::Vec3;

/// Landmarks a non-empty landmark set must contain.
pub const REQUIRED_LANDMARKS: [&str; 3] = ["shoulder_left", "shoulder_right", "sternum"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub resolution: usize,
    pub rounds: usize,
    /// Iteration cap per stage.
    pub max_iterations: usize,
    /// Stop a stage when the relative improvement drops below this.
    pub tolerance: f64,
    /// Finite-difference step (metres or radians).
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            resolution: DEFAULT_RESOLUTION,
            rounds: 3,
            max_iterations: 500,
            tolerance: 1e-6,
            fd_step: 1e-4,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GlobalPose,
    Joints,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub round: usize,
    pub stage: Stage,
    pub iterations: usize,
    /// Stage objective before and after: chamfer distance (m²) for the
    /// chamfer stages, summed squared landmark error (m²) for the joints.
    pub before: f64,
    pub after: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub stages: Vec<StageReport>,
    /// False when any stage hit its iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub shape: ShapeParams,
    pub pose: PoseParams,
    /// Final chamfer distance (m²).
    pub residual: f64,
    pub report: FitReport,
}

/// Fits from the default shape with default options.
pub fn fit_body(
    cloud: &PointCloud,
    landmarks: &BTreeMap<String, Vec3>,
    init: &PoseParams,
) -> Result<FitResult, BodyError> {
    fit_body_with(cloud, landmarks, init, &ShapeParams::default(), &FitOptions::default())
}

/// An empty landmark set skips the joint stage.
pub fn fit_body_with(
    cloud: &PointCloud,
    landmarks: &BTreeMap<String, Vec3>,
    init_pose: &PoseParams,
    init_shape: &ShapeParams,
    opts: &FitOptions,
) -> Result<FitResult, BodyError> {
    cloud.validate(MIN_FIT_POINTS)?;
    init_pose.validate()?;
    init_shape.validate()?;
    if !landmarks.is_empty() {
        for name in REQUIRED_LANDMARKS {
            if !landmarks.contains_key(name) {
                return Err(BodyError::Params(format!("landmark '{name}' is required")));
            }
        }
        for name in landmarks.keys() {
            if !torso::LANDMARK_NAMES.contains(&name.as_str()) {
                return Err(BodyError::Params(format!("unknown landmark '{name}'")));
            }
        }
    }
    if opts.resolution < 16 || !(opts.fd_step > 0.0) || opts.rounds == 0 {
        return Err(BodyError::Params("fit options out of range".into()));
    }
    let problem = Chamfer::new(&cloud.points, opts.resolution);
    let mut state = State { shape: *init_shape, pose: *init_pose };
    let mut stages = Vec::new();
    let mut residual = problem.value(&state).unwrap_or(f64::INFINITY);
    for round in 0..opts.rounds {
        let start = residual;
        stages.push(problem.descend(&mut state, Block::Global, opts, round));
        if !landmarks.is_empty() {
            stages.push(fit_joints(&mut state, landmarks, opts, round));
        }
        stages.push(problem.descend(&mut state, Block::Shape, opts, round));
        residual = problem.value(&state).unwrap_or(f64::INFINITY);
        if residual == 0.0 || (start - residual) <= opts.tolerance * start {
            break;
        }
    }
    let converged = stages.iter().all(|s| s.converged);
    Ok(FitResult { shape: state.shape, pose: state.pose, residual, report: FitReport { stages, converged } })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Block {
    Global,
    Joints,
    Shape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct State {
    pub shape: ShapeParams,
    pub pose: PoseParams,
}

impl State {
    pub fn get(&self, b: Block) -> Vec<f64> {
        match b {
            Block::Global => self.pose.to_array()[..6].to_vec(),
            Block::Joints => self.pose.to_array()[6..].to_vec(),
            Block::Shape => self.shape.to_array().to_vec(),
        }
    }

    pub fn with(&self, b: Block, x: &[f64]) -> State {
        let mut s = *self;
        match b {
            Block::Global | Block::Joints => {
                let mut a = self.pose.to_array();
                let off = if b == Block::Global { 0 } else { 6 };
                a[off..off + x.len()].copy_from_slice(x);
                s.pose = PoseParams::from_array(a);
            }
            Block::Shape => {
                let mut a = self.shape.to_array();
                a.copy_from_slice(x);
                s.shape = ShapeParams::from_array(a);
            }
        }
        s
    }

    fn is_valid(&self) -> bool {
        self.shape.validate().is_ok() && self.pose.validate().is_ok()
    }
}

pub(crate) struct Chamfer<'a> {
    cloud: &'a [Vec3],
    cloud_index: NearestIndex,
    options: ModelOptions,
    faces: Vec<[usize; 3]>,
}

struct Evaluation {
    value: f64,
    model: Vec<Vec3>,
    /// Per cloud point: nearest model point.
    to_model: Vec<(f64, usize)>,
    /// Per model point: nearest cloud point.
    to_cloud: Vec<(f64, usize)>,
}

impl<'a> Chamfer<'a> {
    pub fn new(cloud: &'a [Vec3], resolution: usize) -> Self {
        let options = ModelOptions::new(resolution);
        Chamfer { cloud, cloud_index: NearestIndex::new(cloud), options, faces: torso::skin_faces(&options) }
    }

    fn model(&self, s: &State) -> Vec<Vec3> {
        let mut pts = torso::skin_vertices(&s.shape, &s.pose, &self.options);
        let n = pts.len();
        pts.reserve(self.faces.len());
        for f in &self.faces {
            pts.push((pts[f[0]] + pts[f[1]] + pts[f[2]]) / 3.0);
        }
        debug_assert!(pts.len() == n + self.faces.len());
        pts
    }

    fn evaluate(&self, s: &State) -> Option<Evaluation> {
        if !s.is_valid() {
            return None;
        }
        let model = self.model(s);
        let model_index = NearestIndex::new(&model);
        let to_model = model_index.nearest_all(self.cloud);
        let to_cloud = self.cloud_index.nearest_all(&model);
        let a: f64 = to_model.iter().map(|d| d.0).sum::<f64>() / to_model.len() as f64;
        let b: f64 = to_cloud.iter().map(|d| d.0).sum::<f64>() / to_cloud.len() as f64;
        Some(Evaluation { value: a + b, model, to_model, to_cloud })
    }

    pub fn value(&self, s: &State) -> Option<f64> {
        self.evaluate(s).map(|e| e.value)
    }

    /// Central-difference model sensitivities, one column per parameter.
    fn sensitivities(&self, s: &State, block: Block, h: f64) -> Vec<Vec<Vec3>> {
        let x = s.get(block);
        (0..x.len())
            .into_par_iter()
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let mp = self.model(&s.with(block, &xp));
                let mm = self.model(&s.with(block, &xm));
                mp.iter().zip(&mm).map(|(p, m)| (p - m) / (2.0 * h)).collect()
            })
            .collect()
    }

    /// Gradient and Gauss-Newton matrix of the chamfer distance with the
    /// nearest-neighbour assignment held fixed.
    fn linearise(&self, e: &Evaluation, cols: &[Vec<Vec3>]) -> (DVector<f64>, DMatrix<f64>) {
        let n = cols.len();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let wa = 2.0 / self.cloud.len() as f64;
        let wb = 2.0 / e.model.len() as f64;
        let mut add = |w: f64, r: Vec3, m: usize| {
            for k in 0..n {
                let jk = cols[k][m];
                g[k] += w * r.dot(&jk);
                for l in 0..=k {
                    h[(k, l)] += w * jk.dot(&cols[l][m]);
                }
            }
        };
        for (i, &(_, m)) in e.to_model.iter().enumerate() {
            add(wa, e.model[m] - self.cloud[i], m);
        }
        for (m, &(_, c)) in e.to_cloud.iter().enumerate() {
            add(wb, e.model[m] - self.cloud[c], m);
        }
        for k in 0..n {
            for l in 0..k {
                h[(l, k)] = h[(k, l)];
            }
        }
        (g, h)
    }

    #[cfg(test)]
    pub fn gradient(&self, s: &State, block: Block, h: f64) -> Option<DVector<f64>> {
        let e = self.evaluate(s)?;
        let cols = self.sensitivities(s, block, h);
        Some(self.linearise(&e, &cols).0)
    }

    fn descend(&self, state: &mut State, block: Block, opts: &FitOptions, round: usize) -> StageReport {
        let stage = if block == Block::Global { Stage::GlobalPose } else { Stage::Shape };
        let Some(mut current) = self.evaluate(state) else {
            return StageReport { round, stage, iterations: 0, before: f64::INFINITY, after: f64::INFINITY, converged: false };
        };
        let before = current.value;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iterations {
            if current.value == 0.0 {
                converged = true;
                break;
            }
            iterations += 1;
            let cols = self.sensitivities(state, block, opts.fd_step);
            let (g, mut h) = self.linearise(&current, &cols);
            let scale = h.diagonal().max().max(1e-12);
            for k in 0..g.len() {
                h[(k, k)] += 1e-3 * h[(k, k)] + 1e-9 * scale;
            }
            let Some(step) = h.cholesky().map(|c| -c.solve(&g)) else {
                converged = true;
                break;
            };
            let x = state.get(block);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
                let s = state.with(block, &trial);
                if let Some(e) = self.evaluate(&s) {
                    if e.value < current.value {
                        accepted = Some((s, e));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((s, e)) = accepted else {
                converged = true;
                break;
            };
            let gain = (current.value - e.value) / current.value;
            *state = s;
            current = e;
            if gain < opts.tolerance {
                converged = true;
                break;
            }
        }
        StageReport { round, stage, iterations, before, after: current.value, converged }
    }
}

fn landmark_residuals(s: &State, observed: &BTreeMap<String, Vec3>) -> Option<DVector<f64>> {
    if !s.is_valid() {
        return None;
    }
    let model = torso::landmarks(&s.shape, &s.pose);
    let mut r = Vec::with_capacity(3 * observed.len());
    for (name, obs) in observed {
        let d = model[name] - obs;
        r.extend_from_slice(d.as_slice());
    }
    Some(DVector::from_vec(r))
}

/// Damped least squares on landmark error over the joint angles only.
fn fit_joints(state: &mut State, observed: &BTreeMap<String, Vec3>, opts: &FitOptions, round: usize) -> StageReport {
    let report = |iterations, before, after, converged| StageReport {
        round,
        stage: Stage::Joints,
        iterations,
        before,
        after,
        converged,
    };
    let Some(mut r) = landmark_residuals(state, observed) else {
        return report(0, f64::INFINITY, f64::INFINITY, false);
    };
    let before = r.norm_squared();
    let mut cost = before;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let h = opts.fd_step;
    while iterations < opts.max_iterations {
        if cost == 0.0 {
            return report(iterations, before, cost, true);
        }
        iterations += 1;
        let x = state.get(Block::Joints);
        let mut j = DMatrix::zeros(r.len(), x.len());
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let (Some(rp), Some(rm)) =
                (landmark_residuals(&state.with(Block::Joints, &xp), observed), landmark_residuals(&state.with(Block::Joints, &xm), observed))
            else {
                return report(iterations, before, cost, true);
            };
            j.set_column(k, &((rp - rm) / (2.0 * h)));
        }
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut improved = None;
        for _ in 0..=opts.max_halvings {
            let mut a = jtj.clone();
            for k in 0..x.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            if let Some(step) = a.cholesky().map(|c| -c.solve(&jtr)) {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
                let s = state.with(Block::Joints, &trial);
                if let Some(rt) = landmark_residuals(&s, observed) {
                    if rt.norm_squared() < cost {
                        improved = Some((s, rt));
                        lambda = (lambda * 0.3).max(1e-12);
                        break;
                    }
                }
            }
            lambda *= 2.0;
        }
        let Some((s, rt)) = improved else {
            return report(iterations, before, cost, true);
        };
        let new_cost = rt.norm_squared();
        let gain = (cost - new_cost) / cost;
        *state = s;
        r = rt;
        cost = new_cost;
        if gain < opts.tolerance {
            return report(iterations, before, cost, true);
        }
    }
    report(iterations, before, cost, false)
}
