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

use super::constraints::{build_constraints_for_step, ConstraintSet, Fixture};
use super::qp::{kkt_residual, least_distance};
use super::{FilterConfig, FilterError};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    /// Applied increment Δx.
    pub delta: Vec3,
    /// Rows with slack below the solver tolerance.
    pub active: Vec<usize>,
    /// Multipliers of the rows the solver held active, keyed by row index.
    pub multipliers: Vec<(usize, f64)>,
    /// Δx differs from the commanded increment.
    pub clamped: bool,
    /// The solver found the rows infeasible and returned Δx = 0.
    pub degenerate: bool,
    pub kkt_residual: f64,
    pub rows: usize,
    pub truncated: bool,
}

/// Nearest admissible increment to `dx_d`.
pub fn solve_qp(dx_d: &Vec3, cs: &ConstraintSet, cfg: &FilterConfig) -> FilterResult {
    let normals = cs.normals();
    let offsets = cs.offsets();
    let tol = cfg.solver_tolerance;
    let sol = least_distance(dx_d, &normals, &offsets, tol * 1e-3);
    let kkt = if sol.feasible { kkt_residual(dx_d, &normals, &offsets, &sol) } else { f64::INFINITY };
    let active = normals
        .iter()
        .zip(&offsets)
        .enumerate()
        .filter(|(_, (n, b))| (n.dot(&sol.x) - *b).abs() < tol)
        .map(|(i, _)| i)
        .collect();
    FilterResult {
        delta: sol.x,
        active,
        multipliers: sol.active.iter().copied().zip(sol.multipliers.iter().copied()).collect(),
        clamped: (sol.x - dx_d).norm() > tol,
        degenerate: !sol.feasible,
        kkt_residual: kkt,
        rows: cs.rows.len(),
        truncated: cs.truncated,
    }
}

/// One filtering cycle from the admissible position `x` toward `x_ref`.
pub fn filter_step(
    x: &Vec3,
    x_ref: &Vec3,
    fixture: &Fixture,
    cfg: &FilterConfig,
) -> Result<(Vec3, FilterResult), FilterError> {
    let dx_d = x_ref - x;
    let limit = cfg.cull_radius - cfg.probe_radius;
    let step = dx_d.norm();
    if step > limit {
        return Err(FilterError::StepTooLarge { step, limit });
    }
    let cs = build_constraints_for_step(fixture, x, cfg, step)?;
    let res = solve_qp(&dx_d, &cs, cfg);
    Ok((x + res.delta, res))
}

/// Stateful filter tracking the admissible reference between cycles.
///
/// Each update moves toward the new leader reference by at most
/// `max_step`; with the fixture disabled the clamped reference passes
/// through unchanged, so both modes see the same rate limit.
#[derive(Debug, Clone)]
pub struct ReferenceFilter {
    position: Vec3,
    enabled: bool,
    cfg: FilterConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub filtered: Vec3,
    /// `None` while the fixture is disabled.
    pub result: Option<FilterResult>,
    /// The leader reference was farther than `max_step` away.
    pub rate_limited: bool,
}

impl ReferenceFilter {
    pub fn new(start: Vec3, enabled: bool, cfg: FilterConfig) -> Self {
        ReferenceFilter { position: start, enabled, cfg }
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn set_enabled(&mut self, on: bool) {
        self.enabled = on;
    }

    pub fn reset(&mut self, position: Vec3) {
        self.position = position;
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    /// On error the stored position is left untouched.
    pub fn update(&mut self, leader: &Vec3, fixture: &Fixture) -> Result<FilterOutput, FilterError> {
        let mut dx = leader - self.position;
        let n = dx.norm();
        let rate_limited = n > self.cfg.max_step;
        if rate_limited {
            dx *= self.cfg.max_step / n;
        }
        let target = self.position + dx;
        if !self.enabled {
            self.position = target;
            return Ok(FilterOutput { filtered: target, result: None, rate_limited });
        }
        let (filtered, res) = filter_step(&self.position, &target, fixture, &self.cfg)?;
        self.position = filtered;
        Ok(FilterOutput { filtered, result: Some(res), rate_limited })
    }
}

#[cfg(test)]
mod tests {
    use super::super::constraints::tests::v_notch;
    use super::*;
    use crate::geometry::fixtures::{cube, uv_sphere};

    #[test]
    fn far_reference_passes_through() {
        let fx = Fixture::new(cube(0.5)).unwrap();
        let cfg = FilterConfig::default();
        let x = Vec3::new(0.0, 0.0, 0.8);
        let (y, res) = filter_step(&x, &Vec3::new(0.004, 0.0, 0.8), &fx, &cfg).unwrap();
        assert_eq!(y, Vec3::new(0.004, 0.0, 0.8));
        assert!(!res.clamped && res.rows == 0);
    }

    #[test]
    fn reference_inside_lands_on_offset_surface() {
        let fx = Fixture::new(uv_sphere(0.05, 24, 48)).unwrap();
        let cfg = FilterConfig::default();
        let mut f = ReferenceFilter::new(Vec3::new(0.0, 0.0, 0.075), true, cfg);
        for _ in 0..20 {
            f.update(&Vec3::new(0.003, 0.0, 0.04), &fx).unwrap();
        }
        let d = fx.distance(&f.position(), 1.0).unwrap();
        assert!((d - 0.01).abs() < 1e-3, "distance {d}");
    }

    #[test]
    fn step_beyond_cull_margin_is_rejected() {
        let fx = Fixture::new(cube(0.5)).unwrap();
        let cfg = FilterConfig::default();
        let x = Vec3::new(0.0, 0.0, 0.8);
        let err = filter_step(&x, &(x + Vec3::new(0.02, 0.0, 0.0)), &fx, &cfg).unwrap_err();
        assert!(matches!(err, FilterError::StepTooLarge { .. }));
    }

    #[test]
    fn disabled_filter_only_rate_limits() {
        let fx = Fixture::new(cube(0.5)).unwrap();
        let mut f = ReferenceFilter::new(Vec3::new(0.0, 0.0, 0.52), false, FilterConfig::default());
        let out = f.update(&Vec3::new(0.0, 0.0, 0.0), &fx).unwrap();
        assert!(out.rate_limited && out.result.is_none());
        assert!((out.filtered - Vec3::new(0.0, 0.0, 0.515)).norm() < 1e-15);
    }

    #[test]
    fn notch_drag_never_crosses_offset() {
        let fx = Fixture::new(v_notch()).unwrap();
        let cfg = FilterConfig::default();
        let mut f = ReferenceFilter::new(Vec3::new(-0.8, 0.2, 2.0), true, cfg);
        for k in 0..2000 {
            let s = k as f64 / 2000.0;
            let leader = Vec3::new(-0.8 + 1.6 * s, -0.3, 2.0 + 0.1 * s);
            f.update(&leader, &fx).unwrap();
            let d = fx.distance(&f.position(), 1.0).unwrap();
            assert!(d >= 0.01 - 1e-3, "step {k}: distance {d}");
        }
    }

    #[test]
    fn results_are_deterministic() {
        let fx = Fixture::new(uv_sphere(0.05, 16, 32)).unwrap();
        let cfg = FilterConfig::default();
        let x = Vec3::new(0.01, 0.0, 0.062);
        let a = filter_step(&x, &Vec3::new(0.012, 0.001, 0.058), &fx, &cfg).unwrap();
        let b = filter_step(&x, &Vec3::new(0.012, 0.001, 0.058), &fx, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
