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


//! Least-distance QP in three variables:
//!
//! ```text
//! minimise ½‖Δx − Δx_d‖²  subject to  nᵢᵀΔx ≥ bᵢ
//! ```
//!
//! Solved with the dual active-set method of Goldfarb and Idnani, which for
//! an identity Hessian starts at the unconstrained minimiser and adds the
//! most violated row each outer iteration. At most three rows are ever
//! active, so every linear solve is a padded 3×3 system.

use nalgebra::Matrix3;

use crate::Vec3;

const MAX_ITERATIONS: usize = 200;

/// Raw solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec3,
    /// Active row indices, in the order they entered.
    pub active: Vec<usize>,
    /// Lagrange multipliers matching `active`, all ≥ 0.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// False when the rows were found (numerically) infeasible or the
    /// iteration cap was hit; `x` is then zero.
    pub feasible: bool,
}

/// Dual active-set solve of the least-distance problem. `tol` is the
/// feasibility tolerance on each row.
pub fn least_distance(target: &Vec3, normals: &[Vec3], offsets: &[f64], tol: f64) -> QpSolution {
    assert_eq!(normals.len(), offsets.len(), "one offset per row");
    let mut x = *target;
    let mut active: Vec<usize> = Vec::with_capacity(3);
    let mut u: Vec<f64> = Vec::with_capacity(3);
    let mut iterations = 0;
    let infeasible = |iterations| QpSolution {
        x: Vec3::zeros(),
        active: Vec::new(),
        multipliers: Vec::new(),
        iterations,
        feasible: false,
    };

    loop {
        let Some((p, _)) = most_violated(&x, normals, offsets, &active, tol) else {
            return QpSolution { x, active, multipliers: u, iterations, feasible: true };
        };
        let np = normals[p];
        let mut up = 0.0;
        loop {
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return infeasible(iterations);
            }
            let (z, r) = step_direction(normals, &active, &np);
            // Largest dual step that keeps active multipliers non-negative.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &rk) in r.iter().enumerate().take(active.len()) {
                if rk > 0.0 {
                    let ratio = u[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let zn = z.dot(&np);
            let slack = np.dot(&x) - offsets[p];
            let t2 = if z.norm_squared() > 1e-24 && zn > 0.0 { -slack / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return infeasible(iterations);
            }
            for k in 0..active.len() {
                u[k] -= t * r[k];
            }
            up += t;
            if t2.is_finite() {
                x += z * t;
            }
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            let k = drop.expect("t1 finite implies a blocking row");
            active.remove(k);
            u.remove(k);
        }
        if active.len() > 3 {
            return infeasible(iterations);
        }
    }
}

fn most_violated(x: &Vec3, normals: &[Vec3], offsets: &[f64], active: &[usize], tol: f64) -> Option<(usize, f64)> {
    let mut worst: Option<(usize, f64)> = None;
    for (i, (n, b)) in normals.iter().zip(offsets).enumerate() {
        if active.contains(&i) {
            continue;
        }
        let s = n.dot(x) - b;
        if s < -tol && worst.map_or(true, |(_, w)| s < w) {
            worst = Some((i, s));
        }
    }
    worst
}

/// Primal direction `z` (component of `np` orthogonal to the active
/// normals) and dual direction `r` (coefficients of `np` on them).
fn step_direction(normals: &[Vec3], active: &[usize], np: &Vec3) -> (Vec3, [f64; 3]) {
    let q = active.len();
    if q == 0 {
        return (*np, [0.0; 3]);
    }
    let mut gram = Matrix3::identity();
    let mut rhs = Vec3::zeros();
    for i in 0..q {
        let ni = normals[active[i]];
        rhs[i] = ni.dot(np);
        for j in 0..q {
            gram[(i, j)] = ni.dot(&normals[active[j]]);
        }
    }
    let Some(inv) = gram.try_inverse() else {
        return (Vec3::zeros(), [0.0; 3]);
    };
    let r = inv * rhs;
    let mut z = *np;
    for i in 0..q {
        z -= normals[active[i]] * r[i];
    }
    if q == 3 {
        z = Vec3::zeros();
    }
    (z, [r[0], r[1], r[2]])
}

/// Largest violation of the KKT conditions at `sol`.
pub fn kkt_residual(target: &Vec3, normals: &[Vec3], offsets: &[f64], sol: &QpSolution) -> f64 {
    let mut grad = sol.x - target;
    let mut worst: f64 = 0.0;
    for (&i, &ui) in sol.active.iter().zip(&sol.multipliers) {
        grad -= normals[i] * ui;
        worst = worst.max(-ui);
        worst = worst.max((ui * (normals[i].dot(&sol.x) - offsets[i])).abs());
    }
    worst = worst.max(grad.norm());
    for (n, b) in normals.iter().zip(offsets) {
        worst = worst.max(b - n.dot(&sol.x));
    }
    worst
}
