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


use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RibError;
use crate::body::RibId;
use crate::Vec3;

/// Fewest samples a border needs for a cubic fit.
pub const MIN_CURVE_SAMPLES: usize = 4;

/// Vector cubic `c0 + c1 t + c2 t² + c3 t³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub coefficients: [Vec3; 4],
}

impl Cubic {
    pub fn eval(&self, t: f64) -> Vec3 {
        let [c0, c1, c2, c3] = self.coefficients;
        c0 + (c1 + (c2 + c3 * t) * t) * t
    }

    pub fn derivative(&self, t: f64) -> Vec3 {
        let [_, c1, c2, c3] = self.coefficients;
        c1 + (c2 * 2.0 + c3 * (3.0 * t)) * t
    }

    pub fn second_derivative(&self, t: f64) -> Vec3 {
        let [_, _, c2, c3] = self.coefficients;
        c2 * 2.0 + c3 * (6.0 * t)
    }

    /// Coefficient-wise mean of two cubics.
    pub fn average(&self, other: &Cubic) -> Cubic {
        let mut c = [Vec3::zeros(); 4];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = (self.coefficients[k] + other.coefficients[k]) * 0.5;
        }
        Cubic { coefficients: c }
    }

    /// Least-squares fit of `points[i]` at parameters `ts[i]`.
    pub fn fit(ts: &[f64], points: &[Vec3]) -> Result<Cubic, RibError> {
        if ts.len() != points.len() || points.len() < MIN_CURVE_SAMPLES {
            return Err(RibError::Underdetermined { samples: points.len().min(ts.len()) });
        }
        let n = ts.len();
        let a = DMatrix::from_fn(n, 4, |i, k| ts[i].powi(k as i32));
        let qr = a.qr();
        let (q, r) = (qr.q(), qr.r());
        let mut c = [Vec3::zeros(); 4];
        for axis in 0..3 {
            let b = DVector::from_iterator(n, points.iter().map(|p| p[axis]));
            let x = r
                .solve_upper_triangular(&(q.transpose() * b))
                .ok_or(RibError::Underdetermined { samples: n })?;
            for k in 0..4 {
                c[k][axis] = x[k];
            }
        }
        Ok(Cubic { coefficients: c })
    }

    /// Radius of curvature at `t` (infinite on a straight stretch).
    pub fn curvature_radius(&self, t: f64) -> f64 {
        let d1 = self.derivative(t);
        let d2 = self.second_derivative(t);
        let k = d1.cross(&d2).norm() / d1.norm().powi(3);
        if k > 0.0 {
            1.0 / k
        } else {
            f64::INFINITY
        }
    }
}

/// Normalised cumulative chord length of an ordered polyline.
pub fn chord_parameters(points: &[Vec3]) -> Vec<f64> {
    let mut t = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    t.push(0.0);
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        t.push(acc);
    }
    if acc > 0.0 {
        for v in &mut t {
            *v /= acc;
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RibCurve {
    pub id: RibId,
    pub superior_samples: Vec<Vec3>,
    pub inferior_samples: Vec<Vec3>,
    pub superior: Cubic,
    pub inferior: Cubic,
    /// Pointwise mean of the two border cubics.
    pub central: Cubic,
}

/// Uniform stations used for the mean border separation.
const WIDTH_STATIONS: usize = 101;

impl RibCurve {
    /// Mean distance between the border cubics over `t ∈ [0, 1]`.
    pub fn mean_width(&self) -> f64 {
        let n = WIDTH_STATIONS;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                (self.superior.eval(t) - self.inferior.eval(t)).norm()
            })
            .sum::<f64>()
            / n as f64
    }

    /// Largest distance from a sample to its cubic at the sample's chord
    /// parameter.
    pub fn max_residual(&self) -> f64 {
        let worst = |samples: &[Vec3], c: &Cubic| {
            chord_parameters(samples).iter().zip(samples).map(|(&t, p)| (c.eval(t) - p).norm()).fold(0.0, f64::max)
        };
        worst(&self.superior_samples, &self.superior).max(worst(&self.inferior_samples, &self.inferior))
    }
}

/// Fits both borders of a rib over chord-length parameters and averages
/// them into the central curve.
///
/// ```
/// use ribvf::body::{RibId, Side};
/// use ribvf::ribs::fit_rib_curves;
/// use ribvf::Vec3;
///
/// let sup: Vec<Vec3> = (0..8).map(|i| Vec3::new(i as f64 * 0.01, 0.02, 0.0)).collect();
/// let inf: Vec<Vec3> = sup.iter().map(|p| p - Vec3::new(0.0, 0.02, 0.0)).collect();
/// let curve = fit_rib_curves(RibId { side: Side::Left, index: 1 }, &sup, &inf).unwrap();
/// assert!((curve.central.eval(0.5) - Vec3::new(0.035, 0.01, 0.0)).norm() < 1e-12);
/// assert!((curve.mean_width() - 0.02).abs() < 1e-12);
/// ```
pub fn fit_rib_curves(id: RibId, superior: &[Vec3], inferior: &[Vec3]) -> Result<RibCurve, RibError> {
    if superior.len() < MIN_CURVE_SAMPLES || inferior.len() < MIN_CURVE_SAMPLES {
        return Err(RibError::Underdetermined { samples: superior.len().min(inferior.len()) });
    }
    let sup = Cubic::fit(&chord_parameters(superior), superior)?;
    let inf = Cubic::fit(&chord_parameters(inferior), inferior)?;
    Ok(RibCurve {
        id,
        superior_samples: superior.to_vec(),
        inferior_samples: inferior.to_vec(),
        superior: sup,
        inferior: inf,
        central: sup.average(&inf),
    })
}
