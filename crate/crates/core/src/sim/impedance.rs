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


use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{ProbeState, SimError};
use crate::Vec3;

type Matrix6 = SMatrix<f64, 6, 6>;
type Vector6 = SVector<f64, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exact discretisation of the linear dynamics under a force held
    /// constant over the period.
    Exact,
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpedanceParams {
    /// Translational (N/m) then rotational (N·m/rad) stiffness.
    pub stiffness: [f64; 6],
    pub damping: [f64; 6],
    /// Translational inertia (kg), row-major.
    pub inertia: [[f64; 3]; 3],
    /// Control period (s).
    pub period: f64,
    pub integrator: Integrator,
}

impl Default for ImpedanceParams {
    fn default() -> Self {
        let stiffness = [1000.0, 1000.0, 1000.0, 20.0, 20.0, 20.0];
        ImpedanceParams {
            stiffness,
            damping: stiffness.map(|k: f64| 2.0 * k.sqrt()),
            inertia: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            period: 1e-3,
            integrator: Integrator::Exact,
        }
    }
}

impl ImpedanceParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Params(m.to_string()));
        if !self.stiffness.iter().chain(&self.damping).all(|&v| v > 0.0 && v.is_finite()) {
            return bad("stiffness and damping must be positive");
        }
        if !(self.period > 0.0 && self.period <= 2e-3) {
            return bad("control period must be in (0, 2 ms]");
        }
        let m = self.inertia_matrix();
        if (m - m.transpose()).amax() > 1e-12 || m.cholesky().is_none() {
            return bad("inertia must be symmetric positive definite");
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.inertia[i][j])
    }

    pub fn translational_stiffness(&self) -> Vec3 {
        Vec3::new(self.stiffness[0], self.stiffness[1], self.stiffness[2])
    }
}

/// Discretised translational dynamics plus orientation smoothing.
#[derive(Debug, Clone)]
pub struct ImpedanceModel {
    params: ImpedanceParams,
    k: Vec3,
    d: Vec3,
    inv_inertia: Matrix3<f64>,
    /// State transition of (x − x_eq, ẋ) over one period.
    phi: Matrix6,
    k_min: f64,
    orientation_gain: f64,
}

impl ImpedanceModel {
    pub fn new(params: ImpedanceParams) -> Result<Self, SimError> {
        params.validate()?;
        let k = params.translational_stiffness();
        let d = Vec3::new(params.damping[0], params.damping[1], params.damping[2]);
        let inv_inertia = params.inertia_matrix().try_inverse().expect("validated positive definite");
        let mut a = Matrix6::zeros();
        a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-inv_inertia * Matrix3::from_diagonal(&k)));
        a.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-inv_inertia * Matrix3::from_diagonal(&d)));
        let phi = (a * params.period).exp();
        let k_rot = params.stiffness[3..].iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ImpedanceModel {
            params,
            k,
            d,
            inv_inertia,
            phi,
            k_min: k.min(),
            orientation_gain: 1.0 - (-k_rot.sqrt() * params.period).exp(),
        })
    }

    pub fn params(&self) -> &ImpedanceParams {
        &self.params
    }

    /// Rest position under a constant external force.
    pub fn equilibrium(&self, x_desired: &Vec3, force: &Vec3) -> Vec3 {
        x_desired + force.component_div(&self.k)
    }

    /// `½ẋᵀΛẋ + ½x̃ᵀKx̃` about `x_desired`.
    pub fn energy(&self, state: &ProbeState, x_desired: &Vec3) -> f64 {
        let e = state.position - x_desired;
        let m = self.params.inertia_matrix();
        0.5 * state.velocity.dot(&(m * state.velocity)) + 0.5 * e.dot(&e.component_mul(&self.k))
    }

    /// Advances one period with `force` held constant. The returned state's
    /// wrench is left as given; the caller recomputes contact.
    pub fn step(
        &self,
        state: &ProbeState,
        x_desired: &Vec3,
        force: &Vec3,
        exam_orientation: &UnitQuaternion<f64>,
    ) -> Result<ProbeState, SimError> {
        let x_eq = self.equilibrium(x_desired, force);
        let e = state.position - x_eq;
        let m = self.params.inertia_matrix();
        let energy = 0.5 * state.velocity.dot(&(m * state.velocity)) + 0.5 * e.dot(&e.component_mul(&self.k));
        let bound = 10.0 * ((2.0 * energy / self.k_min).sqrt() + (x_eq - x_desired).norm()) + 1e-12;

        let (position, velocity) = match self.params.integrator {
            Integrator::Exact => {
                let s = Vector6::new(e.x, e.y, e.z, state.velocity.x, state.velocity.y, state.velocity.z);
                let s = self.phi * s;
                (x_eq + Vec3::new(s[0], s[1], s[2]), Vec3::new(s[3], s[4], s[5]))
            }
            Integrator::SemiImplicitEuler => {
                let dt = self.params.period;
                let f = (x_desired - state.position).component_mul(&self.k) - state.velocity.component_mul(&self.d) + force;
                let v = state.velocity + self.inv_inertia * f * dt;
                (state.position + v * dt, v)
            }
        };
        let error = (x_desired - position).norm();
        if !(error <= bound) {
            return Err(SimError::IntegrationFault { error, bound });
        }
        let orientation = state
            .orientation
            .try_slerp(exam_orientation, self.orientation_gain, 1e-12)
            .map_or(*exam_orientation, |q| UnitQuaternion::new_normalize(q.into_inner()));
        Ok(ProbeState { position, orientation, velocity, wrench: state.wrench })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ImpedanceModel {
        ImpedanceModel::new(ImpedanceParams::default()).unwrap()
    }

    #[test]
    fn step_response_matches_closed_form() {
        let m = model();
        let w = 1000f64.sqrt();
        let xd = Vec3::new(0.01, 0.0, 0.0);
        let mut s = ProbeState::at_rest(Vec3::zeros());
        let q = UnitQuaternion::identity();
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for k in 1..=2000 {
            s = m.step(&s, &xd, &Vec3::zeros(), &q).unwrap();
            let t = k as f64 * 1e-3;
            let expect = 0.01 * (1.0 - (1.0 + w * t) * (-w * t).exp());
            worst = worst.max((s.position.x - expect).abs());
            peak = peak.max(s.position.x);
        }
        assert!(worst < 1e-12, "max deviation {worst}");
        assert!(peak <= 0.01 + 1e-4);
    }

    #[test]
    fn semi_implicit_euler_is_less_accurate() {
        let p = ImpedanceParams { integrator: Integrator::SemiImplicitEuler, ..ImpedanceParams::default() };
        let m = ImpedanceModel::new(p).unwrap();
        let w = 1000f64.sqrt();
        let xd = Vec3::new(0.01, 0.0, 0.0);
        let mut s = ProbeState::at_rest(Vec3::zeros());
        let mut worst: f64 = 0.0;
        for k in 1..=500 {
            s = m.step(&s, &xd, &Vec3::zeros(), &UnitQuaternion::identity()).unwrap();
            let t = k as f64 * 1e-3;
            worst = worst.max((s.position.x - 0.01 * (1.0 - (1.0 + w * t) * (-w * t).exp())).abs());
        }
        assert!(worst > 1e-5 && worst < 2e-4, "{worst}");
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = model();
        let x = Vec3::new(0.1, -0.2, 0.3);
        let s0 = ProbeState::at_rest(x);
        let s1 = m.step(&s0, &x, &Vec3::zeros(), &UnitQuaternion::identity()).unwrap();
        assert_eq!(s1, s0);
    }

    #[test]
    fn constant_force_static_offset() {
        let m = model();
        let mut s = ProbeState::at_rest(Vec3::zeros());
        let f = Vec3::new(0.0, 0.0, -1.0);
        for _ in 0..3000 {
            s = m.step(&s, &Vec3::zeros(), &f, &UnitQuaternion::identity()).unwrap();
        }
        // x̃ = x_d − x
        assert!(((0.0 - s.position.z) - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn free_space_energy_never_increases() {
        let m = model();
        let xd = Vec3::new(0.003, -0.002, 0.001);
        let mut s = ProbeState { velocity: Vec3::new(0.05, 0.02, -0.04), ..ProbeState::at_rest(Vec3::zeros()) };
        let mut e = m.energy(&s, &xd);
        for _ in 0..2000 {
            s = m.step(&s, &xd, &Vec3::zeros(), &UnitQuaternion::identity()).unwrap();
            let e1 = m.energy(&s, &xd);
            assert!(e1 <= e + 1e-9);
            e = e1;
        }
    }

    #[test]
    fn unstable_discretisation_faults() {
        let p = ImpedanceParams {
            integrator: Integrator::SemiImplicitEuler,
            inertia: [[1e-4, 0.0, 0.0], [0.0, 1e-4, 0.0], [0.0, 0.0, 1e-4]],
            damping: [1.0; 6],
            period: 2e-3,
            ..ImpedanceParams::default()
        };
        let m = ImpedanceModel::new(p).unwrap();
        let mut s = ProbeState::at_rest(Vec3::zeros());
        let mut fault = None;
        for _ in 0..50 {
            match m.step(&s, &Vec3::new(0.01, 0.0, 0.0), &Vec3::zeros(), &UnitQuaternion::identity()) {
                Ok(next) => s = next,
                Err(e) => {
                    fault = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(fault, Some(SimError::IntegrationFault { .. })));
    }

    #[test]
    fn orientation_relaxes_to_exam_pose() {
        let m = model();
        let target = UnitQuaternion::from_euler_angles(0.3, -0.2, 0.1);
        let mut s = ProbeState::at_rest(Vec3::zeros());
        for _ in 0..3000 {
            s = m.step(&s, &Vec3::zeros(), &Vec3::zeros(), &target).unwrap();
        }
        assert!(s.orientation.angle_to(&target) < 1e-3);
        assert!((s.orientation.into_inner().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let p = ImpedanceParams { period: 5e-3, ..ImpedanceParams::default() };
        assert!(ImpedanceModel::new(p).is_err());
        let p = ImpedanceParams { stiffness: [0.0; 6], ..ImpedanceParams::default() };
        assert!(ImpedanceModel::new(p).is_err());
    }
}
