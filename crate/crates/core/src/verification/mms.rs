//! Manufactured solution on the unit square:
//! `u = (e^t cos(pi(y - t)), e^t sin(pi(x + t)))`, `p = sin(x + y)(1 + t^2)`,
//! `T = sin(pi x) + y e^t`, with forcings derived by hand.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::stepper::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsProblem {
    pub re: f64,
    pub ri: f64,
    pub pr: f64,
}

impl Default for MmsProblem {
    /// Unit viscosity and diffusivity: `Re = Ri = Pr = 1`.
    fn default() -> Self {
        MmsProblem { re: 1.0, ri: 1.0, pr: 1.0 }
    }
}

impl MmsProblem {
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = t.exp();
        [e * (PI * (y - t)).cos(), e * (PI * (x + t)).sin()]
    }

    pub fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        (x + y).sin() * (1.0 + t * t)
    }

    pub fn temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        (PI * x).sin() + y * t.exp()
    }

    /// `grad u_c` for `c = 0, 1`.
    pub fn velocity_gradient(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let e = t.exp();
        [[0.0, -PI * e * (PI * (y - t)).sin()], [PI * e * (PI * (x + t)).cos(), 0.0]]
    }

    pub fn temperature_gradient(&self, x: f64, _y: f64, t: f64) -> [f64; 2] {
        [PI * (PI * x).cos(), t.exp()]
    }

    pub fn forcing(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = t.exp();
        let [u1, u2] = self.velocity(x, y, t);
        let (sy, cx) = ((PI * (y - t)).sin(), (PI * (x + t)).cos());
        let du1 = u1 + PI * e * sy;
        let du2 = u2 + PI * e * cx;
        let dp = (x + y).cos() * (1.0 + t * t);
        let lap = PI * PI / self.re;
        [
            du1 + u2 * (-PI * e * sy) + lap * u1 + dp,
            du2 + u1 * (PI * e * cx) + lap * u2 + dp - self.ri * self.temperature(x, y, t),
        ]
    }

    pub fn heat_source(&self, x: f64, y: f64, t: f64) -> f64 {
        let e = t.exp();
        let [u1, u2] = self.velocity(x, y, t);
        y * e + u1 * PI * (PI * x).cos() + u2 * e + PI * PI * (PI * x).sin() / (self.re * self.pr)
    }
}

impl Scenario for MmsProblem {
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        MmsProblem::velocity(self, x, y, t)
    }

    fn temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        MmsProblem::temperature(self, x, y, t)
    }

    fn has_exact_solution(&self) -> bool {
        true
    }

    fn temperature_dirichlet(&self) -> bool {
        true
    }

    fn forcing(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        MmsProblem::forcing(self, x, y, t)
    }

    fn heat_source(&self, x: f64, y: f64, t: f64) -> f64 {
        MmsProblem::heat_source(self, x, y, t)
    }
}
