//! Manufactured-solution convergence studies and the lock-exchange
//! benchmark.

pub mod marsigli;
pub mod mms;
pub mod properties;
pub mod rates;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::fem::{Field, QuadratureRule};
use crate::mesh::TriMesh;
use crate::stepper::{
    check_energy_bound, EnergyReport, FlowParams, InitStrategy, Model, Simulation, StepError, StepperOptions,
};

pub use marsigli::{run_marsigli, DiagnosticReport, MarsigliOutcome, MarsigliRun, MarsigliScenario, MeshRole};
pub use mms::MmsProblem;
pub use properties::{
    run_property_suite, run_stability_check, stability_horizon, PropertyCheck, PropertySuite, PropertySuiteConfig,
    StabilityOutcome, STABILITY_DTS,
};
pub use rates::{observed_rate, RateRow, RateTable};

/// Quadrature order used for errors against closed-form solutions.
pub const ERROR_QUADRATURE_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsRunConfig {
    /// Cells per side of the unit square; the nominal mesh size is `1 / cells`.
    pub cells: usize,
    pub velocity_degree: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Filter radius, defaulting to the nominal mesh size.
    pub alpha: Option<f64>,
    pub order: usize,
    pub model: Model,
    pub stepper: StepperOptions,
}

impl Default for MmsRunConfig {
    /// The temporal study: P2 on `h = 1/64`, adaptive filter with `N = 0`,
    /// `alpha = h`, integrated to `t = 1`.
    fn default() -> Self {
        MmsRunConfig {
            cells: 64,
            velocity_degree: 2,
            dt: 0.25,
            t_end: 1.0,
            alpha: None,
            order: 0,
            model: Model::AdaptiveLeray,
            stepper: mms_stepper_options(),
        }
    }
}

/// Stepper options for manufactured-solution runs: the second level is the
/// interpolated exact solution.
pub fn mms_stepper_options() -> StepperOptions {
    StepperOptions { init: InitStrategy::InterpolateExact, ..Default::default() }
}

impl MmsRunConfig {
    /// The spatial study at degree `k`: `dt = 1e-4` up to `t = 1e-3`.
    pub fn spatial(velocity_degree: usize) -> MmsRunConfig {
        MmsRunConfig { cells: 4, velocity_degree, dt: 1e-4, t_end: 1e-3, ..Default::default() }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsOutcome {
    pub err_u_l2: f64,
    pub err_u_21: f64,
    pub err_t_l2: f64,
    pub err_t_21: f64,
    pub max_divergence_residual: f64,
    pub energy: EnergyReport,
    pub steps: usize,
    pub u_norm: f64,
    pub t_norm: f64,
    pub wall_seconds: f64,
}

/// Accumulates `dt * sum_{n=1}^{M} ||grad e^n||^2` and the L2 errors at the
/// final level `M`. Level 0 is recorded for the completeness check only.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator {
    problem: MmsProblem,
    rule: QuadratureRule,
    dt: f64,
    /// `(level, ||grad e_u||^2, ||grad e_T||^2)` in recording order.
    levels: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub err_u_l2: f64,
    pub err_u_21: f64,
    pub err_t_l2: f64,
    pub err_t_21: f64,
}

impl ErrorAccumulator {
    pub fn new(problem: MmsProblem, dt: f64) -> ErrorAccumulator {
        ErrorAccumulator { problem, rule: QuadratureRule::for_order(ERROR_QUADRATURE_ORDER), dt, levels: Vec::new() }
    }

    fn push(&mut self, level: usize, u: &Field, temp: &Field) {
        let (p, t) = (self.problem, level as f64 * self.dt);
        let gu = u.grad_distance_sq(|x, y, c| p.velocity_gradient(x, y, t)[c], &self.rule);
        let gt = temp.grad_distance_sq(|x, y, _| p.temperature_gradient(x, y, t), &self.rule);
        self.levels.push((level, gu, gt));
    }

    /// Records both stored levels of a freshly initialized simulation.
    pub fn record_initial(&mut self, sim: &Simulation) {
        let s = sim.state();
        self.push(s.step_index - 1, &s.u_prev, &s.temp_prev);
        self.push(s.step_index, &s.u_curr, &s.temp_curr);
    }

    pub fn record(&mut self, sim: &Simulation) {
        let s = sim.state();
        self.push(s.step_index, &s.u_curr, &s.temp_curr);
    }

    /// Fails unless every level `0..=last` was recorded in order.
    pub fn finish(&self, sim: &Simulation, last: usize) -> Result<ErrorNorms, StepError> {
        let complete = self.levels.len() == last + 1 && self.levels.iter().enumerate().all(|(i, l)| l.0 == i);
        if !complete || sim.state().step_index != last {
            let got: Vec<usize> = self.levels.iter().map(|l| l.0).collect();
            return Err(StepError::Config(format!("error norms need levels 0..={last}, recorded {got:?}")));
        }
        let (gu, gt) = self.levels[1..].iter().fold((0.0, 0.0), |(a, b), l| (a + l.1, b + l.2));
        let s = sim.state();
        let (p, t) = (self.problem, s.time);
        Ok(ErrorNorms {
            err_u_l2: s.u_curr.l2_distance_sq(|x, y, c| p.velocity(x, y, t)[c], &self.rule).sqrt(),
            err_u_21: (self.dt * gu).sqrt(),
            err_t_l2: s.temp_curr.l2_distance_sq(|x, y, _| p.temperature(x, y, t), &self.rule).sqrt(),
            err_t_21: (self.dt * gt).sqrt(),
        })
    }
}

pub fn run_mms(problem: &MmsProblem, cfg: &MmsRunConfig) -> Result<MmsOutcome, StepError> {
    let start = Instant::now();
    let mesh =
        Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), cfg.cells, cfg.cells).map_err(crate::fem::FemError::from)?);
    let params = FlowParams {
        re: problem.re,
        ri: problem.ri,
        pr: problem.pr,
        dt: cfg.dt,
        t_end: cfg.t_end,
        alpha: cfg.alpha.unwrap_or(cfg.h()),
        order: cfg.order,
        model: cfg.model,
    };
    let mut sim = Simulation::new(mesh, cfg.velocity_degree, params, cfg.stepper, Arc::new(*problem))?;
    let mut acc = ErrorAccumulator::new(*problem, cfg.dt);
    acc.record_initial(&sim);
    let mut max_div: f64 = 0.0;
    let reports = sim.run(|s, r| {
        acc.record(s);
        max_div = max_div.max(r.divergence_residual);
    })?;
    let norms = acc.finish(&sim, params.num_levels())?;
    let s = sim.state();
    Ok(MmsOutcome {
        err_u_l2: norms.err_u_l2,
        err_u_21: norms.err_u_21,
        err_t_l2: norms.err_t_l2,
        err_t_21: norms.err_t_21,
        max_divergence_residual: max_div,
        energy: check_energy_bound(sim.ledger()),
        steps: reports.len(),
        u_norm: s.u_curr.l2_norm(),
        t_norm: s.temp_curr.l2_norm(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn row_from(resolution: f64, r: Result<MmsOutcome, StepError>) -> RateRow {
    match r {
        Ok(o) => RateRow {
            resolution,
            err_u_l2: o.err_u_l2,
            err_u_21: o.err_u_21,
            err_t_l2: o.err_t_l2,
            err_t_21: o.err_t_21,
            failure: None,
        },
        Err(e) => RateRow::failed(resolution, e.to_string()),
    }
}

/// How the time-step column of a temporal study maps to runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TemporalReading {
    /// Every row integrates to `t_end` with `dt` equal to the label.
    FixedEndTime { t_end: f64 },
    /// Every row integrates to `t_end = label` in a fixed number of steps.
    EndTimeIsLabel { steps: usize },
}

impl Default for TemporalReading {
    fn default() -> Self {
        TemporalReading::FixedEndTime { t_end: 1.0 }
    }
}

pub fn run_temporal_study(
    problem: &MmsProblem,
    base: &MmsRunConfig,
    dts: &[f64],
    reading: TemporalReading,
    mut progress: impl FnMut(&RateRow),
) -> RateTable {
    let mut table = RateTable::default();
    for &label in dts {
        let (dt, t_end) = match reading {
            TemporalReading::FixedEndTime { t_end } => (label, t_end),
            TemporalReading::EndTimeIsLabel { steps } => (label / steps as f64, label),
        };
        let cfg = MmsRunConfig { dt, t_end, ..*base };
        let row = row_from(label, run_mms(problem, &cfg));
        progress(&row);
        table.rows.push(row);
    }
    table
}

/// Spatial study over `cells` per side; the filter radius follows `1 / cells`
/// unless `base.alpha` is set.
pub fn run_spatial_study(
    problem: &MmsProblem,
    base: &MmsRunConfig,
    cells: &[usize],
    mut progress: impl FnMut(&RateRow),
) -> RateTable {
    let mut table = RateTable::default();
    for &n in cells {
        let cfg = MmsRunConfig { cells: n, ..*base };
        let row = row_from(cfg.h(), run_mms(problem, &cfg));
        progress(&row);
        table.rows.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepper::Scenario;

    /// Stationary fields that P2 reproduces exactly.
    struct Quadratic;

    impl Scenario for Quadratic {
        fn velocity(&self, x: f64, y: f64, _: f64) -> [f64; 2] {
            [y * y, x * x]
        }
        fn temperature(&self, x: f64, y: f64, _: f64) -> f64 {
            x * x + y
        }
        fn has_exact_solution(&self) -> bool {
            true
        }
        fn temperature_dirichlet(&self) -> bool {
            true
        }
        fn forcing(&self, x: f64, y: f64, _: f64) -> [f64; 2] {
            // u.grad u - lap u + grad p - T k, with p = x and Re = Ri = 1
            [x * x * 2.0 * y - 2.0 + 1.0, y * y * 2.0 * x - 2.0 - (x * x + y)]
        }
        fn heat_source(&self, x: f64, y: f64, _: f64) -> f64 {
            y * y * 2.0 * x + x * x - 2.0
        }
    }

    #[test]
    fn representable_solution_is_reproduced() {
        let mesh = Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), 3, 3).unwrap());
        let params =
            FlowParams { re: 1.0, ri: 1.0, pr: 1.0, dt: 0.1, t_end: 0.3, alpha: 0.3, order: 0, model: Model::NoModel };
        let opts = StepperOptions { init: InitStrategy::InterpolateExact, ..Default::default() };
        let mut sim = Simulation::new(mesh, 2, params, opts, Arc::new(Quadratic)).unwrap();
        sim.run(|_, _| {}).unwrap();
        let s = sim.state();
        let exact = crate::fem::Field::interpolate_vector(s.u_curr.space(), |x, y| [y * y, x * x]);
        let diff = s.u_curr.coeffs().iter().zip(exact.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
        let te = crate::fem::Field::interpolate_scalar(s.temp_curr.space(), |x, y| x * x + y);
        let diff = s.temp_curr.coeffs().iter().zip(te.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn accumulator_requires_every_level() {
        let mesh = Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap());
        let params =
            FlowParams { re: 1.0, ri: 1.0, pr: 1.0, dt: 0.5, t_end: 1.0, alpha: 0.5, order: 0, model: Model::NoModel };
        let opts = StepperOptions { init: InitStrategy::InterpolateExact, ..Default::default() };
        let sim = Simulation::new(mesh, 2, params, opts, Arc::new(MmsProblem::default())).unwrap();
        let mut acc = ErrorAccumulator::new(MmsProblem::default(), 0.5);
        assert!(acc.finish(&sim, 1).is_err());
        acc.record_initial(&sim);
        assert!(acc.finish(&sim, 2).is_err());
        let n = acc.finish(&sim, 1).unwrap();
        assert!(n.err_u_l2 > 0.0 && n.err_u_l2 < 0.1);
        // only level 1 enters the (2,1) sum
        let prob = MmsProblem::default();
        let rule = QuadratureRule::for_order(ERROR_QUADRATURE_ORDER);
        let g1 = sim.state().u_curr.grad_distance_sq(|x, y, c| prob.velocity_gradient(x, y, 0.5)[c], &rule);
        assert!((n.err_u_21 - (0.5 * g1).sqrt()).abs() < 1e-14);
    }
}
