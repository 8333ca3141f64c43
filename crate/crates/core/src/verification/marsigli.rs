//! Lock exchange in the insulated box `[0,8] x [0,1]`: fluid at rest, cold
//! (`T = 1`) left of `x = 4` and warm (`T = 1.5`) right of it.
//!
//! With buoyancy `+Ri T k` the warm fluid spreads leftward along the lid and
//! the cold fluid rightward along the floor, so the mean horizontal velocity
//! of the upper half is negative.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::FemError;
use crate::io::{snapshot_data, write_vtk, IoError, JsonLines};
use crate::mesh::TriMesh;
use crate::stepper::{FlowParams, Model, Scenario, Simulation, StepError, StepReport, StepperOptions};

/// Temperatures in this band count as physical.
pub const TEMPERATURE_BAND: (f64, f64) = (0.99, 1.51);

#[derive(Debug, Error)]
pub enum MarsigliError {
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<FemError> for MarsigliError {
    fn from(e: FemError) -> Self {
        MarsigliError::Step(StepError::Fem(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshRole {
    /// 80 x 40 cells: 26,082 velocity, 3,321 pressure and 13,041
    /// temperature dofs with P2/P1/P2.
    Coarse,
    Fine,
}

impl MeshRole {
    pub fn cells(self) -> (usize, usize) {
        match self {
            MeshRole::Coarse => (80, 40),
            MeshRole::Fine => (240, 70),
        }
    }

    /// Nominal mesh size, the default filter radius.
    pub fn h(self) -> f64 {
        let (nx, ny) = self.cells();
        nominal_h(nx, ny)
    }

    pub fn dt(self) -> f64 {
        match self {
            MeshRole::Coarse => 0.02,
            MeshRole::Fine => 0.025,
        }
    }
}

/// Larger cell side of an `nx x ny` grid on the 8 x 1 box.
pub fn nominal_h(nx: usize, ny: usize) -> f64 {
    (8.0 / nx as f64).max(1.0 / ny as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarsigliScenario {
    pub split: f64,
    pub cold: f64,
    pub warm: f64,
}

impl Default for MarsigliScenario {
    fn default() -> Self {
        MarsigliScenario { split: 4.0, cold: 1.0, warm: 1.5 }
    }
}

impl Scenario for MarsigliScenario {
    fn velocity(&self, _: f64, _: f64, _: f64) -> [f64; 2] {
        [0.0; 2]
    }

    /// Nodes on the interface take the cold value.
    fn temperature(&self, x: f64, _: f64, _: f64) -> f64 {
        if x <= self.split {
            self.cold
        } else {
            self.warm
        }
    }

    fn temperature_dirichlet(&self) -> bool {
        false
    }

    fn forced(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub step: usize,
    pub time: f64,
    /// Range over quadrature points.
    pub temp_min: f64,
    pub temp_max: f64,
    /// Range over nodal values.
    pub dof_min: f64,
    pub dof_max: f64,
    /// Area fraction of quadrature points outside [`TEMPERATURE_BAND`].
    pub out_of_range_fraction: f64,
    pub kinetic_energy: f64,
    /// Area-weighted mean of `u_x` over `y > 1/2`.
    pub top_mean_ux: f64,
    pub temperature_integral: f64,
    /// `|int T - int T^0| / |int T^0|`
    pub temperature_drift: f64,
    pub indicator_mean: Option<f64>,
    pub indicator_max: Option<f64>,
    pub divergence_residual: Option<f64>,
}

pub fn diagnose(sim: &Simulation, initial_integral: f64, report: Option<&StepReport>) -> DiagnosticReport {
    let s = sim.state();
    let space = s.temp_curr.space();
    let rule = space.rule();
    let nq = rule.len();
    let temps = s.temp_curr.quad_values(0);
    let ux = s.u_curr.quad_values(0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut area, mut outside, mut top_area, mut top_ux) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..space.mesh().num_triangles() {
        let a = space.geometry(t).area;
        for (q, p) in space.quadrature_points(t).enumerate() {
            let w = a * rule.weights[q];
            let v = temps[t * nq + q];
            lo = lo.min(v);
            hi = hi.max(v);
            area += w;
            if !(TEMPERATURE_BAND.0..=TEMPERATURE_BAND.1).contains(&v) {
                outside += w;
            }
            if p[1] > 0.5 {
                top_area += w;
                top_ux += w * ux[t * nq + q];
            }
        }
    }
    let integral = s.temp_curr.integral()[0];
    let coeffs = s.temp_curr.coeffs();
    DiagnosticReport {
        dof_min: coeffs.iter().copied().fold(f64::INFINITY, f64::min),
        dof_max: coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        step: s.step_index,
        time: s.time,
        temp_min: lo,
        temp_max: hi,
        out_of_range_fraction: outside / area,
        kinetic_energy: 0.5 * s.u_curr.l2_norm_sq(),
        top_mean_ux: if top_area > 0.0 { top_ux / top_area } else { 0.0 },
        temperature_integral: integral,
        temperature_drift: ((integral - initial_integral) / initial_integral).abs(),
        indicator_mean: report.and_then(|r| r.indicator.map(|i| i.mean)),
        indicator_max: report.and_then(|r| r.indicator.map(|i| i.max)),
        divergence_residual: report.map(|r| r.divergence_residual),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsigliRun {
    pub scenario: MarsigliScenario,
    pub cells: (usize, usize),
    pub velocity_degree: usize,
    pub re: f64,
    pub ri: f64,
    pub pr: f64,
    pub dt: f64,
    pub t_end: f64,
    pub alpha: f64,
    pub order: usize,
    pub model: Model,
    pub stepper: StepperOptions,
    pub snapshot_times: Vec<f64>,
    pub refine_vtk: bool,
    /// VTK snapshots and `diagnostics.jsonl` go here when set.
    pub out_dir: Option<PathBuf>,
}

impl MarsigliRun {
    /// `Re = 1000`, `Ri = 4`, `Pr = 1` up to `t = 8`, adaptive filter with
    /// `N = 1` and `alpha = h`.
    pub fn new(role: MeshRole, model: Model) -> MarsigliRun {
        MarsigliRun {
            scenario: MarsigliScenario::default(),
            cells: role.cells(),
            velocity_degree: 2,
            re: 1000.0,
            ri: 4.0,
            pr: 1.0,
            dt: role.dt(),
            t_end: 8.0,
            alpha: role.h(),
            order: 1,
            model,
            stepper: StepperOptions::default(),
            snapshot_times: vec![2.0, 4.0, 6.0, 8.0],
            refine_vtk: true,
            out_dir: None,
        }
    }

    pub fn params(&self) -> FlowParams {
        FlowParams {
            re: self.re,
            ri: self.ri,
            pr: self.pr,
            dt: self.dt,
            t_end: self.t_end,
            alpha: self.alpha,
            order: self.order,
            model: self.model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub diagnostics: DiagnosticReport,
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsigliOutcome {
    pub model: Model,
    pub reports: Vec<DiagnosticReport>,
    pub snapshots: Vec<Snapshot>,
    /// Set when the run stopped early; the last finite state is then
    /// written as `last_finite.vtk`.
    pub aborted: Option<String>,
    pub wall_seconds: f64,
}

impl MarsigliOutcome {
    pub fn snapshot_at(&self, t: f64) -> Option<&DiagnosticReport> {
        self.snapshots.iter().map(|s| &s.diagnostics).find(|d| (d.time - t).abs() < 1e-9 * t.max(1.0))
    }

    /// Out-of-range fraction at `t`; a run that failed before `t` counts as
    /// entirely out of range.
    pub fn out_of_range_at(&self, t: f64) -> f64 {
        self.snapshot_at(t).map_or(1.0, |d| d.out_of_range_fraction)
    }
}

fn write_snapshot(sim: &Simulation, dir: &Path, name: &str, refine: bool) -> Result<PathBuf, MarsigliError> {
    let (mesh, data) = snapshot_data(sim.state(), sim.last_indicator(), refine)?;
    let path = dir.join(name);
    write_vtk(&path, &mesh, &data, name)?;
    Ok(path)
}

pub fn run_marsigli(
    run: &MarsigliRun,
    mut observe: impl FnMut(&DiagnosticReport),
) -> Result<MarsigliOutcome, MarsigliError> {
    let start = Instant::now();
    let (nx, ny) = run.cells;
    let mesh = Arc::new(TriMesh::rect((0.0, 8.0), (0.0, 1.0), nx, ny).map_err(FemError::from)?);
    let mut sim = Simulation::new(mesh, run.velocity_degree, run.params(), run.stepper, Arc::new(run.scenario))?;
    let initial = sim.state().temp_prev.integral()[0];
    let mut log = match &run.out_dir {
        Some(d) => {
            std::fs::create_dir_all(d)
                .map_err(|e| IoError::Io { path: d.display().to_string(), message: e.to_string() })?;
            Some(JsonLines::create(&d.join(format!("diagnostics_{}.jsonl", run.model.name())))?)
        }
        None => None,
    };
    let mut outcome = MarsigliOutcome {
        model: run.model,
        reports: Vec::new(),
        snapshots: Vec::new(),
        aborted: None,
        wall_seconds: 0.0,
    };
    let first = diagnose(&sim, initial, None);
    observe(&first);
    outcome.reports.push(first);
    let half = 0.5 * run.dt;
    while sim.state().step_index < run.params().num_levels() {
        let report = match sim.step() {
            Ok(r) => r,
            Err(e) => {
                outcome.aborted = Some(e.to_string());
                if let Some(d) = &run.out_dir {
                    write_snapshot(&sim, d, &format!("last_finite_{}.vtk", run.model.name()), run.refine_vtk)?;
                }
                break;
            }
        };
        let diag = diagnose(&sim, initial, Some(&report));
        if let Some(l) = log.as_mut() {
            l.write(&diag)?;
        }
        observe(&diag);
        if run.snapshot_times.iter().any(|&t| (t - diag.time).abs() < half) {
            let vtk = match &run.out_dir {
                Some(d) => {
                    let name = format!("snapshot_{}_t{:05.2}.vtk", run.model.name(), diag.time);
                    Some(write_snapshot(&sim, d, &name, run.refine_vtk)?)
                }
                None => None,
            };
            outcome.snapshots.push(Snapshot { diagnostics: diag, vtk });
        }
        outcome.reports.push(diag);
    }
    if let Some(l) = log.as_mut() {
        l.flush()?;
    }
    outcome.wall_seconds = start.elapsed().as_secs_f64();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_run(model: Model) -> MarsigliRun {
        MarsigliRun {
            cells: (16, 4),
            dt: 0.05,
            t_end: 0.2,
            snapshot_times: vec![0.1, 0.2],
            ..MarsigliRun::new(MeshRole::Coarse, model)
        }
    }

    #[test]
    fn coarse_mesh_has_the_benchmark_dof_counts() {
        let (nx, ny) = MeshRole::Coarse.cells();
        let mesh = Arc::new(TriMesh::rect((0.0, 8.0), (0.0, 1.0), nx, ny).unwrap());
        let v = crate::fem::FeSpace::new(mesh.clone(), 2).unwrap();
        let p = crate::fem::FeSpace::new(mesh, 1).unwrap();
        assert_eq!((2 * v.num_dofs(), p.num_dofs(), v.num_dofs()), (26_082, 3_321, 13_041));
    }

    #[test]
    fn initial_diagnostics() {
        let run = short_run(Model::NoModel);
        let mesh = Arc::new(TriMesh::rect((0.0, 8.0), (0.0, 1.0), 16, 4).unwrap());
        let opts = StepperOptions::default();
        let sim = Simulation::new(mesh, 2, run.params(), opts, Arc::new(run.scenario)).unwrap();
        let s = sim.state();
        let t0 = &s.temp_prev;
        for (&v, p) in t0.coeffs().iter().zip(t0.space().dof_coords()) {
            assert_eq!(v, if p[0] <= 4.0 { 1.0 } else { 1.5 });
        }
        assert_eq!(s.u_prev.l2_norm(), 0.0);
        let coeffs = t0.coeffs();
        assert_eq!(coeffs.iter().copied().fold(f64::INFINITY, f64::min), 1.0);
        assert_eq!(coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.5);
    }

    #[test]
    fn short_runs_conserve_heat_and_record_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        for model in [Model::NoModel, Model::LerayAlpha, Model::AdaptiveLeray] {
            let run = MarsigliRun { out_dir: Some(dir.path().to_path_buf()), ..short_run(model) };
            let out = run_marsigli(&run, |_| {}).unwrap();
            assert!(out.aborted.is_none());
            assert_eq!(out.snapshots.len(), 2);
            let last = out.reports.last().unwrap();
            assert!(last.temperature_drift < 1e-3, "{model:?}: drift {}", last.temperature_drift);
            assert!(last.kinetic_energy > 0.0);
            assert!(out.snapshot_at(0.2).is_some());
            assert!(out.snapshots.iter().all(|s| s.vtk.as_ref().unwrap().exists()));
        }
        assert!(dir.path().join("diagnostics_adaptive.jsonl").exists());
    }
}
