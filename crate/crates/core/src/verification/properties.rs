//! Exact algebraic identities of the discrete operators, checked on small
//! meshes with seeded random data, and the unconditional-stability audit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fem::{assemble_skew_convection_scalar, assemble_skew_convection_vector, FeSpace, Field, QuadSamples};
use crate::filtering::{
    adaptive_filter, deconvolve, helmholtz_filter, leray_alpha_filter, FilterBoundary, FilterContext, FilterOptions,
    IndicatorSamples,
};
use crate::linsolve::{SolverOptions, SparseMat};
use crate::mesh::TriMesh;
use crate::stepper::{check_energy_bound, EnergyReport, FlowParams, Model, Simulation, StepError, StepperOptions};

use super::MmsProblem;

/// Tolerance of every relative identity in the suite.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Largest admissible `max_q |(div u^{n+1}, q_q)|` after any step.
pub const DIVERGENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    /// Worst observed defect.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> PropertyCheck {
        PropertyCheck { name: name.into(), value, tolerance, passed: value.is_finite() && value <= tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertySuiteConfig {
    pub cells: usize,
    pub alpha: f64,
    /// Random vectors per identity.
    pub samples: usize,
    pub seed: u64,
    /// Steps of the divergence check per model.
    pub steps: usize,
}

impl Default for PropertySuiteConfig {
    fn default() -> Self {
        PropertySuiteConfig { cells: 4, alpha: 0.25, samples: 100, seed: 20240601, steps: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySuite {
    pub checks: Vec<PropertyCheck>,
}

impl PropertySuite {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn unit_square(cells: usize) -> Result<Arc<TriMesh>, StepError> {
    Ok(Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), cells, cells).map_err(crate::fem::FemError::from)?))
}

fn random_field(space: &Arc<FeSpace>, comps: usize, rng: &mut ChaCha8Rng) -> Field {
    let n = comps * space.num_dofs();
    Field::from_coeffs(space, comps, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("length matches")
}

/// Random field vanishing on the boundary.
fn random_interior_field(space: &Arc<FeSpace>, comps: usize, rng: &mut ChaCha8Rng) -> Field {
    let mut f = random_field(space, comps, rng);
    let mask = space.boundary_mask();
    for c in 0..comps {
        f.component_mut(c).iter_mut().zip(&mask).filter(|(_, b)| **b).for_each(|(v, _)| *v = 0.0);
    }
    f
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn rel_diff(a: &Field, b: &Field) -> f64 {
    let d = a.coeffs().iter().zip(b.coeffs()).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
    d / max_abs(a.coeffs()).max(max_abs(b.coeffs())).max(f64::MIN_POSITIVE)
}

/// `|v^T A v| / sum_ij |v_i A_ij v_j|`
fn skew_defect(a: &SparseMat, v: &[f64]) -> f64 {
    let mut scale = 0.0;
    for (i, vi) in v.iter().enumerate() {
        for (j, aij) in a.row(i) {
            scale += (vi * aij * v[j]).abs();
        }
    }
    a.bilinear(v, v).abs() / scale.max(f64::MIN_POSITIVE)
}

fn filter_ctx(
    vel: &Arc<FeSpace>,
    pres: &Arc<FeSpace>,
    alpha: f64,
    order: usize,
    boundary: FilterBoundary,
) -> Result<FilterContext, StepError> {
    let opts = FilterOptions { alpha, order, normalize: false, boundary, constrained: true };
    Ok(FilterContext::new(vel.clone(), pres.clone(), opts, SolverOptions::default())?)
}

pub fn run_property_suite(cfg: &PropertySuiteConfig) -> Result<PropertySuite, StepError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mesh = unit_square(cfg.cells)?;
    let mut checks = Vec::new();

    for degree in [2, 3] {
        let vel = FeSpace::new(mesh.clone(), degree)?;
        let pres = FeSpace::new(mesh.clone(), degree - 1)?;

        let (mut vec_worst, mut scal_worst) = (0.0f64, 0.0f64);
        for _ in 0..cfg.samples {
            let wind = random_field(&vel, 2, &mut rng);
            let b = assemble_skew_convection_vector(&vel, &wind)?;
            let c = assemble_skew_convection_scalar(&vel, &wind)?;
            vec_worst = vec_worst.max(skew_defect(&b, random_field(&vel, 2, &mut rng).coeffs()));
            scal_worst = scal_worst.max(skew_defect(&c, random_field(&vel, 1, &mut rng).coeffs()));
        }
        checks.push(PropertyCheck::new(format!("skew_vector_p{degree}"), vec_worst, IDENTITY_TOL));
        checks.push(PropertyCheck::new(format!("skew_scalar_p{degree}"), scal_worst, IDENTITY_TOL));

        for boundary in [FilterBoundary::Homogeneous, FilterBoundary::Trace] {
            let tag = match boundary {
                FilterBoundary::Homogeneous => "homogeneous",
                FilterBoundary::Trace => "trace",
            };
            for order in 0..=3 {
                let ctx = filter_ctx(&vel, &pres, cfg.alpha, order, boundary)?;
                let mut worst = 0.0f64;
                for _ in 0..(cfg.samples / 10).max(1) {
                    let psi = random_field(&vel, 1, &mut rng);
                    let lhs = psi.combine(1.0, &deconvolve(&ctx, &psi)?, -1.0);
                    let mut rhs = psi.clone();
                    for _ in 0..=order {
                        let f = helmholtz_filter(&ctx, &rhs)?;
                        rhs = rhs.combine(1.0, &f, -1.0);
                    }
                    let d = lhs.coeffs().iter().zip(rhs.coeffs()).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
                    worst = worst.max(d / max_abs(psi.coeffs()));
                }
                checks.push(PropertyCheck::new(
                    format!("deconvolution_identity_p{degree}_{tag}_n{order}"),
                    worst,
                    IDENTITY_TOL,
                ));
            }

            // Non-expansive in L2; with trace data only for fields that vanish on the boundary.
            let ctx = filter_ctx(&vel, &pres, cfg.alpha, 0, boundary)?;
            let mut worst = 0.0f64;
            for _ in 0..(cfg.samples / 10).max(1) {
                let psi = match boundary {
                    FilterBoundary::Homogeneous => random_field(&vel, 1, &mut rng),
                    FilterBoundary::Trace => random_interior_field(&vel, 1, &mut rng),
                };
                let f = helmholtz_filter(&ctx, &psi)?;
                worst = worst.max(f.l2_norm() / psi.l2_norm() - 1.0);
            }
            checks.push(PropertyCheck::new(
                format!("filter_non_expansive_p{degree}_{tag}"),
                worst.max(0.0),
                IDENTITY_TOL,
            ));

            let one = IndicatorSamples { samples: QuadSamples::constant(&vel, 1.0), max_raw: 1.0, normalized: true };
            let mut worst = 0.0f64;
            for _ in 0..(cfg.samples / 20).max(1) {
                let u = random_field(&vel, 2, &mut rng);
                let (ua, la) = adaptive_filter(&ctx, &u, &one)?;
                let (ub, lb) = leray_alpha_filter(&ctx, &u)?;
                worst = worst.max(rel_diff(&ua, &ub)).max(rel_diff(&la, &lb));
            }
            checks.push(PropertyCheck::new(
                format!("unit_indicator_is_leray_alpha_p{degree}_{tag}"),
                worst,
                IDENTITY_TOL,
            ));
        }
    }

    let problem = MmsProblem::default();
    for model in [Model::NoModel, Model::LerayAlpha, Model::AdaptiveLeray] {
        let params = FlowParams {
            re: problem.re,
            ri: problem.ri,
            pr: problem.pr,
            dt: 0.05,
            t_end: 0.05 * cfg.steps as f64,
            alpha: 1.0 / cfg.cells as f64,
            order: 1,
            model,
        };
        let mut sim = Simulation::new(mesh.clone(), 2, params, StepperOptions::default(), Arc::new(problem))?;
        let mut worst = 0.0f64;
        sim.run(|_, r| worst = worst.max(r.divergence_residual))?;
        checks.push(PropertyCheck::new(format!("divergence_residual_{}", model.name()), worst, DIVERGENCE_TOL));
    }
    Ok(PropertySuite { checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub dt: f64,
    pub steps: usize,
    pub finite: bool,
    pub energy: EnergyReport,
    pub u_norm: f64,
    pub t_norm: f64,
}

impl StabilityOutcome {
    pub fn passed(&self) -> bool {
        self.finite && self.energy.all_hold && self.energy.steps == self.steps
    }
}

/// Step sizes of the stability audit.
pub const STABILITY_DTS: [f64; 3] = [0.1, 1.0, 10.0];

/// End time of the stability audit at step `dt`: `t = 10`, or two steps when
/// `dt` is larger. The manufactured fields grow like `e^t`; much longer
/// horizons only measure the conditioning of the step systems.
pub fn stability_horizon(dt: f64) -> f64 {
    10f64.max(2.0 * dt)
}

/// Manufactured-solution run from `t = 0` to `t_end` with step `dt`, started
/// from the interpolated initial data alone.
pub fn run_stability_check(dt: f64, t_end: f64, cells: usize, model: Model) -> Result<StabilityOutcome, StepError> {
    let problem = MmsProblem::default();
    let params = FlowParams {
        re: problem.re,
        ri: problem.ri,
        pr: problem.pr,
        dt,
        t_end,
        alpha: 1.0 / cells as f64,
        order: 0,
        model,
    };
    let mut sim = Simulation::new(unit_square(cells)?, 2, params, StepperOptions::default(), Arc::new(problem))?;
    let reports = sim.run(|_, _| {})?;
    let s = sim.state();
    let finite = s.u_curr.is_finite() && s.temp_curr.is_finite() && s.p_curr.is_finite();
    Ok(StabilityOutcome {
        dt,
        steps: reports.len(),
        finite,
        energy: check_energy_bound(sim.ledger()),
        u_norm: s.u_curr.l2_norm(),
        t_norm: s.temp_curr.l2_norm(),
    })
}
