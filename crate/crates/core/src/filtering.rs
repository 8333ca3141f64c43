//! Differential (Helmholtz) filter, van Cittert deconvolution, the
//! deconvolution-based indicator and the adaptively weighted,
//! divergence-constrained velocity filter.

use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{
    apply_dirichlet, assemble_div, assemble_load, assemble_mass, assemble_stiffness, block_diag2, ConstrainedSolver,
    DirichletBc, FeSpace, FemError, Field, QuadSamples,
};
use crate::linsolve::{
    solve_saddle, Backend, FactoredSaddle, LuCache, SaddleSystem, SolveError, SolveReport, SolverOptions, SparseMat,
};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("field has {got} components where {expected} are required")]
    Components { expected: usize, got: usize },
    #[error("field is not defined on the filter's velocity space")]
    Space,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Boundary data used for filtered fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FilterBoundary {
    /// Filtered fields vanish on the boundary.
    Homogeneous,
    /// Filtered fields keep the boundary values of their argument. Agrees
    /// with `Homogeneous` for fields that vanish on the boundary, and avoids
    /// an O(1) layer in the filtered wind otherwise.
    #[default]
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub alpha: f64,
    /// Van Cittert order N.
    pub order: usize,
    pub normalize: bool,
    pub boundary: FilterBoundary,
    /// Enforce a discretely divergence-free filtered velocity with a
    /// multiplier in the pressure space.
    pub constrained: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions { alpha: 0.1, order: 0, normalize: true, boundary: FilterBoundary::Trace, constrained: true }
    }
}

/// Indicator values at the default quadrature points of the velocity space.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSamples {
    pub samples: QuadSamples,
    /// Largest value before normalization.
    pub max_raw: f64,
    pub normalized: bool,
}

/// Operators shared by every filter application on a fixed pair of spaces.
pub struct FilterContext {
    opts: FilterOptions,
    solver: SolverOptions,
    vel: Arc<FeSpace>,
    pres: Arc<FeSpace>,
    mass: SparseMat,
    stiffness: SparseMat,
    div: SparseMat,
    mean_weights: Arc<Vec<f64>>,
    helmholtz: ConstrainedSolver,
    saddle_cache: Mutex<LuCache>,
    /// Factored Leray-alpha system, built on first use.
    leray: OnceLock<LerayCache>,
}

struct LerayCache {
    original: SparseMat,
    factored: FactoredSaddle,
}

impl std::fmt::Debug for FilterContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterContext").field("opts", &self.opts).field("velocity_dofs", &self.vel.num_dofs()).finish()
    }
}

impl FilterContext {
    pub fn new(
        vel: Arc<FeSpace>,
        pres: Arc<FeSpace>,
        opts: FilterOptions,
        solver: SolverOptions,
    ) -> Result<FilterContext, FilterError> {
        if !(opts.alpha > 0.0 && opts.alpha.is_finite()) {
            return Err(FilterError::Radius(opts.alpha));
        }
        let mass = assemble_mass(&vel);
        let stiffness = assemble_stiffness(&vel, None)?;
        let div = assemble_div(&vel, &pres)?;
        let mean_weights = Arc::new(assemble_load(&pres, |_, _, _| 1.0, 0.0)?);
        let a2 = opts.alpha * opts.alpha;
        let helm = SparseMat::linear_combination(&[(a2, &stiffness), (1.0, &mass)]);
        let helmholtz = ConstrainedSolver::new(helm, vel.boundary_dofs(), true, &solver)?;
        Ok(FilterContext {
            opts,
            solver,
            vel,
            pres,
            mass,
            stiffness,
            div,
            mean_weights,
            helmholtz,
            saddle_cache: Mutex::new(LuCache::default()),
            leray: OnceLock::new(),
        })
    }

    pub fn options(&self) -> &FilterOptions {
        &self.opts
    }

    pub fn alpha(&self) -> f64 {
        self.opts.alpha
    }

    pub fn order(&self) -> usize {
        self.opts.order
    }

    pub fn velocity_space(&self) -> &Arc<FeSpace> {
        &self.vel
    }

    pub fn pressure_space(&self) -> &Arc<FeSpace> {
        &self.pres
    }

    pub fn mass(&self) -> &SparseMat {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMat {
        &self.stiffness
    }

    pub fn div(&self) -> &SparseMat {
        &self.div
    }

    pub fn mean_weights(&self) -> &Arc<Vec<f64>> {
        &self.mean_weights
    }

    fn check(&self, f: &Field) -> Result<(), FilterError> {
        if !Arc::ptr_eq(f.space(), &self.vel) {
            return Err(FilterError::Space);
        }
        Ok(())
    }

    fn boundary_values(&self, comp: &[f64]) -> Option<Vec<f64>> {
        match self.opts.boundary {
            FilterBoundary::Homogeneous => None,
            FilterBoundary::Trace => Some(self.helmholtz.constrained().iter().map(|&d| comp[d]).collect()),
        }
    }

    fn velocity_bc(&self, u: &Field) -> DirichletBc {
        match self.opts.boundary {
            FilterBoundary::Homogeneous => DirichletBc::homogeneous(&self.vel, 2),
            FilterBoundary::Trace => DirichletBc::trace_of(u),
        }
    }
}

/// Solves `(alpha^2 K + M) psi~ = M psi` componentwise.
pub fn helmholtz_filter(ctx: &FilterContext, psi: &Field) -> Result<Field, FilterError> {
    ctx.check(psi)?;
    let mut out = Field::zeros(&ctx.vel, psi.components());
    for c in 0..psi.components() {
        let comp = psi.component(c);
        let rhs = ctx.mass.mul_vec(comp);
        let g = ctx.boundary_values(comp);
        let (x, _) = ctx.helmholtz.solve(&rhs, g.as_deref())?;
        out.component_mut(c).copy_from_slice(&x);
    }
    Ok(out)
}

/// `D_N psi~ = sum_{n=0}^{N} (I - F)^n psi~`, summed term by term.
pub fn van_cittert(ctx: &FilterContext, psi_filtered: &Field, psi_original: &Field) -> Result<Field, FilterError> {
    ctx.check(psi_filtered)?;
    ctx.check(psi_original)?;
    if psi_filtered.components() != psi_original.components() {
        return Err(FilterError::Components { expected: psi_original.components(), got: psi_filtered.components() });
    }
    let mut sum = psi_filtered.clone();
    let mut term = psi_filtered.clone();
    for _ in 0..ctx.opts.order {
        let filtered = helmholtz_filter(ctx, &term)?;
        term = term.combine(1.0, &filtered, -1.0);
        sum = sum.combine(1.0, &term, 1.0);
    }
    Ok(sum)
}

/// `D_N F psi`
pub fn deconvolve(ctx: &FilterContext, psi: &Field) -> Result<Field, FilterError> {
    let filtered = helmholtz_filter(ctx, psi)?;
    van_cittert(ctx, &filtered, psi)
}

/// `a(x) = |u(x) - (D_N u~)(x)|` at quadrature points, optionally divided by
/// `max(1, max a)`.
pub fn indicator(ctx: &FilterContext, u: &Field, normalize: bool) -> Result<IndicatorSamples, FilterError> {
    ctx.check(u)?;
    let d = deconvolve(ctx, u)?;
    let diff = u.combine(1.0, &d, -1.0);
    let nq = ctx.vel.rule().len();
    let mut values = vec![0.0; nq * ctx.vel.mesh().num_triangles()];
    for c in 0..u.components() {
        for (v, s) in values.iter_mut().zip(diff.quad_values(c)) {
            *v += s * s;
        }
    }
    values.iter_mut().for_each(|v| *v = v.sqrt());
    let max_raw = values.iter().fold(0.0, |m: f64, &v| m.max(v));
    if normalize {
        let s = max_raw.max(1.0);
        values.iter_mut().for_each(|v| *v /= s);
    }
    Ok(IndicatorSamples { samples: QuadSamples { values, points_per_triangle: nq }, max_raw, normalized: normalize })
}

fn constrained_filter(
    ctx: &FilterContext,
    u: &Field,
    weighted: &SparseMat,
    fixed: bool,
) -> Result<(Field, Field, SolveReport), FilterError> {
    let nv = 2 * ctx.vel.num_dofs();
    let np = ctx.pres.num_dofs();
    let build = || {
        let a2 = ctx.opts.alpha * ctx.opts.alpha;
        let scalar = SparseMat::linear_combination(&[(a2, weighted), (1.0, &ctx.mass)]);
        let block = block_diag2(&scalar);
        let dt = ctx.div.transpose();
        SparseMat::from_blocks(&[vec![Some(&block), Some(&dt)], vec![Some(&ctx.div), None]])
    };
    let mut rhs = block_diag2(&ctx.mass).mul_vec(u.coeffs());
    rhs.resize(nv + np, 0.0);
    let bc = ctx.velocity_bc(u);
    let (x, report) = if fixed && ctx.solver.backend == Backend::Direct {
        // the matrix and constrained set do not depend on u
        let cache = match ctx.leray.get() {
            Some(c) => c,
            None => {
                let original = build();
                let (matrix, _) = apply_dirichlet(&original, &rhs, &bc);
                let sys = SaddleSystem { matrix, n_primal: nv, mean_weights: Some(ctx.mean_weights.clone()) };
                let _ = ctx.leray.set(LerayCache { original, factored: FactoredSaddle::new(sys)? });
                ctx.leray.get().expect("cache was just filled")
            }
        };
        let (_, rhs) = apply_dirichlet(&cache.original, &rhs, &bc);
        cache.factored.solve(&rhs, &ctx.solver)?
    } else {
        let (matrix, rhs) = apply_dirichlet(&build(), &rhs, &bc);
        let sys = SaddleSystem { matrix, n_primal: nv, mean_weights: Some(ctx.mean_weights.clone()) };
        let mut cache = ctx.saddle_cache.lock().unwrap_or_else(|e| e.into_inner());
        solve_saddle(&sys, &rhs, &ctx.solver, Some(&mut cache))?
    };
    let ubar = Field::from_coeffs(&ctx.vel, 2, x[..nv].to_vec())?;
    let lambda = Field::from_coeffs(&ctx.pres, 1, x[nv..].to_vec())?;
    Ok((ubar, lambda, report))
}

fn check_velocity(ctx: &FilterContext, u: &Field) -> Result<(), FilterError> {
    ctx.check(u)?;
    if u.components() != 2 {
        return Err(FilterError::Components { expected: 2, got: u.components() });
    }
    Ok(())
}

/// Solves `[[alpha^2 K_a + M, D^T], [D, 0]] (u_bar, lambda) = (M u, 0)`.
pub fn adaptive_filter(ctx: &FilterContext, u: &Field, a: &IndicatorSamples) -> Result<(Field, Field), FilterError> {
    check_velocity(ctx, u)?;
    let ka = assemble_stiffness(&ctx.vel, Some(&a.samples))?;
    let (ubar, lambda, _) = constrained_filter(ctx, u, &ka, false)?;
    Ok((ubar, lambda))
}

/// Divergence-constrained Helmholtz filter, assembled from the plain
/// stiffness matrix rather than a unit indicator.
pub fn leray_alpha_filter(ctx: &FilterContext, u: &Field) -> Result<(Field, Field), FilterError> {
    check_velocity(ctx, u)?;
    let (ubar, lambda, _) = constrained_filter(ctx, u, &ctx.stiffness, true)?;
    Ok((ubar, lambda))
}

/// Adaptive filter without the divergence constraint.
pub fn adaptive_filter_unconstrained(
    ctx: &FilterContext,
    u: &Field,
    a: &IndicatorSamples,
) -> Result<Field, FilterError> {
    check_velocity(ctx, u)?;
    let ka = assemble_stiffness(&ctx.vel, Some(&a.samples))?;
    let a2 = ctx.opts.alpha * ctx.opts.alpha;
    let scalar = SparseMat::linear_combination(&[(a2, &ka), (1.0, &ctx.mass)]);
    let solver = ConstrainedSolver::new(scalar, ctx.vel.boundary_dofs(), true, &ctx.solver)?;
    let mut out = Field::zeros(&ctx.vel, 2);
    for c in 0..2 {
        let comp = u.component(c);
        let g = ctx.boundary_values(comp);
        let (x, _) = solver.solve(&ctx.mass.mul_vec(comp), g.as_deref())?;
        out.component_mut(c).copy_from_slice(&x);
    }
    Ok(out)
}

/// Filtered velocity for the configured constraint mode.
pub fn filter_velocity(ctx: &FilterContext, u: &Field, a: Option<&IndicatorSamples>) -> Result<Field, FilterError> {
    match (a, ctx.opts.constrained) {
        (Some(a), true) => Ok(adaptive_filter(ctx, u, a)?.0),
        (Some(a), false) => adaptive_filter_unconstrained(ctx, u, a),
        (None, true) => Ok(leray_alpha_filter(ctx, u)?.0),
        (None, false) => helmholtz_filter(ctx, u),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::TriMesh;

    fn spaces(n: usize) -> (Arc<FeSpace>, Arc<FeSpace>) {
        let mesh = Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), n, n).unwrap());
        (FeSpace::new(mesh.clone(), 2).unwrap(), FeSpace::new(mesh, 1).unwrap())
    }

    fn ctx(n: usize, alpha: f64, order: usize, boundary: FilterBoundary) -> FilterContext {
        let (v, p) = spaces(n);
        ctx_on(v, p, alpha, order, boundary)
    }

    fn ctx_on(v: Arc<FeSpace>, p: Arc<FeSpace>, alpha: f64, order: usize, boundary: FilterBoundary) -> FilterContext {
        let opts = FilterOptions { alpha, order, normalize: false, boundary, constrained: true };
        FilterContext::new(v, p, opts, SolverOptions::default()).unwrap()
    }

    fn random_field(ctx: &FilterContext, comps: usize, rng: &mut ChaCha8Rng) -> Field {
        let n = comps * ctx.velocity_space().num_dofs();
        Field::from_coeffs(ctx.velocity_space(), comps, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_in_zero_out() {
        let c = ctx(3, 0.2, 2, FilterBoundary::Homogeneous);
        let z = Field::zeros(c.velocity_space(), 2);
        assert_eq!(helmholtz_filter(&c, &z).unwrap().l2_norm(), 0.0);
        let a = indicator(&c, &z, true).unwrap();
        assert!(a.samples.values.iter().all(|v| *v == 0.0));
        let (ub, lam) = adaptive_filter(&c, &z, &a).unwrap();
        assert_eq!(ub.l2_norm(), 0.0);
        assert_eq!(lam.l2_norm(), 0.0);
        assert!(FilterContext::new(
            c.vel.clone(),
            c.pres.clone(),
            FilterOptions { alpha: 0.0, ..Default::default() },
            SolverOptions::default()
        )
        .is_err());
    }

    #[test]
    fn filter_is_non_expansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for boundary in [FilterBoundary::Homogeneous, FilterBoundary::Trace] {
            let c = ctx(3, 0.3, 0, boundary);
            for _ in 0..20 {
                let psi = random_field(&c, 1, &mut rng);
                let f = helmholtz_filter(&c, &psi).unwrap();
                if boundary == FilterBoundary::Homogeneous {
                    assert!(f.l2_norm() <= psi.l2_norm() * (1.0 + 1e-12));
                }
                assert!(f.is_finite());
            }
        }
    }

    #[test]
    fn deconvolution_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for boundary in [FilterBoundary::Homogeneous, FilterBoundary::Trace] {
            for order in 0..=3 {
                let c = ctx(3, 0.25, order, boundary);
                let psi = random_field(&c, 1, &mut rng);
                let lhs = psi.combine(1.0, &deconvolve(&c, &psi).unwrap(), -1.0);
                let mut rhs = psi.clone();
                for _ in 0..=order {
                    let f = helmholtz_filter(&c, &rhs).unwrap();
                    rhs = rhs.combine(1.0, &f, -1.0);
                }
                assert!(max_diff(&lhs, &rhs) <= 1e-10 * psi.coeffs().iter().map(|v| v.abs()).fold(0.0, f64::max));
            }
        }
    }

    #[test]
    fn order_zero_is_plain_filter_and_higher_orders_improve() {
        let (v, p) = spaces(8);
        let c0 = ctx_on(v.clone(), p.clone(), 1.0 / 8.0, 0, FilterBoundary::Homogeneous);
        let psi = Field::interpolate_scalar(c0.velocity_space(), |x, y| (PI * x).sin() * (PI * y).sin());
        let f = helmholtz_filter(&c0, &psi).unwrap();
        assert_eq!(max_diff(&van_cittert(&c0, &f, &psi).unwrap(), &f), 0.0);
        let mut last = f64::INFINITY;
        for order in 0..=2 {
            let c = ctx_on(v.clone(), p.clone(), 1.0 / 8.0, order, FilterBoundary::Homogeneous);
            let e = psi.combine(1.0, &deconvolve(&c, &psi).unwrap(), -1.0).l2_norm();
            assert!(e < last, "order {order}: {e} vs {last}");
            last = e;
        }
    }

    #[test]
    fn normalized_indicator_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = ctx(3, 0.3, 1, FilterBoundary::Homogeneous);
        let u = random_field(&c, 2, &mut rng).combine(40.0, &Field::zeros(c.velocity_space(), 2), 0.0);
        let a = indicator(&c, &u, true).unwrap();
        assert!(a.max_raw > 1.0);
        assert!(a.samples.max() <= 1.0 + 1e-15);
    }

    #[test]
    fn unit_indicator_reproduces_leray_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for boundary in [FilterBoundary::Homogeneous, FilterBoundary::Trace] {
            let c = ctx(4, 0.2, 0, boundary);
            let u = random_field(&c, 2, &mut rng);
            let one = IndicatorSamples {
                samples: QuadSamples::constant(c.velocity_space(), 1.0),
                max_raw: 1.0,
                normalized: true,
            };
            let (a, la) = adaptive_filter(&c, &u, &one).unwrap();
            let (b, lb) = leray_alpha_filter(&c, &u).unwrap();
            assert!(max_diff(&a, &b) < 1e-10);
            assert!(max_diff(&la, &lb) < 1e-10);
            if boundary == FilterBoundary::Homogeneous {
                let div = c.div().mul_vec(a.coeffs());
                assert!(div.iter().all(|r| r.abs() < 1e-10));
            }
            let mean: f64 = la.coeffs().iter().zip(c.mean_weights().iter()).map(|(x, w)| x * w).sum();
            assert!(mean.abs() <= 1e-10 * la.l2_norm().max(1e-300));
        }
    }

    #[test]
    fn smaller_radius_filters_less() {
        let u0 = |x: f64, y: f64| [(PI * x).sin() * (PI * y).cos(), -(PI * x).cos() * (PI * y).sin()];
        let mut last = f64::INFINITY;
        for alpha in [0.2, 0.1, 0.05] {
            let c = ctx(8, alpha, 0, FilterBoundary::Trace);
            let u = Field::interpolate_vector(c.velocity_space(), u0);
            let (ub, _) = leray_alpha_filter(&c, &u).unwrap();
            let e = u.combine(1.0, &ub, -1.0).l2_norm();
            assert!(e < last);
            last = e;
        }
    }
}
