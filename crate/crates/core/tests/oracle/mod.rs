//! Dense references for every operator, built from scratch: monomial
//! Lagrange bases from a Vandermonde inverse, collapsed Gauss quadrature and
//! Gaussian elimination. The reference shares only the dof numbering and
//! the dof coordinates with the library.
//!
//! Plain operators use the two-triangle mesh. The constrained filter and the
//! time step need a 2x2 mesh: on two P2 triangles only one velocity node is
//! interior, fewer than the four P1 divergence constraints.

#![allow(dead_code)]

use std::sync::Arc;

use leray_fem::fem::{
    assemble_div, assemble_load, assemble_mass, assemble_skew_convection_scalar, assemble_skew_convection_vector,
    assemble_stiffness, FeSpace, Field, QuadSamples,
};
use leray_fem::filtering::{
    adaptive_filter, helmholtz_filter, FilterBoundary, FilterContext, FilterOptions, IndicatorSamples,
};
use leray_fem::linsolve::{SolverOptions, SparseMat};
use leray_fem::mesh::TriMesh;
use leray_fem::stepper::{FlowParams, InitStrategy, Model, Scenario, Simulation, StepperOptions};

/// Agreement required of every comparison.
pub const TOL: f64 = 1e-10;

/// `(label, relative difference)`
pub type Check = (String, f64);

// ---------- reference building blocks ----------

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    // Newton on P_n, mapped to [0, 1]
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (x + 1.0), 0.5 * w)
        })
        .collect()
}

/// Points and weights on a physical triangle, exact to degree `2n - 2`.
fn triangle_rule(c: [[f64; 2]; 3], n: usize) -> Vec<([f64; 2], f64)> {
    let g = gauss_legendre(n);
    let det = ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1])).abs();
    let mut out = Vec::new();
    for &(xi, wx) in &g {
        for &(eta, wy) in &g {
            let (s, t) = (xi, eta * (1.0 - xi));
            let p = [
                c[0][0] + (c[1][0] - c[0][0]) * s + (c[2][0] - c[0][0]) * t,
                c[0][1] + (c[1][1] - c[0][1]) * s + (c[2][1] - c[0][1]) * t,
            ];
            out.push((p, wx * wy * (1.0 - xi) * det));
        }
    }
    out
}

fn exponents(k: usize) -> Vec<(i32, i32)> {
    (0..=k as i32).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect()
}

/// Dense solve with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        assert!(a[col][col].abs() > 1e-300, "singular reference system");
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Local Lagrange basis of one triangle in physical monomials.
struct LocalBasis {
    exps: Vec<(i32, i32)>,
    /// `coef[i][m]`: coefficient of monomial `m` in basis function `i`.
    coef: Vec<Vec<f64>>,
}

impl LocalBasis {
    fn new(nodes: &[[f64; 2]], k: usize) -> LocalBasis {
        let exps = exponents(k);
        let n = exps.len();
        assert_eq!(n, nodes.len());
        let v: Vec<Vec<f64>> =
            nodes.iter().map(|p| exps.iter().map(|&(a, b)| p[0].powi(a) * p[1].powi(b)).collect()).collect();
        // columns of V^{-1} are the basis coefficients
        let mut coef = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let c = dense_solve(v.clone(), e);
            coef[i] = c;
        }
        LocalBasis { exps, coef }
    }

    fn value(&self, i: usize, p: [f64; 2]) -> f64 {
        self.exps.iter().zip(&self.coef[i]).map(|(&(a, b), c)| c * p[0].powi(a) * p[1].powi(b)).sum()
    }

    fn grad(&self, i: usize, p: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&(a, b), c) in self.exps.iter().zip(&self.coef[i]) {
            if a > 0 {
                g[0] += c * a as f64 * p[0].powi(a - 1) * p[1].powi(b);
            }
            if b > 0 {
                g[1] += c * b as f64 * p[0].powi(a) * p[1].powi(b - 1);
            }
        }
        g
    }
}

struct Element {
    dofs: Vec<usize>,
    basis: LocalBasis,
    quad: Vec<([f64; 2], f64)>,
}

fn elements(space: &FeSpace) -> Vec<Element> {
    let mesh = space.mesh();
    (0..mesh.num_triangles())
        .map(|t| {
            let dofs = space.element_dofs(t).to_vec();
            let nodes: Vec<[f64; 2]> = dofs.iter().map(|&d| space.dof_coords()[d]).collect();
            Element { basis: LocalBasis::new(&nodes, space.degree()), dofs, quad: triangle_rule(mesh.corners(t), 8) }
        })
        .collect()
}

fn dense(n: usize, m: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; m]; n]
}

fn eval(el: &Element, coeffs: &[f64], p: [f64; 2]) -> f64 {
    el.dofs.iter().enumerate().map(|(i, &d)| coeffs[d] * el.basis.value(i, p)).sum()
}

fn ref_mass(space: &FeSpace) -> Vec<Vec<f64>> {
    let mut m = dense(space.num_dofs(), space.num_dofs());
    for el in elements(space) {
        for &(p, w) in &el.quad {
            for (i, &di) in el.dofs.iter().enumerate() {
                for (j, &dj) in el.dofs.iter().enumerate() {
                    m[di][dj] += w * el.basis.value(i, p) * el.basis.value(j, p);
                }
            }
        }
    }
    m
}

fn ref_stiffness(space: &FeSpace, c: impl Fn([f64; 2]) -> f64) -> Vec<Vec<f64>> {
    let mut k = dense(space.num_dofs(), space.num_dofs());
    for el in elements(space) {
        for &(p, w) in &el.quad {
            for (i, &di) in el.dofs.iter().enumerate() {
                let gi = el.basis.grad(i, p);
                for (j, &dj) in el.dofs.iter().enumerate() {
                    let gj = el.basis.grad(j, p);
                    k[di][dj] += w * c(p) * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
    }
    k
}

/// `1/2 [(w . grad phi_j, phi_i) - (w . grad phi_i, phi_j)]`
fn ref_convection(space: &FeSpace, wind: &Field) -> Vec<Vec<f64>> {
    let mut c = dense(space.num_dofs(), space.num_dofs());
    for el in elements(space) {
        for &(p, w) in &el.quad {
            let (wx, wy) = (eval(&el, wind.component(0), p), eval(&el, wind.component(1), p));
            for (i, &di) in el.dofs.iter().enumerate() {
                let (pi, gi) = (el.basis.value(i, p), el.basis.grad(i, p));
                for (j, &dj) in el.dofs.iter().enumerate() {
                    let (pj, gj) = (el.basis.value(j, p), el.basis.grad(j, p));
                    c[di][dj] += 0.5 * w * ((wx * gj[0] + wy * gj[1]) * pi - (wx * gi[0] + wy * gi[1]) * pj);
                }
            }
        }
    }
    c
}

/// `D[q][c * n + j] = (d_c phi_j, psi_q)`
fn ref_div(vel: &FeSpace, pres: &FeSpace) -> Vec<Vec<f64>> {
    let n = vel.num_dofs();
    let mut d = dense(pres.num_dofs(), 2 * n);
    for (ev, ep) in elements(vel).iter().zip(elements(pres)) {
        for &(p, w) in &ev.quad {
            for (q, &dq) in ep.dofs.iter().enumerate() {
                let psi = ep.basis.value(q, p);
                for (j, &dj) in ev.dofs.iter().enumerate() {
                    let g = ev.basis.grad(j, p);
                    d[dq][dj] += w * psi * g[0];
                    d[dq][n + dj] += w * psi * g[1];
                }
            }
        }
    }
    d
}

fn ref_load(space: &FeSpace, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut l = vec![0.0; space.num_dofs()];
    for el in elements(space) {
        for &(p, w) in &el.quad {
            for (i, &di) in el.dofs.iter().enumerate() {
                l[di] += w * f(p) * el.basis.value(i, p);
            }
        }
    }
    l
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

fn block_diag(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = dense(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j];
            out[n + i][n + j] = a[i][j];
        }
    }
    out
}

fn lin(terms: &[(f64, &Vec<Vec<f64>>)]) -> Vec<Vec<f64>> {
    let (n, m) = (terms[0].1.len(), terms[0].1[0].len());
    let mut out = dense(n, m);
    for (s, a) in terms {
        for i in 0..n {
            for j in 0..m {
                out[i][j] += s * a[i][j];
            }
        }
    }
    out
}

/// `[[A, D^T, 0], [D, 0, w], [0, w^T, 0]]` with rows in `fixed` replaced by
/// identity rows; returns primal and multiplier parts.
fn saddle_solve(
    a: &[Vec<f64>],
    d: &[Vec<f64>],
    weights: &[f64],
    rhs: &[f64],
    fixed: &[(usize, f64)],
) -> (Vec<f64>, Vec<f64>) {
    let (nv, np) = (a.len(), d.len());
    let n = nv + np + 1;
    let mut m = dense(n, n);
    let mut b = vec![0.0; n];
    for i in 0..nv {
        m[i][..nv].copy_from_slice(&a[i]);
        for q in 0..np {
            m[i][nv + q] = d[q][i];
        }
        b[i] = rhs[i];
    }
    for q in 0..np {
        m[nv + q][..nv].copy_from_slice(&d[q]);
        m[nv + q][n - 1] = weights[q];
        m[n - 1][nv + q] = weights[q];
    }
    for &(i, v) in fixed {
        m[i].iter_mut().for_each(|x| *x = 0.0);
        m[i][i] = 1.0;
        b[i] = v;
    }
    let x = dense_solve(m, b);
    (x[..nv].to_vec(), x[nv..nv + np].to_vec())
}

fn rel_err_mat(lib: &SparseMat, oracle: &[Vec<f64>]) -> f64 {
    let l = lib.to_dense();
    assert_eq!((l.len(), l[0].len()), (oracle.len(), oracle[0].len()));
    let scale = oracle.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = l.iter().flatten().zip(oracle.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

fn rel_err_vec(lib: &[f64], oracle: &[f64]) -> f64 {
    assert_eq!(lib.len(), oracle.len());
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    lib.iter().zip(oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

// ---------- fixtures ----------

fn two_triangles() -> Arc<TriMesh> {
    let mesh = TriMesh::rect((0.0, 1.5), (0.0, 1.0), 1, 1).unwrap();
    assert_eq!(mesh.num_triangles(), 2);
    Arc::new(mesh)
}

fn two_by_two() -> Arc<TriMesh> {
    Arc::new(TriMesh::rect((0.0, 1.5), (0.0, 1.0), 2, 2).unwrap())
}

fn smooth_vector(space: &Arc<FeSpace>) -> Field {
    Field::interpolate_vector(space, |x, y| [(1.3 * x + 0.4).sin() * y + 0.2, (x * y).cos() - 0.5 * x])
}

/// Divergence-free and quadratic, so its boundary flux vanishes exactly.
fn solenoidal(space: &Arc<FeSpace>) -> Field {
    Field::interpolate_vector(space, |x, y| [x * x + 0.3 * y, -2.0 * x * y + 0.1])
}

fn boundary_dofs(space: &FeSpace, comps: usize) -> Vec<usize> {
    let n = space.num_dofs();
    (0..comps).flat_map(|c| space.boundary_dofs().into_iter().map(move |d| c * n + d)).collect()
}

// ---------- operators ----------

pub fn mass_and_stiffness() -> Vec<Check> {
    let mut out = Vec::new();
    for k in [1, 2, 3] {
        let space = FeSpace::new(two_triangles(), k).unwrap();
        out.push((format!("mass P{k}"), rel_err_mat(&assemble_mass(&space), &ref_mass(&space))));
        out.push((
            format!("stiffness P{k}"),
            rel_err_mat(&assemble_stiffness(&space, None).unwrap(), &ref_stiffness(&space, |_| 1.0)),
        ));
    }
    out
}

pub fn weighted_stiffness() -> Vec<Check> {
    // the coefficient is sampled at the library's points; a quadratic keeps
    // both rules exact for P2
    let coef = |p: [f64; 2]| 0.5 + p[0] + 2.0 * p[1] * p[1];
    let space = FeSpace::new(two_triangles(), 2).unwrap();
    let mut values = Vec::new();
    for t in 0..space.mesh().num_triangles() {
        values.extend(space.quadrature_points(t).map(coef));
    }
    let samples = QuadSamples { values, points_per_triangle: space.rule().len() };
    let lib = assemble_stiffness(&space, Some(&samples)).unwrap();
    vec![("weighted stiffness P2".into(), rel_err_mat(&lib, &ref_stiffness(&space, coef)))]
}

pub fn convections() -> Vec<Check> {
    let mut out = Vec::new();
    for k in [2, 3] {
        let space = FeSpace::new(two_triangles(), k).unwrap();
        let wind = smooth_vector(&space);
        let c = ref_convection(&space, &wind);
        out.push((
            format!("scalar convection P{k}"),
            rel_err_mat(&assemble_skew_convection_scalar(&space, &wind).unwrap(), &c),
        ));
        out.push((
            format!("vector convection P{k}"),
            rel_err_mat(&assemble_skew_convection_vector(&space, &wind).unwrap(), &block_diag(&c)),
        ));
    }
    out
}

pub fn divergence() -> Vec<Check> {
    let mut out = Vec::new();
    for k in [2, 3] {
        let mesh = two_triangles();
        let (vel, pres) = (FeSpace::new(mesh.clone(), k).unwrap(), FeSpace::new(mesh, k - 1).unwrap());
        out.push((
            format!("divergence P{k}/P{}", k - 1),
            rel_err_mat(&assemble_div(&vel, &pres).unwrap(), &ref_div(&vel, &pres)),
        ));
    }
    out
}

pub fn loads() -> Vec<Check> {
    let space = FeSpace::new(two_triangles(), 2).unwrap();
    let f = |x: f64, y: f64| 1.0 + x * y - 0.5 * y * y;
    let lib = assemble_load(&space, |x, y, _| f(x, y), 0.0).unwrap();
    vec![("load P2".into(), rel_err_vec(&lib, &ref_load(&space, |p| f(p[0], p[1]))))]
}

// ---------- filters ----------

pub fn helmholtz_filter_solve() -> Vec<Check> {
    let mut out = Vec::new();
    let mesh = two_triangles();
    let (vel, pres) = (FeSpace::new(mesh.clone(), 2).unwrap(), FeSpace::new(mesh, 1).unwrap());
    let alpha = 0.3;
    let psi = Field::interpolate_scalar(&vel, |x, y| (2.0 * x).sin() + y * y);
    let a = lin(&[(alpha * alpha, &ref_stiffness(&vel, |_| 1.0)), (1.0, &ref_mass(&vel))]);
    let rhs = matvec(&ref_mass(&vel), psi.coeffs());
    for boundary in [FilterBoundary::Homogeneous, FilterBoundary::Trace] {
        let opts = FilterOptions { alpha, order: 0, normalize: false, boundary, constrained: true };
        let ctx = FilterContext::new(vel.clone(), pres.clone(), opts, SolverOptions::default()).unwrap();
        let lib = helmholtz_filter(&ctx, &psi).unwrap();
        let mut m = a.clone();
        let mut b = rhs.clone();
        for d in vel.boundary_dofs() {
            m[d].iter_mut().for_each(|x| *x = 0.0);
            m[d][d] = 1.0;
            b[d] = if boundary == FilterBoundary::Trace { psi.coeffs()[d] } else { 0.0 };
        }
        out.push((format!("Helmholtz filter {boundary:?}"), rel_err_vec(lib.coeffs(), &dense_solve(m, b))));
    }
    out
}

pub fn adaptive_filter_solve() -> Vec<Check> {
    let mut out = Vec::new();
    let mesh = two_by_two();
    let (vel, pres) = (FeSpace::new(mesh.clone(), 2).unwrap(), FeSpace::new(mesh, 1).unwrap());
    let alpha = 0.4;
    let ind = |p: [f64; 2]| 0.2 + 0.5 * p[0] * p[1];
    let mut values = Vec::new();
    for t in 0..vel.mesh().num_triangles() {
        values.extend(vel.quadrature_points(t).map(ind));
    }
    let a = IndicatorSamples {
        samples: QuadSamples { values, points_per_triangle: vel.rule().len() },
        max_raw: 1.0,
        normalized: true,
    };
    let weights = ref_load(&pres, |_| 1.0);
    let d = ref_div(&vel, &pres);
    let block = block_diag(&lin(&[(alpha * alpha, &ref_stiffness(&vel, ind)), (1.0, &ref_mass(&vel))]));
    let noise =
        Field::interpolate_vector(&vel, |x, y| [x * (1.5 - x) * y * (1.0 - y), (3.0 * x).sin() * y * (1.0 - y)]);
    for boundary in [FilterBoundary::Homogeneous, FilterBoundary::Trace] {
        let u = match boundary {
            FilterBoundary::Homogeneous => smooth_vector(&vel),
            FilterBoundary::Trace => solenoidal(&vel).combine(1.0, &noise, 1.0),
        };
        let opts = FilterOptions { alpha, order: 0, normalize: false, boundary, constrained: true };
        let ctx = FilterContext::new(vel.clone(), pres.clone(), opts, SolverOptions::default()).unwrap();
        let (ubar, lambda) = adaptive_filter(&ctx, &u, &a).unwrap();
        let rhs = matvec(&block_diag(&ref_mass(&vel)), u.coeffs());
        let fixed: Vec<(usize, f64)> = boundary_dofs(&vel, 2)
            .into_iter()
            .map(|i| (i, if boundary == FilterBoundary::Trace { u.coeffs()[i] } else { 0.0 }))
            .collect();
        let (x, l) = saddle_solve(&block, &d, &weights, &rhs, &fixed);
        out.push((format!("adaptive filter {boundary:?} velocity"), rel_err_vec(ubar.coeffs(), &x)));
        out.push((format!("adaptive filter {boundary:?} multiplier"), rel_err_vec(lambda.coeffs(), &l)));
    }
    out
}

// ---------- one time step ----------

/// Polynomial data: every load is integrated exactly by both rules.
struct Poly;

impl Scenario for Poly {
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [x * y + 0.5 * t, x - y * y * (1.0 + t)]
    }
    fn temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        1.0 + x * x * (1.0 + t) - y
    }
    fn has_exact_solution(&self) -> bool {
        true
    }
    fn temperature_dirichlet(&self) -> bool {
        true
    }
    fn forcing(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [x * y * (1.0 + t) + y, x * x - t]
    }
    fn heat_source(&self, x: f64, y: f64, t: f64) -> f64 {
        x - y * t + 0.5
    }
}

pub fn bdf2_step(model: Model) -> Vec<Check> {
    let (re, ri, pr, dt, alpha) = (20.0, 2.0, 0.7, 0.1, 0.4);
    let params = FlowParams { re, ri, pr, dt, t_end: 2.0 * dt, alpha, order: 0, model };
    let opts = StepperOptions { init: InitStrategy::InterpolateExact, ..Default::default() };
    let mut sim = Simulation::new(two_by_two(), 2, params, opts, Arc::new(Poly)).unwrap();
    let (vel, pres) = (sim.velocity_space().clone(), sim.pressure_space().clone());
    let s0 = sim.state().clone();
    sim.step().unwrap();
    let s = sim.state();

    let n = vel.num_dofs();
    let t_new = 2.0 * dt;
    let sc = Poly;
    let interp = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { vel.dof_coords().iter().map(|p| f(p[0], p[1])).collect() };
    let u0: Vec<f64> = [interp(&|x, y| sc.velocity(x, y, 0.0)[0]), interp(&|x, y| sc.velocity(x, y, 0.0)[1])].concat();
    let u1: Vec<f64> = [interp(&|x, y| sc.velocity(x, y, dt)[0]), interp(&|x, y| sc.velocity(x, y, dt)[1])].concat();
    let t0 = interp(&|x, y| sc.temperature(x, y, 0.0));
    let t1 = interp(&|x, y| sc.temperature(x, y, dt));
    let mut out = vec![(
        format!("{model:?} initial levels"),
        rel_err_vec(s0.u_prev.coeffs(), &u0).max(rel_err_vec(s0.u_curr.coeffs(), &u1)),
    )];

    let mass = ref_mass(&vel);
    let stiff = ref_stiffness(&vel, |_| 1.0);
    let d = ref_div(&vel, &pres);
    let weights = ref_load(&pres, |_| 1.0);
    let ext: Vec<f64> = u1.iter().zip(&u0).map(|(a, b)| 2.0 * a - b).collect();
    let ext_field = Field::from_coeffs(&vel, 2, ext.clone()).unwrap();
    let (c0, c1, c2) = (1.5 / dt, -2.0 / dt, 0.5 / dt);

    // convecting velocity of the momentum equation
    let wind = match model {
        Model::NoModel => ext_field.clone(),
        Model::LerayAlpha => {
            let block = block_diag(&lin(&[(alpha * alpha, &stiff), (1.0, &mass)]));
            let rhs = matvec(&block_diag(&mass), &ext);
            let fixed: Vec<(usize, f64)> = boundary_dofs(&vel, 2).into_iter().map(|i| (i, ext[i])).collect();
            Field::from_coeffs(&vel, 2, saddle_solve(&block, &d, &weights, &rhs, &fixed).0).unwrap()
        }
        Model::AdaptiveLeray => unreachable!(),
    };

    // temperature, convected by the extrapolated velocity
    let conv_t = ref_convection(&vel, &ext_field);
    let mut a = lin(&[(c0, &mass), (1.0, &conv_t), (1.0 / (re * pr), &stiff)]);
    let hist: Vec<f64> = t1.iter().zip(&t0).map(|(a, b)| -c1 * a - c2 * b).collect();
    let mut b: Vec<f64> = matvec(&mass, &hist)
        .iter()
        .zip(ref_load(&vel, |p| sc.heat_source(p[0], p[1], t_new)))
        .map(|(m, l)| m + l)
        .collect();
    for dof in vel.boundary_dofs() {
        a[dof].iter_mut().for_each(|x| *x = 0.0);
        a[dof][dof] = 1.0;
        let p = vel.dof_coords()[dof];
        b[dof] = sc.temperature(p[0], p[1], t_new);
    }
    let temp = dense_solve(a, b);
    out.push((format!("{model:?} step temperature"), rel_err_vec(s.temp_curr.coeffs(), &temp)));

    // momentum
    let conv_u = ref_convection(&vel, &wind);
    let f = block_diag(&lin(&[(c0, &mass), (1.0, &conv_u), (1.0 / re, &stiff)]));
    let uhist: Vec<f64> = u1.iter().zip(&u0).map(|(a, b)| -c1 * a - c2 * b).collect();
    let mut rhs = matvec(&block_diag(&mass), &uhist);
    for c in 0..2 {
        let load = ref_load(&vel, |p| sc.forcing(p[0], p[1], t_new)[c]);
        rhs[c * n..(c + 1) * n].iter_mut().zip(load).for_each(|(r, l)| *r += l);
    }
    let text: Vec<f64> = t1.iter().zip(&t0).map(|(a, b)| 2.0 * a - b).collect();
    rhs[n..].iter_mut().zip(matvec(&mass, &text)).for_each(|(r, m)| *r += ri * m);
    // boundary data with its discrete net flux removed along D^T 1
    let bd = boundary_dofs(&vel, 2);
    let flux_w: Vec<f64> = (0..2 * n).map(|j| d.iter().map(|row| row[j]).sum()).collect();
    let mut g: Vec<f64> = bd
        .iter()
        .map(|&i| {
            let p = vel.dof_coords()[i % n];
            sc.velocity(p[0], p[1], t_new)[i / n]
        })
        .collect();
    let w: Vec<f64> = bd.iter().map(|&i| flux_w[i]).collect();
    let s_corr = g.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().map(|v| v * v).sum::<f64>();
    g.iter_mut().zip(&w).for_each(|(gi, wi)| *gi -= s_corr * wi);
    let fixed: Vec<(usize, f64)> = bd.into_iter().zip(g).collect();
    // unknowns (u, -p)
    let (u, neg_p) = saddle_solve(&f, &d, &weights, &rhs, &fixed);
    let p: Vec<f64> = neg_p.iter().map(|v| -v).collect();
    out.push((format!("{model:?} step velocity"), rel_err_vec(s.u_curr.coeffs(), &u)));
    out.push((format!("{model:?} step pressure"), rel_err_vec(s.p_curr.coeffs(), &p)));
    out
}

/// Every comparison.
pub fn all() -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(mass_and_stiffness());
    out.extend(weighted_stiffness());
    out.extend(convections());
    out.extend(divergence());
    out.extend(loads());
    out.extend(helmholtz_filter_solve());
    out.extend(adaptive_filter_solve());
    out.extend(bdf2_step(Model::NoModel));
    out.extend(bdf2_step(Model::LerayAlpha));
    out
}

/// Mass error against a reference with one entry nudged, to show the
/// comparison can fail.
pub fn perturbed_mass_error() -> f64 {
    let space = FeSpace::new(two_triangles(), 2).unwrap();
    let mut r = ref_mass(&space);
    r[0][0] *= 1.01;
    rel_err_mat(&assemble_mass(&space), &r)
}
