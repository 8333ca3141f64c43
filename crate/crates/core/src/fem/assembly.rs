//! Global operator assembly. Every matrix on a single space shares that
//! space's cached sparsity pattern, so linear combinations stay cheap and
//! the symbolic factorization can be reused across time steps.

use crate::linsolve::SparseMat;

use super::basis::Tabulation;
use super::field::Field;
use super::space::{ElementPattern, FeSpace};
use super::{FemError, QuadSamples};

/// Loops over triangles with physical gradients at the default quadrature
/// points and scatters the local matrix produced by `local`.
fn assemble_on_space(space: &FeSpace, mut local: impl FnMut(usize, &[[f64; 2]], &mut [f64])) -> SparseMat {
    let ep = space.element_pattern();
    let n = space.dofs_per_element();
    let nq = space.rule().len();
    let tab = space.tabulation();
    let mut values = vec![0.0; ep.pattern.nnz()];
    let mut grads = vec![[0.0; 2]; n * nq];
    let mut loc = vec![0.0; n * n];
    for t in 0..space.mesh().num_triangles() {
        let geo = space.geometry(t);
        for q in 0..nq {
            for (i, g) in tab.grads_at(q).iter().enumerate() {
                grads[q * n + i] = geo.physical_gradient(*g);
            }
        }
        loc.iter_mut().for_each(|v| *v = 0.0);
        local(t, &grads, &mut loc);
        for (slot, v) in ep.element_slots(t).iter().zip(&loc) {
            values[*slot as usize] += v;
        }
    }
    SparseMat::from_parts(ep.pattern.clone(), values)
}

/// `M_ij = (phi_j, phi_i)`
pub fn assemble_mass(space: &FeSpace) -> SparseMat {
    let n = space.dofs_per_element();
    let rule = space.rule();
    let tab = space.tabulation();
    assemble_on_space(space, |t, _, loc| {
        let area = space.geometry(t).area;
        for (q, &w) in rule.weights.iter().enumerate() {
            let phi = tab.values_at(q);
            let aw = area * w;
            for i in 0..n {
                let s = aw * phi[i];
                for j in 0..n {
                    loc[i * n + j] += s * phi[j];
                }
            }
        }
    })
}

/// `K_ij = (c grad phi_j, grad phi_i)` with `c` sampled at the default
/// quadrature points, or `c = 1` when absent.
pub fn assemble_stiffness(space: &FeSpace, coefficient: Option<&QuadSamples>) -> Result<SparseMat, FemError> {
    let nq = space.rule().len();
    if let Some(c) = coefficient {
        let expected = nq * space.mesh().num_triangles();
        if c.values.len() != expected || c.points_per_triangle != nq {
            return Err(FemError::CoefficientLayout { expected, got: c.values.len() });
        }
        if let Some((index, &value)) = c.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(FemError::NegativeCoefficient { index, value });
        }
    }
    let n = space.dofs_per_element();
    let rule = space.rule();
    Ok(assemble_on_space(space, |t, grads, loc| {
        let area = space.geometry(t).area;
        for (q, &w) in rule.weights.iter().enumerate() {
            let c = coefficient.map_or(1.0, |c| c.values[t * nq + q]);
            let aw = area * w * c;
            if aw == 0.0 {
                continue;
            }
            let g = &grads[q * n..(q + 1) * n];
            for i in 0..n {
                for j in 0..n {
                    loc[i * n + j] += aw * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
    }))
}

/// Scalar skew form: `(C theta)_i = 1/2 [(w . grad theta, phi_i) - (w . grad phi_i, theta)]`.
pub fn assemble_skew_convection_scalar(space: &FeSpace, wind: &Field) -> Result<SparseMat, FemError> {
    if wind.components() != 2 {
        return Err(FemError::Components { expected: 2, got: wind.components() });
    }
    if !space.same_mesh(wind.space()) {
        return Err(FemError::MeshMismatch);
    }
    let wspace = wind.space();
    let rule = space.rule();
    let wtab = Tabulation::new(wspace.element(), &rule.points);
    let tab = space.tabulation();
    let n = space.dofs_per_element();
    let (wx, wy) = (wind.component(0), wind.component(1));
    Ok(assemble_on_space(space, |t, grads, loc| {
        let area = space.geometry(t).area;
        let wd = wspace.element_dofs(t);
        for (q, &w) in rule.weights.iter().enumerate() {
            let wv = wtab.values_at(q);
            let (mut a, mut b) = (0.0, 0.0);
            for (&d, v) in wd.iter().zip(wv) {
                a += wx[d] * v;
                b += wy[d] * v;
            }
            let phi = tab.values_at(q);
            let g = &grads[q * n..(q + 1) * n];
            let half = 0.5 * area * w;
            // advective derivative of each basis function
            let adv: Vec<f64> = g.iter().map(|gi| a * gi[0] + b * gi[1]).collect();
            for i in 0..n {
                for j in 0..n {
                    loc[i * n + j] += half * (adv[j] * phi[i] - adv[i] * phi[j]);
                }
            }
        }
    }))
}

/// Block diagonal `[[A, 0], [0, A]]`.
pub fn block_diag2(a: &SparseMat) -> SparseMat {
    SparseMat::from_blocks(&[vec![Some(a), None], vec![None, Some(a)]])
}

/// Vector skew form acting componentwise on a velocity space.
pub fn assemble_skew_convection_vector(space: &FeSpace, wind: &Field) -> Result<SparseMat, FemError> {
    Ok(block_diag2(&assemble_skew_convection_scalar(space, wind)?))
}

/// `(D u)_q = (div u, psi_q)` for velocity `u` stacked component-major.
pub fn assemble_div(vel: &FeSpace, pres: &FeSpace) -> Result<SparseMat, FemError> {
    if vel.degree() < pres.degree() + 1 {
        return Err(FemError::UnstablePairing { velocity: vel.degree(), pressure: pres.degree() });
    }
    if !vel.same_mesh(pres) {
        return Err(FemError::MeshMismatch);
    }
    let ep = ElementPattern::new(pres, vel);
    let rule = vel.rule();
    let vtab = vel.tabulation();
    let ptab = Tabulation::new(pres.element(), &rule.points);
    let (nv, np) = (vel.dofs_per_element(), pres.dofs_per_element());
    let mut dx = vec![0.0; ep.pattern.nnz()];
    let mut dy = vec![0.0; ep.pattern.nnz()];
    for t in 0..vel.mesh().num_triangles() {
        let geo = vel.geometry(t);
        let slots = ep.element_slots(t);
        for (q, &w) in rule.weights.iter().enumerate() {
            let aw = geo.area * w;
            let psi = ptab.values_at(q);
            for (j, rg) in vtab.grads_at(q).iter().enumerate() {
                let g = geo.physical_gradient(*rg);
                for i in 0..np {
                    let s = slots[i * nv + j] as usize;
                    dx[s] += aw * psi[i] * g[0];
                    dy[s] += aw * psi[i] * g[1];
                }
            }
        }
    }
    let dx = SparseMat::from_parts(ep.pattern.clone(), dx);
    let dy = SparseMat::from_parts(ep.pattern, dy);
    Ok(SparseMat::from_blocks(&[vec![Some(&dx), Some(&dy)]]))
}

/// `L_i = (f(., t), phi_i)`.
pub fn assemble_load(space: &FeSpace, f: impl Fn(f64, f64, f64) -> f64, t: f64) -> Result<Vec<f64>, FemError> {
    let out = assemble_load_components(space, 1, |x, y, tt, o| o[0] = f(x, y, tt), t)?;
    Ok(out)
}

/// Vector load, component-major.
pub fn assemble_load_vector(
    space: &FeSpace,
    f: impl Fn(f64, f64, f64) -> [f64; 2],
    t: f64,
) -> Result<Vec<f64>, FemError> {
    assemble_load_components(space, 2, |x, y, tt, o| o.copy_from_slice(&f(x, y, tt)), t)
}

fn assemble_load_components(
    space: &FeSpace,
    comps: usize,
    f: impl Fn(f64, f64, f64, &mut [f64]),
    t: f64,
) -> Result<Vec<f64>, FemError> {
    let ndof = space.num_dofs();
    let rule = space.rule();
    let tab = space.tabulation();
    let mut out = vec![0.0; comps * ndof];
    let mut val = vec![0.0; comps];
    for tri in 0..space.mesh().num_triangles() {
        let geo = space.geometry(tri);
        let dofs = space.element_dofs(tri);
        for (q, (&lam, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = geo.map(lam);
            f(x[0], x[1], t, &mut val);
            if val.iter().any(|v| !v.is_finite()) {
                return Err(FemError::NonFinite { x: x[0], y: x[1], t });
            }
            let aw = geo.area * w;
            for (&d, phi) in dofs.iter().zip(tab.values_at(q)) {
                for c in 0..comps {
                    out[c * ndof + d] += aw * val[c] * phi;
                }
            }
        }
    }
    Ok(out)
}
