use std::sync::Arc;

use super::basis::Tabulation;
use super::quadrature::QuadratureRule;
use super::space::FeSpace;
use super::FemError;

/// Coefficient vector on a scalar space, or a stack of `components` such
/// vectors (component-major: all x-coefficients, then all y-coefficients).
#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<FeSpace>,
    components: usize,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: &Arc<FeSpace>, components: usize) -> Field {
        Field { space: space.clone(), components, coeffs: vec![0.0; components * space.num_dofs()] }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, components: usize, coeffs: Vec<f64>) -> Result<Field, FemError> {
        let expected = components * space.num_dofs();
        if coeffs.len() != expected {
            return Err(FemError::Length { expected, got: coeffs.len() });
        }
        Ok(Field { space: space.clone(), components, coeffs })
    }

    pub fn interpolate_scalar(space: &Arc<FeSpace>, f: impl Fn(f64, f64) -> f64) -> Field {
        let coeffs = space.dof_coords().iter().map(|p| f(p[0], p[1])).collect();
        Field { space: space.clone(), components: 1, coeffs }
    }

    pub fn interpolate_vector(space: &Arc<FeSpace>, f: impl Fn(f64, f64) -> [f64; 2]) -> Field {
        let n = space.num_dofs();
        let mut coeffs = vec![0.0; 2 * n];
        for (i, p) in space.dof_coords().iter().enumerate() {
            let v = f(p[0], p[1]);
            coeffs[i] = v[0];
            coeffs[n + i] = v[1];
        }
        Field { space: space.clone(), components: 2, coeffs }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.space.num_dofs();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.space.num_dofs();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Field {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        Field { space: self.space.clone(), components: self.components, coeffs }
    }

    /// Values at physical points, point-major (`components` values per point).
    pub fn evaluate(&self, points: &[[f64; 2]]) -> Result<Vec<f64>, FemError> {
        let el = self.space.element();
        let mut phi = vec![0.0; el.num_dofs()];
        let mut out = Vec::with_capacity(points.len() * self.components);
        for &p in points {
            let (t, lam) = self.space.mesh().locate(p)?;
            el.values(lam, &mut phi);
            let dofs = self.space.element_dofs(t);
            for c in 0..self.components {
                let comp = self.component(c);
                out.push(dofs.iter().zip(&phi).map(|(&d, v)| comp[d] * v).sum());
            }
        }
        Ok(out)
    }

    /// Component `c` at the default quadrature points, triangle-major.
    pub fn quad_values(&self, c: usize) -> Vec<f64> {
        let tab = self.space.tabulation();
        self.sample(c, tab, self.space.rule().len())
    }

    fn sample(&self, c: usize, tab: &Tabulation, nq: usize) -> Vec<f64> {
        let comp = self.component(c);
        let ntri = self.space.mesh().num_triangles();
        let mut out = Vec::with_capacity(ntri * nq);
        for t in 0..ntri {
            let dofs = self.space.element_dofs(t);
            for q in 0..nq {
                out.push(dofs.iter().zip(tab.values_at(q)).map(|(&d, v)| comp[d] * v).sum());
            }
        }
        out
    }

    /// Squared L2 norm summed over components.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_distance_sq(|_, _, _| 0.0, self.space.rule())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Squared L2 norm of the gradient summed over components.
    pub fn grad_norm_sq(&self) -> f64 {
        self.grad_distance_sq(|_, _, _| [0.0, 0.0], self.space.rule())
    }

    /// `sum_c || self_c - exact(., c) ||^2` under the given rule.
    pub fn l2_distance_sq(&self, exact: impl Fn(f64, f64, usize) -> f64, rule: &QuadratureRule) -> f64 {
        let tab = Tabulation::new(self.space.element(), &rule.points);
        let mut total = 0.0;
        for t in 0..self.space.mesh().num_triangles() {
            let geo = self.space.geometry(t);
            let dofs = self.space.element_dofs(t);
            for (q, (&lam, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = geo.map(lam);
                for c in 0..self.components {
                    let comp = self.component(c);
                    let uh: f64 = dofs.iter().zip(tab.values_at(q)).map(|(&d, v)| comp[d] * v).sum();
                    let e = uh - exact(x[0], x[1], c);
                    total += geo.area * w * e * e;
                }
            }
        }
        total
    }

    /// `sum_c || grad(self_c) - exact_grad(., c) ||^2` under the given rule.
    pub fn grad_distance_sq(&self, exact_grad: impl Fn(f64, f64, usize) -> [f64; 2], rule: &QuadratureRule) -> f64 {
        let tab = Tabulation::new(self.space.element(), &rule.points);
        let mut total = 0.0;
        for t in 0..self.space.mesh().num_triangles() {
            let geo = self.space.geometry(t);
            let dofs = self.space.element_dofs(t);
            for (q, (&lam, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = geo.map(lam);
                for c in 0..self.components {
                    let comp = self.component(c);
                    let mut g = [0.0; 2];
                    for (&d, rg) in dofs.iter().zip(tab.grads_at(q)) {
                        let pg = geo.physical_gradient(*rg);
                        g[0] += comp[d] * pg[0];
                        g[1] += comp[d] * pg[1];
                    }
                    let e = exact_grad(x[0], x[1], c);
                    total += geo.area * w * ((g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2));
                }
            }
        }
        total
    }

    /// Integral of each component.
    pub fn integral(&self) -> Vec<f64> {
        let rule = self.space.rule();
        let tab = self.space.tabulation();
        let mut out = vec![0.0; self.components];
        for t in 0..self.space.mesh().num_triangles() {
            let geo = self.space.geometry(t);
            let dofs = self.space.element_dofs(t);
            for (q, &w) in rule.weights.iter().enumerate() {
                for (c, o) in out.iter_mut().enumerate() {
                    let comp = self.component(c);
                    *o += geo.area * w * dofs.iter().zip(tab.values_at(q)).map(|(&d, v)| comp[d] * v).sum::<f64>();
                }
            }
        }
        out
    }
}
