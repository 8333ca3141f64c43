//! Essential boundary conditions by row and column elimination. Eliminated
//! entries are kept as explicit zeros so the sparsity pattern is unchanged.

use crate::linsolve::{
    iterative, relative_residual, solve_factored, Backend, Factorization, SolveError, SolveMethod, SolveReport,
    SolverOptions, SparseMat,
};

use super::field::Field;
use super::space::FeSpace;

/// Prescribed values on a sorted set of global unknowns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletBc {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl DirichletBc {
    pub fn none() -> DirichletBc {
        DirichletBc::default()
    }

    pub fn scalar(space: &FeSpace, g: impl Fn(f64, f64) -> f64) -> DirichletBc {
        let dofs = space.boundary_dofs();
        let values = dofs
            .iter()
            .map(|&d| {
                let p = space.dof_coords()[d];
                g(p[0], p[1])
            })
            .collect();
        DirichletBc { dofs, values }
    }

    /// Both components of a velocity on every boundary dof.
    pub fn vector(space: &FeSpace, g: impl Fn(f64, f64) -> [f64; 2]) -> DirichletBc {
        let n = space.num_dofs();
        let bd = space.boundary_dofs();
        let vals: Vec<[f64; 2]> = bd
            .iter()
            .map(|&d| {
                let p = space.dof_coords()[d];
                g(p[0], p[1])
            })
            .collect();
        let mut dofs = bd.clone();
        dofs.extend(bd.iter().map(|d| n + d));
        let mut values: Vec<f64> = vals.iter().map(|v| v[0]).collect();
        values.extend(vals.iter().map(|v| v[1]));
        DirichletBc { dofs, values }
    }

    pub fn homogeneous(space: &FeSpace, components: usize) -> DirichletBc {
        let n = space.num_dofs();
        let bd = space.boundary_dofs();
        let dofs: Vec<usize> = (0..components).flat_map(|c| bd.iter().map(move |d| c * n + d)).collect();
        let values = vec![0.0; dofs.len()];
        DirichletBc { dofs, values }
    }

    /// Boundary values copied from a field's own coefficients.
    pub fn trace_of(field: &Field) -> DirichletBc {
        let bc = DirichletBc::homogeneous(field.space(), field.components());
        let values = bc.dofs.iter().map(|&d| field.coeffs()[d]).collect();
        DirichletBc { values, ..bc }
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &d in &self.dofs {
            m[d] = true;
        }
        m
    }

    /// Values scattered into a zero vector of length `n`.
    pub fn lift(&self, n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            g[d] = v;
        }
        g
    }

    pub fn scaled(&self, s: f64) -> DirichletBc {
        DirichletBc { dofs: self.dofs.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }
}

/// Replaces constrained rows by identity rows with the prescribed value and
/// moves constrained columns of the free rows to the right-hand side.
pub fn apply_dirichlet(mat: &SparseMat, rhs: &[f64], bc: &DirichletBc) -> (SparseMat, Vec<f64>) {
    let n = mat.nrows();
    let mask = bc.mask(n);
    let g = bc.lift(n);
    let mut out = mat.clone();
    let mut b = rhs.to_vec();
    let rp = mat.pattern().row_ptr().to_vec();
    let ci = mat.pattern().col_idx().to_vec();
    let vals = out.values_mut();
    for i in 0..n {
        if mask[i] {
            for k in rp[i]..rp[i + 1] {
                vals[k] = if ci[k] == i { 1.0 } else { 0.0 };
            }
            b[i] = g[i];
        } else {
            for k in rp[i]..rp[i + 1] {
                let j = ci[k];
                if j < n && mask[j] {
                    b[i] -= vals[k] * g[j];
                    vals[k] = 0.0;
                }
            }
        }
    }
    (out, b)
}

enum Engine {
    Factored(Factorization),
    Krylov { spd: bool, opts: SolverOptions },
}

/// A fixed operator with a fixed constrained set, prepared once and applied
/// to many right-hand sides and boundary data.
pub struct ConstrainedSolver {
    original: SparseMat,
    eliminated: SparseMat,
    constrained: Vec<usize>,
    engine: Engine,
    tol: f64,
}

impl std::fmt::Debug for ConstrainedSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedSolver")
            .field("n", &self.original.nrows())
            .field("constrained", &self.constrained.len())
            .finish()
    }
}

impl ConstrainedSolver {
    /// `spd` selects Cholesky/CG over LU/GMRES.
    pub fn new(
        a: SparseMat,
        constrained: Vec<usize>,
        spd: bool,
        opts: &SolverOptions,
    ) -> Result<ConstrainedSolver, SolveError> {
        let bc = DirichletBc { values: vec![0.0; constrained.len()], dofs: constrained.clone() };
        let (eliminated, _) = apply_dirichlet(&a, &vec![0.0; a.nrows()], &bc);
        let engine = match opts.backend {
            Backend::Direct if spd => Engine::Factored(Factorization::cholesky(&eliminated)?),
            Backend::Direct => Engine::Factored(Factorization::lu(&eliminated)?),
            Backend::Iterative => Engine::Krylov { spd, opts: *opts },
        };
        Ok(ConstrainedSolver { original: a, eliminated, constrained, engine, tol: opts.tol })
    }

    pub fn matrix(&self) -> &SparseMat {
        &self.original
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    /// Solves `A x = rhs` on free rows with `x = values` on the constrained set.
    pub fn solve(&self, rhs: &[f64], values: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport), SolveError> {
        let n = self.original.nrows();
        let mut b = rhs.to_vec();
        let mut g = vec![0.0; n];
        if let Some(v) = values {
            for (&d, &x) in self.constrained.iter().zip(v) {
                g[d] = x;
            }
            let ag = self.original.mul_vec(&g);
            b.iter_mut().zip(&ag).for_each(|(bi, a)| *bi -= a);
        }
        for &d in &self.constrained {
            b[d] = g[d];
        }
        match &self.engine {
            Engine::Factored(f) => solve_factored(&self.eliminated, f, &b, self.tol),
            Engine::Krylov { spd, opts } => {
                let start = std::time::Instant::now();
                let (x, it, _) = if *spd {
                    iterative::conjugate_gradient(&self.eliminated, &b, opts.tol, opts.max_iter)?
                } else {
                    iterative::gmres(&self.eliminated, &b, opts.tol, opts.restart, opts.max_iter)?
                };
                let residual_norm = relative_residual(&self.eliminated, &x, &b);
                if !(residual_norm <= opts.tol) {
                    return Err(SolveError::ToleranceNotMet { residual: residual_norm, tol: opts.tol });
                }
                Ok((
                    x,
                    SolveReport {
                        method: SolveMethod::Iterative { iterations: it },
                        residual_norm,
                        wall_time: start.elapsed(),
                    },
                ))
            }
        }
    }
}
