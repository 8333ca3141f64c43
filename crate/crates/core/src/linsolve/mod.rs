//! Sparse storage and the three solve shapes used per time step: SPD
//! (filters), general (temperature transport) and saddle point
//! (momentum-pressure and the constrained adaptive filter).

pub mod direct;
pub mod iterative;
pub mod sparse;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use direct::{Factorization, LuCache};
pub use sparse::{dot, norm2, Pattern, SparseMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is not symmetric positive definite: {detail}")]
    NotPositiveDefinite { detail: String, residual_history: Vec<f64> },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("iteration stagnated after {iterations} iterations")]
    Stagnation { iterations: usize, residual_history: Vec<f64> },
    #[error("relative residual {residual:e} above tolerance {tol:e}")]
    ToleranceNotMet { residual: f64, tol: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, right-hand side has {rhs} entries")]
    Dimension { rows: usize, cols: usize, rhs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Relative residual target `|Ax - b| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { backend: Backend::Direct, tol: 1e-10, max_iter: 20_000, restart: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveMethod {
    Direct { refinements: usize },
    Iterative { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub residual_norm: f64,
    pub wall_time: Duration,
}

pub fn relative_residual(a: &SparseMat, x: &[f64], b: &[f64]) -> f64 {
    let bn = norm2(b);
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}

fn check_dims(a: &SparseMat, b: &[f64]) -> Result<(), SolveError> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(SolveError::Dimension { rows: a.nrows(), cols: a.ncols(), rhs: b.len() });
    }
    Ok(())
}

/// Solves with an existing factorization of `a`, refining iteratively until
/// the relative residual reaches `tol`.
pub fn solve_factored(
    a: &SparseMat,
    factor: &Factorization,
    b: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let start = Instant::now();
    check_dims(a, b)?;
    let bn = norm2(b);
    if bn == 0.0 {
        let report = SolveReport {
            method: SolveMethod::Direct { refinements: 0 },
            residual_norm: 0.0,
            wall_time: start.elapsed(),
        };
        return Ok((vec![0.0; b.len()], report));
    }
    let mut x = factor.apply_inverse(b);
    let mut refinements = 0;
    let mut res = f64::INFINITY;
    for _ in 0..4 {
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        res = norm2(&r) / bn;
        if !res.is_finite() {
            return Err(SolveError::Singular("non-finite solution from factorization".into()));
        }
        if res <= tol {
            break;
        }
        let dx = factor.apply_inverse(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        refinements += 1;
    }
    if !(res <= tol) {
        res = relative_residual(a, &x, b);
    }
    if !res.is_finite() {
        return Err(SolveError::Singular("non-finite solution from factorization".into()));
    }
    if res > tol {
        return Err(SolveError::ToleranceNotMet { residual: res, tol });
    }
    Ok((x, SolveReport { method: SolveMethod::Direct { refinements }, residual_norm: res, wall_time: start.elapsed() }))
}

fn iterative_report(
    x: Vec<f64>,
    iterations: usize,
    a: &SparseMat,
    b: &[f64],
    tol: f64,
    start: Instant,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let residual_norm = relative_residual(a, &x, b);
    if !(residual_norm <= tol) {
        return Err(SolveError::ToleranceNotMet { residual: residual_norm, tol });
    }
    Ok((x, SolveReport { method: SolveMethod::Iterative { iterations }, residual_norm, wall_time: start.elapsed() }))
}

/// Symmetric positive definite systems.
pub fn solve_spd(a: &SparseMat, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport), SolveError> {
    check_dims(a, b)?;
    let start = Instant::now();
    match opts.backend {
        Backend::Direct => {
            let asym = a.asymmetry();
            if asym > 1e-12 {
                return Err(SolveError::NotPositiveDefinite {
                    detail: format!("relative asymmetry {asym:e}"),
                    residual_history: Vec::new(),
                });
            }
            let f = Factorization::cholesky(a)?;
            solve_factored(a, &f, b, opts.tol)
        }
        Backend::Iterative => {
            let (x, it, _) = iterative::conjugate_gradient(a, b, opts.tol, opts.max_iter)?;
            iterative_report(x, it, a, b, opts.tol, start)
        }
    }
}

/// Nonsingular general systems.
pub fn solve_general(a: &SparseMat, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport), SolveError> {
    check_dims(a, b)?;
    let start = Instant::now();
    match opts.backend {
        Backend::Direct => {
            let f = Factorization::lu(a)?;
            solve_factored(a, &f, b, opts.tol)
        }
        Backend::Iterative => {
            let (x, it, _) = iterative::gmres(a, b, opts.tol, opts.restart, opts.max_iter)?;
            iterative_report(x, it, a, b, opts.tol, start)
        }
    }
}

/// Block system `[[F, B^T], [B, 0]]` whose first `n_primal` unknowns are the
/// primal variables and the rest are multipliers (pressure).
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: SparseMat,
    pub n_primal: usize,
    /// Integrals of the multiplier basis functions. When present the
    /// constant multiplier mode is removed by a mean-zero side condition.
    pub mean_weights: Option<Arc<Vec<f64>>>,
}

impl SaddleSystem {
    pub fn n_multiplier(&self) -> usize {
        self.matrix.nrows() - self.n_primal
    }

    /// The system bordered with the mean-zero condition `w^T p = 0` and its
    /// Lagrange multiplier. Returns the matrix unchanged without weights.
    pub fn bordered(&self) -> SparseMat {
        let Some(w) = &self.mean_weights else {
            return self.matrix.clone();
        };
        let n = self.matrix.nrows();
        let col = SparseMat::from_triplets(
            n,
            1,
            &w.iter().enumerate().map(|(i, &wi)| (self.n_primal + i, 0, wi)).collect::<Vec<_>>(),
        );
        let row = col.transpose();
        // 1x1 structural zero so the pattern carries the corner.
        let corner = SparseMat::from_triplets(1, 1, &[(0, 0, 0.0)]);
        SparseMat::from_blocks(&[vec![Some(&self.matrix), Some(&col)], vec![Some(&row), Some(&corner)]])
    }

    /// The system with the last multiplier fixed to zero: its row and column
    /// become those of the identity. Nonsingular when the constant
    /// multiplier is the only null mode, and much sparser to factor than
    /// [`SaddleSystem::bordered`].
    pub fn pinned(&self) -> SparseMat {
        let n = self.matrix.nrows();
        let k = n - 1;
        let mut trip = Vec::with_capacity(self.matrix.pattern().nnz() + 1);
        for i in 0..k {
            trip.extend(self.matrix.row(i).filter(|&(j, _)| j != k).map(|(j, v)| (i, j, v)));
        }
        trip.push((k, k, 1.0));
        SparseMat::from_triplets(n, n, &trip)
    }

    /// Shifts the multiplier block to zero weighted mean.
    pub fn project_mean_zero(&self, x: &mut [f64]) {
        if let Some(w) = &self.mean_weights {
            let p = &mut x[self.n_primal..self.n_primal + w.len()];
            let total: f64 = w.iter().sum();
            let mean = dot(w, p) / total;
            p.iter_mut().for_each(|v| *v -= mean);
        }
    }
}

/// Solves a saddle-point system. The returned vector has the size of the
/// unbordered system and a mean-zero multiplier block.
pub fn solve_saddle(
    sys: &SaddleSystem,
    rhs: &[f64],
    opts: &SolverOptions,
    mut cache: Option<&mut LuCache>,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    check_dims(&sys.matrix, rhs)?;
    let start = Instant::now();
    if opts.backend == Backend::Direct && sys.mean_weights.is_some() && sys.n_multiplier() > 0 {
        if let Some(done) = solve_pinned(sys, rhs, opts, cache.as_deref_mut())? {
            let (x, mut report) = done;
            report.wall_time = start.elapsed();
            return Ok((x, report));
        }
    }
    let a = sys.bordered();
    let mut b = rhs.to_vec();
    b.resize(a.nrows(), 0.0);
    let (mut x, mut report) = match opts.backend {
        Backend::Direct => {
            // without weights the cache may hold this pattern; with them this
            // is the fallback after pinning, which keeps the cache
            let f = match (cache, &sys.mean_weights) {
                (Some(c), None) => c.factorize(&a)?,
                _ => Factorization::lu(&a)?,
            };
            solve_factored(&a, &f, &b, opts.tol)?
        }
        Backend::Iterative => {
            let (x, it, _) = iterative::gmres(&a, &b, opts.tol, opts.restart, opts.max_iter)?;
            iterative_report(x, it, &a, &b, opts.tol, start)?
        }
    };
    x.truncate(sys.matrix.nrows());
    sys.project_mean_zero(&mut x);
    report.wall_time = start.elapsed();
    Ok((x, report))
}

/// Direct solve with a pinned multiplier. `None` when the result does not
/// satisfy the original system, which happens for incompatible data.
fn solve_pinned(
    sys: &SaddleSystem,
    rhs: &[f64],
    opts: &SolverOptions,
    cache: Option<&mut LuCache>,
) -> Result<Option<(Vec<f64>, SolveReport)>, SolveError> {
    let a = sys.pinned();
    let f = match cache {
        Some(c) => c.factorize(&a)?,
        None => Factorization::lu(&a)?,
    };
    let mut b = rhs.to_vec();
    *b.last_mut().expect("non-empty system") = 0.0;
    let Ok((mut x, mut report)) = solve_factored(&a, &f, &b, opts.tol) else {
        return Ok(None);
    };
    sys.project_mean_zero(&mut x);
    let res = relative_residual(&sys.matrix, &x, rhs);
    if !(res <= opts.tol) {
        return Ok(None);
    }
    report.residual_norm = res;
    Ok(Some((x, report)))
}

/// A saddle system whose matrix is fixed, factored once for many
/// right-hand sides.
pub struct FactoredSaddle {
    sys: SaddleSystem,
    pinned: SparseMat,
    factor: Factorization,
}

impl std::fmt::Debug for FactoredSaddle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactoredSaddle").field("n", &self.pinned.nrows()).finish()
    }
}

impl FactoredSaddle {
    /// Requires mean weights; the multiplier is pinned as in [`solve_saddle`].
    pub fn new(sys: SaddleSystem) -> Result<FactoredSaddle, SolveError> {
        if sys.mean_weights.is_none() || sys.n_multiplier() == 0 {
            return Err(SolveError::Singular("a factored saddle system needs mean weights".into()));
        }
        let pinned = sys.pinned();
        let factor = Factorization::lu(&pinned)?;
        Ok(FactoredSaddle { sys, pinned, factor })
    }

    pub fn system(&self) -> &SaddleSystem {
        &self.sys
    }

    pub fn solve(&self, rhs: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport), SolveError> {
        check_dims(&self.sys.matrix, rhs)?;
        let start = Instant::now();
        let mut b = rhs.to_vec();
        *b.last_mut().expect("non-empty system") = 0.0;
        if let Ok((mut x, mut report)) = solve_factored(&self.pinned, &self.factor, &b, opts.tol) {
            self.sys.project_mean_zero(&mut x);
            let res = relative_residual(&self.sys.matrix, &x, rhs);
            if res <= opts.tol {
                report.residual_norm = res;
                report.wall_time = start.elapsed();
                return Ok((x, report));
            }
        }
        solve_saddle(&self.sys, rhs, &SolverOptions { backend: Backend::Direct, ..*opts }, None)
    }
}
