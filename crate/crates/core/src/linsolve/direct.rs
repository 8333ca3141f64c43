//! Sparse direct factorizations backed by `faer`.
//!
//! Our matrices are row-compressed; faer works on column-compressed storage,
//! so the CSR arrays are handed over as the CSC representation of the
//! transpose and the transposed solve is used.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use super::sparse::{Pattern, SparseMat};
use super::SolveError;

fn transpose_view(a: &SparseMat) -> Result<SparseColMat<usize, f64>, SolveError> {
    let p = a.pattern();
    let symbolic =
        SymbolicSparseColMat::new_checked(a.ncols(), a.nrows(), p.row_ptr().to_vec(), None, p.col_idx().to_vec());
    Ok(SparseColMat::new(symbolic, a.values().to_vec()))
}

enum Kind {
    Lu(Lu<usize, f64>),
    Llt(Llt<usize, f64>),
}

/// A factorized matrix that can be reused for many right-hand sides.
pub struct Factorization {
    kind: Kind,
    n: usize,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            Kind::Lu(_) => "lu",
            Kind::Llt(_) => "llt",
        };
        f.debug_struct("Factorization").field("kind", &kind).field("n", &self.n).finish()
    }
}

impl Factorization {
    pub fn lu(a: &SparseMat) -> Result<Factorization, SolveError> {
        let t = transpose_view(a)?;
        let lu = t.sp_lu().map_err(|e| SolveError::Singular(format!("{e:?}")))?;
        Ok(Factorization { kind: Kind::Lu(lu), n: a.nrows() })
    }

    pub fn lu_with_symbolic(a: &SparseMat, symbolic: &SymbolicLu<usize>) -> Result<Factorization, SolveError> {
        let t = transpose_view(a)?;
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), t.as_ref())
            .map_err(|e| SolveError::Singular(format!("{e:?}")))?;
        Ok(Factorization { kind: Kind::Lu(lu), n: a.nrows() })
    }

    /// Cholesky factorization; fails if the matrix is not positive definite.
    pub fn cholesky(a: &SparseMat) -> Result<Factorization, SolveError> {
        let t = transpose_view(a)?;
        let llt = t
            .sp_cholesky(Side::Lower)
            .map_err(|e| SolveError::NotPositiveDefinite { detail: format!("{e:?}"), residual_history: Vec::new() })?;
        Ok(Factorization { kind: Kind::Llt(llt), n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Applies the inverse to `b` without refinement.
    pub fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        match &self.kind {
            Kind::Lu(lu) => lu.solve_transpose_in_place(rhs.as_mut()),
            Kind::Llt(llt) => llt.solve_in_place(rhs.as_mut()),
        }
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Keeps the symbolic LU analysis of the most recent sparsity pattern so that
/// repeated factorizations of matrices with a fixed structure skip it.
#[derive(Default)]
pub struct LuCache {
    symbolic: Option<(Arc<Pattern>, SymbolicLu<usize>)>,
}

impl std::fmt::Debug for LuCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuCache").field("cached", &self.symbolic.is_some()).finish()
    }
}

impl LuCache {
    pub fn factorize(&mut self, a: &SparseMat) -> Result<Factorization, SolveError> {
        let reuse = matches!(&self.symbolic, Some((p, _)) if Arc::ptr_eq(p, a.pattern()) || **p == **a.pattern());
        if !reuse {
            let t = transpose_view(a)?;
            let sym = SymbolicLu::try_new(t.symbolic()).map_err(|e| SolveError::Singular(format!("{e:?}")))?;
            self.symbolic = Some((a.pattern().clone(), sym));
        }
        let (_, sym) = self.symbolic.as_ref().expect("symbolic analysis present");
        Factorization::lu_with_symbolic(a, sym)
    }
}
