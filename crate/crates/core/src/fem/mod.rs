//! Lagrange spaces, quadrature, fields and operator assembly.

pub mod assembly;
pub mod basis;
pub mod dirichlet;
pub mod field;
pub mod quadrature;
pub mod space;

use thiserror::Error;

use crate::linsolve::SolveError;
use crate::mesh::MeshError;

pub use assembly::{
    assemble_div, assemble_load, assemble_load_vector, assemble_mass, assemble_skew_convection_scalar,
    assemble_skew_convection_vector, assemble_stiffness, block_diag2,
};
pub use basis::LagrangeElement;
pub use dirichlet::{apply_dirichlet, ConstrainedSolver, DirichletBc};
pub use field::Field;
pub use quadrature::QuadratureRule;
pub use space::FeSpace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("unsupported polynomial degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(usize),
    #[error("operands live on different meshes")]
    MeshMismatch,
    #[error("unstable velocity/pressure pairing P{velocity}/P{pressure}")]
    UnstablePairing { velocity: usize, pressure: usize },
    #[error("negative coefficient sample {value} at index {index}")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("coefficient has {got} samples, quadrature layout needs {expected}")]
    CoefficientLayout { expected: usize, got: usize },
    #[error("non-finite value at ({x}, {y}), t = {t}")]
    NonFinite { x: f64, y: f64, t: f64 },
    #[error("expected a field with {expected} components, got {got}")]
    Components { expected: usize, got: usize },
    #[error("coefficient vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Scalar samples at the default quadrature points of a space, stored
/// triangle-major: `values[t * points_per_triangle + q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadSamples {
    pub values: Vec<f64>,
    pub points_per_triangle: usize,
}

impl QuadSamples {
    pub fn constant(space: &FeSpace, c: f64) -> QuadSamples {
        let nq = space.rule().len();
        QuadSamples { values: vec![c; nq * space.mesh().num_triangles()], points_per_triangle: nq }
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> &[f64] {
        let n = self.points_per_triangle;
        &self.values[t * n..(t + 1) * n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// Per-triangle average, for cell-data output.
    pub fn cell_means(&self) -> Vec<f64> {
        self.values.chunks(self.points_per_triangle.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }
}
