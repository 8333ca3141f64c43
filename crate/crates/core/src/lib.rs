//! Finite-element solver for the incompressible Boussinesq system with a
//! linearly extrapolated BDF2 time stepper and deconvolution-based adaptive
//! Leray filtering.
//!
//! The crate is organized bottom-up: [`mesh`] builds structured triangle
//! meshes, [`fem`] provides Lagrange spaces and operator assembly,
//! [`linsolve`] the sparse solves, [`filtering`] the Helmholtz filter,
//! van Cittert deconvolution and adaptive filter, [`stepper`] the time
//! integrator, [`verification`] the manufactured-solution and lock-exchange
//! studies, and [`io`] configuration and output.

pub mod fem;
pub mod filtering;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod stepper;
pub mod verification;
