//! Interior-penalty discontinuous Galerkin solver for the two-dimensional
//! complex Ginzburg-Landau equation
//!
//! ```text
//! du/dt = u + (1 + i a) laplace(u) - (1 + i b) |u|^2 u
//! ```
//!
//! on the unit square with homogeneous Dirichlet data, split into real and
//! imaginary parts and advanced with backward Euler plus a Picard iteration
//! on the frozen modulus. The crate provides the mesh, broken polynomial
//! spaces, SIPG/NIPG/IIPG operator assembly, the coupled linear solves, a
//! manufactured solution with closed-form forcing, and the norm and
//! stability diagnostics used to study the three penalty variants.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod evolve;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod plot;
pub mod quadrature;
pub mod space;
pub mod sparse;
