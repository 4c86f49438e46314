//! Numerical laboratory for cone multiplier operators on periodic
//! lattices: symbol evaluation, exact-transform application, square and
//! maximal functionals, weighted norms, and seeded verification campaigns.

pub mod bumps;
pub mod container;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod lattice;
pub mod quad;
pub mod scalar;
pub mod symbols;
pub mod transform;

pub use error::{CoreError, Result};
pub use scalar::{LatticeScalar, Scalar};
