//! Best simultaneous Diophantine approximation lab.
//!
//! Exact best-approximation sequences, minimal-vector chains of lattices,
//! the diagonal flow and its first-return map, Lévy-constant and
//! limit-distribution estimators, and a certified construction of a point
//! that is badly approximable at lag one but not at lag zero.

pub mod badk;
pub mod bestapprox;
pub mod dynamics;
pub mod enumerate;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod lattice;
pub mod lll;
pub mod par;
pub mod scalar;

pub use error::{Error, Result};
pub use geometry::{minkowski_bound, mixed_norm, Cylinder, MinkowskiBound, Split};
pub use lattice::{LatticeBasis, LatticeVector};
pub use par::Execution;
