//! Scattered-data RBF interpolation and kriging in three dimensions,
//! preconditioned through an adapted discrete hierarchical basis.
//!
//! The pipeline normalizes the nodes into the unit cube ([`geometry`]),
//! builds an octree and the orthonormal hierarchical basis ([`hbasis`]),
//! forms the decoupled operator on the polynomial-free part of that basis
//! ([`mrop`]) and solves it with restarted GMRES ([`solver`]). The
//! [`kriging`] module reuses the same solve as a best linear unbiased
//! estimator.

pub mod error;
pub mod geometry;
pub mod hbasis;
pub mod kernels;
pub mod kriging;
pub mod linalg;
pub mod mrop;
pub mod nodes;
pub mod polyspace;
pub mod solver;
pub mod sparse;
pub mod testcases;

pub use error::{Error, Result};

/// A point in three dimensions.
pub type Point3 = [f64; 3];
