//! Wired uniform spanning trees, loop-erased walks, loop soups and
//! Temperleyan dimers on weighted oriented planar graphs.

pub mod coupling;
pub mod dimer;
pub mod domain;
pub mod erasure;
pub mod error;
pub mod geom;
pub mod lattice;
pub mod linalg;
pub mod loopsoup;
pub mod rng;
pub mod walk;
pub mod scalar;
pub mod stats;
pub mod ust;

pub use domain::{DomainSpec, MarkedPoint, Shape};
pub use error::{Error, Result};
pub use geom::Point;
pub use lattice::{build_square_lattice, discretize, matrix_tree_weight, EmbeddedGraph, WiredGraph};
pub use scalar::Scalar;

/// Floating-point scalar used by the samplers.
pub type Real = f64;
/// Exact rational scalar used by the oracles.
pub type Exact = num_rational::BigRational;
