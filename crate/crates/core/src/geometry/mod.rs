//! Domains, node sets and point-set regularity measures.
//!
//! A [`PointSet`] is immutable once built; every query on it is read-only so
//! it can be shared freely between threads.

mod domain;
mod generate;
mod pointset;
mod regularity;

pub use domain::{Domain, HalfSpace};
pub use generate::{generate_grid_points, lattice_probes, lattice_spacing, random_interior_probes};
pub use pointset::{neighbors_within, PointSet};
pub use regularity::{
    affine_rank, default_covering_probes, eta_gap_holds, h_density_bound, ring_count, ring_count_bound,
    smallest_enclosing_ball_diameter, verify_h_covering, CoveringOptions, RegularityReport,
};

use thiserror::Error;

use crate::linalg::Vector;

/// A location in `R^d`.
pub type Point<T> = Vector<T>;

/// Absolute tolerance below which two nodes count as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Barycentric tolerance for simplex containment (points on faces count).
pub const BARYCENTRIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension {0} is unsupported (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
    #[error("points {first} and {second} coincide within 1e-12")]
    DuplicatePoint { first: usize, second: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
