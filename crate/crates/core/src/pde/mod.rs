//! Dirichlet and Neumann problems with oscillating boundary data.

pub mod bem;
pub mod disk;
pub mod gmres;
pub mod neumann;
pub mod slab;

use serde::{Deserialize, Serialize};

/// Limit values obtained with the lower, mean and upper homogenized data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitBounds {
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
}

pub use bem::{BoundaryMesh, DirichletBem, HarmonicMeasure, DEFAULT_PANELS};
pub use disk::{disk_limit_bounds, solve_disk, solve_disk_homogenized, Disk, DiskProblem, DiskValue, InteriorMeasure};
pub use neumann::NeumannBem;
pub use slab::{linear_profile, solve_slab, Slab, SlabFamily, SlabLimit, SlabValue};
