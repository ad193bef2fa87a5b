//! Diffuse-wave instantiation of the operator family.
//!
//! The contrast lives on a voxelization of the ball `B_a`; sources and
//! detectors are quadrature points on the sphere `|x| = R`. With
//! `G(x, y) = exp(-k|x-y|) / (4 pi |x-y|)` the forward operators are
//!
//! ```text
//! K_m(e_1..e_m)(x, y) = -(-k^2)^m  int G(x,z_1) G(z_1,z_2) .. G(z_m,y) e_1(z_1) .. e_m(z_m)
//! ```
//!
//! discretized with the midpoint rule on the voxel grid.

mod bounds;
mod cache;
mod family;
mod geometry;
mod green;

pub use bounds::{kernel_bound_check, KernelBoundReport, OrderRatio, DEFAULT_QUADRATURE_SLACK};
pub use cache::{cache_key, read_matrix, write_matrix, MatrixCache};
pub use family::{
    assemble_family, k1_pseudoinverse, nu_mu_constants, self_term, DiffuseFamily,
    DEFAULT_DIFFUSE_MAX_ORDER,
};
pub use geometry::{build_geometry, fibonacci_sphere, Geometry, GeometryParams, Point};
pub use green::{green, green_unchecked};
