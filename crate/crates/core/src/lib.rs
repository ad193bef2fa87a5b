//! Inverse Born series.
//!
//! Forward series of multilinear operators, the memoized inverse recursion
//! (with the classical recursion for cross-checks), convergence radii and
//! error bounds, and a discretized diffuse-wave model.

pub mod compositions;
pub mod convergence;
pub mod diffuse;
pub mod error;
pub mod inverse;
pub mod linearized;
pub mod series;

pub use compositions::{composition_count, compositions, Compositions};
pub use convergence::{
    bloch_radii, build_report, build_synthetic_report, linearization_residual, mcal_threshold,
    reconstruction_bound, tail_bound, theorem1_radius, ConvergenceReport, RadiusConstants,
    ReconstructionBound, Synthetic, Variant,
};
pub use error::{Error, Result};
pub use inverse::{
    classical_inverse_coefficients, classical_operator, divergence_monitor, inverse_coefficients,
    inverse_coefficients_with, monitor_norms, partial_sums, recompute_term, reconstruct,
    InverseCoefficients, MonitorVerdict, RecursionOptions, SeriesTrend,
};
pub use linearized::{LinearizedInverse, PseudoinverseConfig, PseudoinverseMethod, Regularization};
pub use series::{
    forward_series, forward_tail_bound, forward_terms, make_random_matrix_family,
    make_scalar_family, BoundConstants, CountingFamily, DataVector, FieldVector, OperatorFamily,
    RandomMatrixFamily, ScalarFamily,
};
