//! Finite-difference discretization of the PML-stretched Helmholtz equation.
//!
//! The unit box `(0,1)^d` is sampled at the interior points `p = (i h, j h[, k h])`
//! with `h = 1/(n+1)`. The stretched equation is divided by the product of the
//! stretch factors so that the 5-point (2D) or 7-point (3D) stencil yields a
//! complex-symmetric matrix. Unknowns are grouped into layers orthogonal to the
//! sweep axis, which makes the matrix block tridiagonal with diagonal
//! inter-layer couplings.

mod config;
mod fields;
mod io;
mod operator;
mod ordering;
mod pml;

pub use config::{
    BoundaryKind, BoundarySpec, DirichletTrace, NRounding, Side, SimulationConfig, SweepDirection, DEFAULT_PML_STRENGTH,
};
pub use fields::{build_forcing, build_velocity, ForcingField, ForcingModel, VelocityField, VelocityModel};
pub use io::{read_field, write_complex_field, write_real_field, FieldData, FieldHeader};
pub use operator::{assemble, dirichlet_data_to_forcing, BlockTridiagonalOperator, LayerBlock};
pub use ordering::SweepOrdering;
pub use pml::{pml_stretch, sigma_profile, AxisStretch};

use thiserror::Error;

/// Errors raised while configuring or assembling a discretization.
#[derive(Debug, Error)]
pub enum DiscretizationError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("sparsity pattern violation: {0}")]
    Pattern(String),
    #[error("field format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Physical coordinate of the 0-based grid index `i`.
#[inline]
pub fn grid_coordinate(i: usize, h: f64) -> f64 {
    (i as f64 + 1.0) * h
}
