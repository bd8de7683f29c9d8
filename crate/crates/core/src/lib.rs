//! Sweeping preconditioner for the variable-coefficient Helmholtz equation.
//!
//! The discrete operator is eliminated layer by layer, starting from an
//! absorbing side, and every intermediate Schur complement inverse is kept
//! as a hierarchical matrix with rank-bounded off-diagonal blocks. The
//! resulting approximate block `LDL^t` factorization is applied as a left
//! preconditioner inside GMRES.
//!
//! Module map:
//!
//! * [`discretization`]: grid, PML stretching, velocity/forcing fields and
//!   the block-tridiagonal finite-difference operator (2D and 3D).
//! * [`hmatrix`]: partition trees, low-rank blocks and hierarchical matrix
//!   algebra (matvec, add, multiply, invert, diagonal scaling).
//! * [`sweeping`]: exact (dense) and approximate (hierarchical) sweeping
//!   factorizations and the preconditioner they define.
//! * [`krylov`]: left-preconditioned full GMRES.
//! * [`rank_probe`]: dense Schur complement sequences and off-diagonal
//!   numerical ranks.
//! * [`scenario`]: scenario files, end-to-end runs and output files.

pub mod dense;
pub mod discretization;
pub mod hmatrix;
pub mod krylov;
pub mod rank_probe;
pub mod scenario;
pub mod sweeping;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<C64>;
