//! Sweeping factorizations of the block-tridiagonal Helmholtz operator.
//!
//! Eliminating layers in order gives `A = L D L^t` with
//! `S_1 = A_{1,1}`, `S_m = A_{m,m} - A_{m,m-1} T_{m-1} A_{m-1,m}` and
//! `T_m = S_m^{-1}`. [`DenseSweepingFactorization`] keeps every `T_m` dense
//! (reference path); [`SweepingFactorization`] keeps them as H-matrices and
//! applies the result as a preconditioner.

mod approx;
mod cache;
mod exact;

use thiserror::Error;

use crate::discretization::DiscretizationError;
use crate::hmatrix::HMatrixError;
use crate::C64;

pub use approx::{default_face_tree, factor_hmatrix, SweepingFactorization};
pub use cache::{read_factorization, write_factorization};
pub(crate) use exact::factor_exact_upto;
pub use exact::{factor_exact, DenseSweepingFactorization};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("Schur complement of layer {layer} is singular")]
    SingularLayer { layer: usize },
    #[error("inverting the Schur complement of layer {layer} failed: {source}")]
    LayerInverse { layer: usize, source: HMatrixError },
    #[error("layer of size {size} exceeds the dense guard {guard}")]
    DenseGuard { size: usize, guard: usize },
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("bad factorization cache: {0}")]
    Format(String),
    #[error(transparent)]
    HMatrix(#[from] HMatrixError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Forward substitution, layer solves and backward substitution with
/// diagonal couplings, given the action of every `T_m`.
///
/// With `cached`, `T_m u_m` from the forward pass is reused in the diagonal
/// pass instead of being recomputed.
pub(crate) fn sweep_solve(
    couplings: &[Vec<C64>],
    face_len: usize,
    f: &[C64],
    cached: bool,
    apply_t: &dyn Fn(usize, &[C64]) -> Vec<C64>,
) -> Result<Vec<C64>, SweepError> {
    let layers = couplings.len() + 1;
    if f.len() != layers * face_len {
        return Err(SweepError::SizeMismatch { expected: layers * face_len, got: f.len() });
    }
    let mut u = f.to_vec();
    let mut tu: Vec<Option<Vec<C64>>> = vec![None; layers];
    for m in 0..layers - 1 {
        let w = apply_t(m, &u[m * face_len..(m + 1) * face_len]);
        let next_layer = &mut u[(m + 1) * face_len..(m + 2) * face_len];
        for ((next, d), wi) in next_layer.iter_mut().zip(&couplings[m]).zip(&w) {
            *next -= d * wi;
        }
        if cached {
            tu[m] = Some(w);
        }
    }
    for m in 0..layers {
        let w = match tu[m].take() {
            Some(w) => w,
            None => apply_t(m, &u[m * face_len..(m + 1) * face_len]),
        };
        u[m * face_len..(m + 1) * face_len].copy_from_slice(&w);
    }
    for m in (0..layers - 1).rev() {
        let rhs: Vec<C64> =
            couplings[m].iter().zip(&u[(m + 1) * face_len..(m + 2) * face_len]).map(|(d, x)| d * x).collect();
        let w = apply_t(m, &rhs);
        for (um, wi) in u[m * face_len..(m + 1) * face_len].iter_mut().zip(&w) {
            *um -= wi;
        }
    }
    Ok(u)
}
