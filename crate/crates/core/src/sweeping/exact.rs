use crate::dense::{dense_guard, lu_inverse, matvec};
use crate::discretization::BlockTridiagonalOperator;
use crate::{CMat, C64};

use super::{sweep_solve, SweepError};

/// Sweeping factorization with every `T_m` stored densely.
#[derive(Debug, Clone)]
pub struct DenseSweepingFactorization {
    pub t: Vec<CMat>,
    pub couplings: Vec<Vec<C64>>,
}

/// Dense layer-by-layer elimination; refused when a layer exceeds the dense guard.
pub fn factor_exact(a: &BlockTridiagonalOperator) -> Result<DenseSweepingFactorization, SweepError> {
    factor_exact_upto(a, a.num_layers())
}

/// The first `upto` inverse Schur complements.
pub(crate) fn factor_exact_upto(
    a: &BlockTridiagonalOperator,
    upto: usize,
) -> Result<DenseSweepingFactorization, SweepError> {
    let fl = a.face_len();
    let guard = dense_guard();
    if fl > guard {
        return Err(SweepError::DenseGuard { size: fl, guard });
    }
    let upto = upto.min(a.num_layers());
    let mut t: Vec<CMat> = Vec::with_capacity(upto);
    for m in 0..upto {
        let mut s = a.layers[m].to_dense();
        if m > 0 {
            let d = &a.couplings[m - 1];
            let prev = &t[m - 1];
            for j in 0..fl {
                for i in 0..fl {
                    s[(i, j)] -= d[i] * prev[(i, j)] * d[j];
                }
            }
        }
        let inv = lu_inverse(&s).ok_or(SweepError::SingularLayer { layer: m + 1 })?;
        t.push(inv);
    }
    Ok(DenseSweepingFactorization { t, couplings: a.couplings[..upto.saturating_sub(1)].to_vec() })
}

impl DenseSweepingFactorization {
    pub fn num_layers(&self) -> usize {
        self.t.len()
    }

    pub fn face_len(&self) -> usize {
        self.t.first().map_or(0, |t| t.nrows())
    }

    /// `A^{-1} f` by forward substitution, layer solves and back substitution.
    pub fn solve(&self, f: &[C64]) -> Result<Vec<C64>, SweepError> {
        sweep_solve(&self.couplings, self.face_len(), f, true, &|m, x| matvec(&self.t[m], x))
    }

    /// Same as [`solve`](Self::solve) but recomputing `T_m u_m` in the diagonal pass.
    pub fn solve_uncached(&self, f: &[C64]) -> Result<Vec<C64>, SweepError> {
        sweep_solve(&self.couplings, self.face_len(), f, false, &|m, x| matvec(&self.t[m], x))
    }
}
