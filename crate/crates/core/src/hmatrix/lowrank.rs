use nalgebra::DMatrixView;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense::{orthonormal_columns, svd};
use crate::{CMat, C64};

use super::policy::CompressionPolicy;

/// Factorized block `U V^t` (plain transpose).
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankBlock {
    pub u: CMat,
    pub v: CMat,
}

impl LowRankBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { u: CMat::zeros(rows, 0), v: CMat::zeros(cols, 0) }
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> CMat {
        &self.u * self.v.transpose()
    }
}

fn take_rank(u: &CMat, s: &[f64], vh: &CMat, r: usize) -> LowRankBlock {
    let mut left = u.columns(0, r).into_owned();
    for (k, mut col) in left.column_iter_mut().enumerate() {
        col *= C64::new(s[k], 0.0);
    }
    LowRankBlock { u: left, v: vh.rows(0, r).transpose() }
}

/// Truncated SVD of a dense block under `policy`.
pub fn truncate_dense(m: &CMat, policy: &CompressionPolicy) -> LowRankBlock {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return LowRankBlock::zeros(rows, cols);
    }
    let (u, s, vh) = svd(m);
    let r = policy.retained_rank(&s);
    take_rank(&u, &s, &vh, r)
}

/// Truncate a factorized product `U V^t` (any number of columns) under `policy`
/// via QR of both factors and an SVD of the small core.
pub fn compress_factors(u: &CMat, v: &CMat, policy: &CompressionPolicy) -> LowRankBlock {
    let (rows, cols, k) = (u.nrows(), v.nrows(), u.ncols());
    debug_assert_eq!(k, v.ncols());
    if k == 0 || rows == 0 || cols == 0 {
        return LowRankBlock::zeros(rows, cols);
    }
    if k >= rows.min(cols) {
        return truncate_dense(&(u * v.transpose()), policy);
    }
    let (qu, ru) = u.clone().qr().unpack();
    let (qv, rv) = v.clone().qr().unpack();
    let core = ru * rv.transpose();
    let (x, s, yh) = svd(&core);
    let r = policy.retained_rank(&s);
    let small = take_rank(&x, &s, &yh, r);
    LowRankBlock { u: qu * small.u, v: qv * small.v }
}

/// Recompress the sum `U1 V1^t + U2 V2^t`.
pub fn recompress(u1: &CMat, v1: &CMat, u2: &CMat, v2: &CMat, policy: &CompressionPolicy) -> LowRankBlock {
    let u = hcat(u1, u2);
    let v = hcat(v1, v2);
    compress_factors(&u, &v, policy)
}

pub(crate) fn hcat(a: &CMat, b: &CMat) -> CMat {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub(crate) fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Randomized range finder plus small SVD for a linear map given only by its
/// action `apply(X) = A X` and transposed action `apply_transpose(X) = A^t X`.
///
/// Uses `max_rank + oversampling` complex Gaussian test vectors and
/// `power_iters` rounds of power iteration; the generator is seeded from
/// `policy.seed`.
pub fn randomized_lowrank(
    apply: impl Fn(DMatrixView<C64>) -> CMat,
    apply_transpose: impl Fn(DMatrixView<C64>) -> CMat,
    rows: usize,
    cols: usize,
    policy: &CompressionPolicy,
) -> LowRankBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    randomized_lowrank_with(apply, apply_transpose, rows, cols, policy, &mut rng)
}

pub(crate) fn randomized_lowrank_with(
    apply: impl Fn(DMatrixView<C64>) -> CMat,
    apply_transpose: impl Fn(DMatrixView<C64>) -> CMat,
    rows: usize,
    cols: usize,
    policy: &CompressionPolicy,
    rng: &mut ChaCha8Rng,
) -> LowRankBlock {
    let k = policy.max_rank.saturating_add(policy.oversampling).min(rows).min(cols);
    if k == 0 {
        return LowRankBlock::zeros(rows, cols);
    }
    let omega = gaussian(cols, k, rng);
    let mut q = orthonormal_columns(&apply(omega.as_view()));
    for _ in 0..policy.power_iters {
        // A^H Q = conj(A^t conj(Q)).
        let z = apply_transpose(q.map(|x| x.conj()).as_view()).map(|x| x.conj());
        let qz = orthonormal_columns(&z);
        q = orthonormal_columns(&apply(qz.as_view()));
    }
    // A ~ Q Q^H A = Q (A^t conj(Q))^t.
    let b = apply_transpose(q.map(|x| x.conj()).as_view());
    compress_factors(&q, &b, policy)
}
