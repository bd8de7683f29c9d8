//! Small dense linear-algebra helpers shared by the hierarchical and exact paths.

use faer::Mat;

use crate::{CMat, C64};

/// Default cap on the dimension of any matrix we are willing to materialize densely.
pub const DEFAULT_DENSE_GUARD: usize = 4096;

/// Environment variable overriding [`DEFAULT_DENSE_GUARD`].
pub const DENSE_GUARD_ENV: &str = "HELMSWEEP_DENSE_GUARD";

/// Current dense-materialization guard.
pub fn dense_guard() -> usize {
    std::env::var(DENSE_GUARD_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_DENSE_GUARD)
}

/// Thin SVD `m = U diag(s) V^H`, singular values in descending order.
///
/// Returns `(U, s, V^H)` with `min(rows, cols)` singular triplets; empty
/// matrices give empty factors.
pub fn svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (CMat::zeros(rows, 0), Vec::new(), CMat::zeros(0, cols));
    }
    let f = Mat::<C64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = f.thin_svd().expect("SVD iteration did not converge");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let s = s.column_vector();
    (
        CMat::from_fn(rows, k, |i, j| u[(i, j)]),
        (0..k).map(|j| s[j].re).collect(),
        CMat::from_fn(k, cols, |i, j| v[(j, i)].conj()),
    )
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let f = Mat::<C64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let mut s: Vec<f64> = f.singular_values().expect("SVD iteration did not converge");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis (thin Householder Q) for the column space of `y`.
pub fn orthonormal_columns(y: &CMat) -> CMat {
    let (rows, cols) = y.shape();
    if rows == 0 || cols == 0 {
        return CMat::zeros(rows, 0);
    }
    y.clone().qr().q()
}

/// Maximum absolute column sum.
pub fn norm_1(m: &CMat) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse by partial-pivoted LU; `None` when a pivot vanishes or the result is not finite.
pub fn lu_inverse(m: &CMat) -> Option<CMat> {
    debug_assert!(m.is_square());
    if m.nrows() == 0 {
        return Some(CMat::zeros(0, 0));
    }
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// `U V^t` (plain transpose, not the adjoint).
pub fn outer(u: &CMat, v: &CMat) -> CMat {
    u * v.transpose()
}

/// Entrywise complex conjugate.
pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Euclidean distance `|a - b| / |b|` (absolute when `b = 0`).
pub fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den = vec_norm(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Dense identity of size `n`.
pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Multiply a dense matrix with a vector.
pub fn matvec(m: &CMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), x.len());
    let mut y = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        for (yi, &mij) in y.iter_mut().zip(m.column(j).iter()) {
            *yi += mij * xj;
        }
    }
    y
}
