//! Left-preconditioned full GMRES.
//!
//! Solves `M A u = M f` from a zero initial guess, stopping on the
//! preconditioned relative residual `|M(f - A u_k)| / |M f|`. The true
//! residual `|f - A u| / |f|` is reported alongside. The iteration count is
//! the number of Arnoldi steps, each costing one `A` and one `M` application.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::dense::vec_norm;
use crate::discretization::{BlockTridiagonalOperator, DiscretizationError};
use crate::sweeping::{DenseSweepingFactorization, SweepError, SweepingFactorization};
use crate::C64;

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("invalid GMRES configuration: {0}")]
    Config(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("the preconditioner maps a nonzero right-hand side to zero")]
    DegeneratePreconditioner,
    #[error("non-finite value produced at iteration {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

/// A fixed linear map on `C^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError>;
}

impl LinearOperator for BlockTridiagonalOperator {
    fn dim(&self) -> usize {
        BlockTridiagonalOperator::dim(self)
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        Ok(BlockTridiagonalOperator::apply(self, x)?)
    }
}

impl LinearOperator for SweepingFactorization {
    fn dim(&self) -> usize {
        SweepingFactorization::dim(self)
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        Ok(self.apply_preconditioner(x)?)
    }
}

impl LinearOperator for DenseSweepingFactorization {
    fn dim(&self) -> usize {
        self.num_layers() * self.face_len()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        Ok(self.solve(x)?)
    }
}

/// Identity map, i.e. unpreconditioned GMRES.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        Ok(x.to_vec())
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[C64]) -> Vec<C64>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, KrylovError> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-3, max_iters: 100 }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<(), KrylovError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(KrylovError::Config(format!("rel_tol = {} must lie in (0, 1)", self.rel_tol)));
        }
        if self.max_iters < 1 {
            return Err(KrylovError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one GMRES solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// Arnoldi steps taken.
    pub iterations: usize,
    /// Preconditioned relative residual after each step, starting at 1.
    pub resid_history: Vec<f64>,
    /// `|f - A u| / |f|` for the returned iterate.
    pub true_resid: f64,
    /// Filled in by the caller; GMRES itself does no setup.
    pub t_setup_s: f64,
    pub t_solve_s: f64,
    pub converged: bool,
    /// The Krylov space became invariant before the tolerance was met.
    pub breakdown: bool,
}

/// Complex Givens rotation zeroing `b` in `(a, b)`; returns `(c, s, r)`.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    if b.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0), a);
    }
    if a.norm() == 0.0 {
        return (0.0, C64::new(1.0, 0.0), b);
    }
    let t = a.norm().hypot(b.norm());
    let phase = a / a.norm();
    (a.norm() / t, phase * b.conj() / t, phase * t)
}

fn check_len(expected: usize, got: usize) -> Result<(), KrylovError> {
    if expected != got {
        return Err(KrylovError::SizeMismatch { expected, got });
    }
    Ok(())
}

/// Full GMRES on `M A u = M f` from `u_0 = 0`.
///
/// Non-convergence within `max_iters` is not an error: the best iterate is
/// returned with `converged = false`.
pub fn gmres(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    f: &[C64],
    config: &GmresConfig,
) -> Result<(Vec<C64>, SolveReport), KrylovError> {
    config.validate()?;
    let n = a.dim();
    check_len(n, m.dim())?;
    check_len(n, f.len())?;
    let start = Instant::now();
    let zero = C64::new(0.0, 0.0);
    let f_norm = vec_norm(f);
    if f_norm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            resid_history: vec![0.0],
            true_resid: 0.0,
            t_setup_s: 0.0,
            t_solve_s: start.elapsed().as_secs_f64(),
            converged: true,
            breakdown: false,
        };
        return Ok((vec![zero; n], report));
    }
    let r0 = m.apply(f)?;
    let beta = vec_norm(&r0);
    if beta == 0.0 {
        return Err(KrylovError::DegeneratePreconditioner);
    }
    if !beta.is_finite() {
        return Err(KrylovError::NonFinite(0));
    }

    let mut basis: Vec<Vec<C64>> = vec![r0.iter().map(|z| z / beta).collect()];
    // Columns of the rotated Hessenberg matrix (upper triangular part).
    let mut hcols: Vec<Vec<C64>> = Vec::new();
    let mut rotations: Vec<(f64, C64)> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut breakdown = false;

    for j in 0..config.max_iters {
        let mut w = m.apply(&a.apply(&basis[j])?)?;
        let w_norm0 = vec_norm(&w);
        let mut h = vec![zero; j + 2];
        // Modified Gram-Schmidt with one reorthogonalization pass.
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let dot: C64 = v.iter().zip(&w).map(|(vi, wi)| vi.conj() * wi).sum();
                h[i] += dot;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= dot * vi);
            }
        }
        let h_next = vec_norm(&w);
        if !h_next.is_finite() {
            return Err(KrylovError::NonFinite(j + 1));
        }
        h[j + 1] = C64::new(h_next, 0.0);
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (x, y) = (h[i], h[i + 1]);
            h[i] = c * x + s * y;
            h[i + 1] = -s.conj() * x + c * y;
        }
        let (c, s, r) = givens(h[j], h[j + 1]);
        h[j] = r;
        h.truncate(j + 1);
        rotations.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s.conj() * gj);
        hcols.push(h);

        let resid = g[j + 1].norm() / beta;
        history.push(resid);
        if resid <= config.rel_tol {
            converged = true;
            break;
        }
        if h_next <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE) {
            breakdown = true;
            break;
        }
        basis.push(w.iter().map(|z| z / h_next).collect());
    }

    let k = hcols.len();
    let mut y = vec![zero; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for (l, yl) in y.iter().enumerate().skip(i + 1) {
            acc -= hcols[l][i] * yl;
        }
        y[i] = acc / hcols[i][i];
    }
    let mut u = vec![zero; n];
    for (v, yi) in basis.iter().zip(&y) {
        u.iter_mut().zip(v).for_each(|(ui, vi)| *ui += yi * vi);
    }
    let au = a.apply(&u)?;
    let true_resid = vec_norm(&f.iter().zip(&au).map(|(x, y)| x - y).collect::<Vec<_>>()) / f_norm;
    if breakdown {
        // An invariant Krylov space holds the exact solution of the
        // preconditioned system up to round-off.
        converged = true;
    }
    let report = SolveReport {
        iterations: k,
        resid_history: history,
        true_resid,
        t_setup_s: 0.0,
        t_solve_s: start.elapsed().as_secs_f64(),
        converged,
        breakdown,
    };
    log::debug!("gmres: {} iterations, converged = {}, true residual {:.3e}", k, converged, true_resid);
    Ok((u, report))
}
