use helmsweep::dense::{rel_diff, vec_norm};
use helmsweep::discretization::{assemble, build_velocity, BlockTridiagonalOperator, SimulationConfig, VelocityModel};
use helmsweep::hmatrix::CompressionPolicy;
use helmsweep::krylov::{gmres, FnOperator, GmresConfig, Identity, KrylovError};
use helmsweep::sweeping::{default_face_tree, factor_exact, factor_hmatrix};
use helmsweep::{CMat, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn operator(n: usize) -> BlockTridiagonalOperator {
    let c = SimulationConfig::from_grid(2, n, 2.0 * std::f64::consts::PI * 3.0, 0.2).unwrap();
    let v = build_velocity(&VelocityModel::lens(), &c).unwrap();
    assemble(&c, &v).unwrap()
}

fn random_vec(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn random_matrix(n: usize, shift: f64, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(n, n, |i, j| {
        let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) / (n as f64).sqrt();
        if i == j {
            z + shift
        } else {
            z
        }
    })
}

fn is_non_increasing(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

#[test]
fn exact_preconditioner_converges_in_one_step() {
    let a = operator(16);
    let m = factor_exact(&a).unwrap();
    let f = random_vec(a.dim(), 1);
    let (u, report) = gmres(&a, &m, &f, &GmresConfig::default()).unwrap();
    assert_eq!(report.iterations, 1);
    assert!(report.converged);
    assert_eq!(report.resid_history.len(), 2);
    assert!(report.true_resid < 1e-9);
    assert!(rel_diff(&u, &m.solve(&f).unwrap()) < 1e-9);
}

#[test]
fn zero_rhs_short_circuits() {
    let a = operator(8);
    let (u, report) =
        gmres(&a, &Identity(a.dim()), &vec![C64::new(0.0, 0.0); a.dim()], &GmresConfig::default()).unwrap();
    assert!(u.iter().all(|z| z.norm() == 0.0));
    assert_eq!(report.iterations, 0);
    assert_eq!(report.resid_history.len(), 1);
}

#[test]
fn unpreconditioned_solve_matches_dense_oracle() {
    let n = 40;
    let mat = random_matrix(n, 3.0, 4);
    let apply_mat = mat.clone();
    let a = FnOperator { dim: n, f: move |x: &[C64]| helmsweep::dense::matvec(&apply_mat, x) };
    let f = random_vec(n, 8);
    let cfg = GmresConfig { rel_tol: 1e-12, max_iters: n };
    let (u, report) = gmres(&a, &Identity(n), &f, &cfg).unwrap();
    let oracle = mat.lu().solve(&nalgebra::DVector::from_column_slice(&f)).unwrap();
    assert!(report.converged);
    assert!(rel_diff(&u, oracle.as_slice()) < 1e-10);
    assert_eq!(report.resid_history.len(), report.iterations + 1);
    assert!(is_non_increasing(&report.resid_history));
}

#[test]
fn preconditioned_helmholtz_solve_and_scale_invariance() {
    let a = operator(32);
    let m = factor_hmatrix(&a, default_face_tree(2, 32).unwrap(), &CompressionPolicy::default()).unwrap();
    let f = random_vec(a.dim(), 6);
    let cfg = GmresConfig::default();
    let (u, report) = gmres(&a, &m, &f, &cfg).unwrap();
    assert!(report.converged);
    assert!(*report.resid_history.last().unwrap() <= cfg.rel_tol);
    assert!(is_non_increasing(&report.resid_history));
    let alpha = C64::new(-2.5, 7.0);
    let scaled: Vec<C64> = f.iter().map(|z| alpha * z).collect();
    let (v, scaled_report) = gmres(&a, &m, &scaled, &cfg).unwrap();
    assert_eq!(scaled_report.iterations, report.iterations);
    let expected: Vec<C64> = u.iter().map(|z| alpha * z).collect();
    assert!(rel_diff(&v, &expected) < 1e-10);
}

#[test]
fn nonconvergence_returns_the_best_iterate() {
    let a = operator(16);
    let f = random_vec(a.dim(), 2);
    let cfg = GmresConfig { rel_tol: 1e-6, max_iters: 3 };
    let (u, report) = gmres(&a, &Identity(a.dim()), &f, &cfg).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 3);
    assert_eq!(report.resid_history.len(), 4);
    let r: Vec<C64> = a.apply(&u).unwrap().iter().zip(&f).map(|(x, y)| y - x).collect();
    assert!((vec_norm(&r) / vec_norm(&f) - report.true_resid).abs() < 1e-12);
    assert!(report.true_resid < 1.0);
}

#[test]
fn invalid_inputs_are_rejected() {
    let a = operator(8);
    let f = random_vec(a.dim(), 2);
    assert!(matches!(
        gmres(&a, &Identity(a.dim()), &f, &GmresConfig { rel_tol: 0.0, max_iters: 5 }),
        Err(KrylovError::Config(_))
    ));
    assert!(matches!(
        gmres(&a, &Identity(a.dim()), &f[1..], &GmresConfig::default()),
        Err(KrylovError::SizeMismatch { .. })
    ));
    let zero = FnOperator { dim: a.dim(), f: |x: &[C64]| vec![C64::new(0.0, 0.0); x.len()] };
    assert!(matches!(gmres(&a, &zero, &f, &GmresConfig::default()), Err(KrylovError::DegeneratePreconditioner)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_history_is_monotone(seed in 0u64..10_000, shift in 0.5f64..3.0) {
        let n = 24;
        let mat = random_matrix(n, shift, seed);
        let a = FnOperator { dim: n, f: move |x: &[C64]| helmsweep::dense::matvec(&mat, x) };
        let f = random_vec(n, seed + 1);
        let (_, report) = gmres(&a, &Identity(n), &f, &GmresConfig { rel_tol: 1e-10, max_iters: n }).unwrap();
        prop_assert_eq!(report.resid_history.len(), report.iterations + 1);
        prop_assert!(is_non_increasing(&report.resid_history));
    }
}
