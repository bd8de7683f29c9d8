use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::discretization::{
    assemble, build_forcing, build_velocity, dirichlet_data_to_forcing, write_complex_field, SimulationConfig,
    SweepDirection,
};
use crate::hmatrix::{build_partition, DEFAULT_LEAF_1D, DEFAULT_LEAF_2D};
use crate::krylov::{gmres, SolveReport};
use crate::rank_probe::{boundary_label, probe};
use crate::sweeping::factor_hmatrix;
use crate::C64;

use super::report::ScenarioReport;
use super::spec::{boundary_to_text, describe_forcing, describe_velocity, ScenarioSpec};
use super::ScenarioError;

/// Files written by a run (only those requested in the spec).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputBundle {
    pub field: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub rank_profile: Option<PathBuf>,
}

/// Result of one end-to-end run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: SimulationConfig,
    pub report: ScenarioReport,
    pub solve: SolveReport,
    /// Solution in natural (unswept) order.
    pub solution: Vec<C64>,
    pub bundle: OutputBundle,
}

/// Both sweep signs along the spec's sweep axis on the same discretization.
#[derive(Debug, Clone)]
pub struct DirectionStudy {
    pub positive: RunOutcome,
    pub negative: RunOutcome,
}

/// Assemble, factor, solve and write the requested outputs.
///
/// `t_setup_s` covers the preconditioner construction only; sampling the
/// velocity and assembling the operator are excluded. A run that does not
/// converge still writes its outputs and is returned inside
/// [`ScenarioError::NonConvergence`].
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunOutcome, ScenarioError> {
    spec.validate()?;
    let config = spec.config()?;
    let assembly = |e: crate::discretization::DiscretizationError| ScenarioError::Assembly(e.to_string());
    let velocity = build_velocity(&spec.velocity, &config).map_err(assembly)?;
    let a = assemble(&config, &velocity).map_err(assembly)?;
    let mut forcing = build_forcing(&spec.forcing, &config).map_err(assembly)?;
    let data = dirichlet_data_to_forcing(&config).map_err(assembly)?;
    forcing.samples.iter_mut().zip(&data.samples).for_each(|(f, b)| *f += b);
    let f = a.ordering.to_swept(&forcing.samples);

    let (leaf, index_dim) = if config.dim == 2 { (DEFAULT_LEAF_1D, 1) } else { (DEFAULT_LEAF_2D, 2) };
    let tree = build_partition(config.n, leaf, index_dim, spec.admissibility)
        .map_err(|e| ScenarioError::Spec(format!("face partition: {e}")))?;
    log::info!(
        "{}: n = {}, N = {}, omega/2pi = {:.4}, sweep {}",
        spec.name,
        config.n,
        config.num_unknowns(),
        config.omega_over_2pi(),
        config.sweep
    );
    let start = Instant::now();
    let fact = factor_hmatrix(&a, tree, &spec.policy).map_err(|e| ScenarioError::Factorization(e.to_string()))?;
    let t_setup_s = start.elapsed().as_secs_f64();
    log::info!("{}: setup {:.3} s, max rank {}", spec.name, t_setup_s, fact.max_rank());

    let (u, mut solve) = gmres(&a, &fact, &f, &spec.gmres).map_err(|e| ScenarioError::Solve(e.to_string()))?;
    solve.t_setup_s = t_setup_s;
    let solution = a.ordering.to_natural(&u);
    log::info!("{}: {} iterations, solve {:.3} s", spec.name, solve.iterations, solve.t_solve_s);

    let report = ScenarioReport {
        omega_over_2pi: config.omega_over_2pi(),
        q: config.q,
        n: config.n,
        num_unknowns: config.num_unknowns(),
        max_rank: spec.policy.max_rank as u64,
        eps: spec.policy.eps,
        bc: boundary_to_text(&config.boundary, config.dim),
        velocity: describe_velocity(&spec.velocity),
        forcing: describe_forcing(&spec.forcing),
        sweep: config.sweep.to_string(),
        t_setup_s,
        t_solve_s: solve.t_solve_s,
        n_iter: solve.iterations,
        resid_history: solve.resid_history.clone(),
        true_resid: solve.true_resid,
        seed: spec.policy.seed,
    };
    let mut outcome = RunOutcome { config, report, solve, solution, bundle: OutputBundle::default() };
    write_outputs(spec, &mut outcome)?;
    if !outcome.solve.converged {
        return Err(ScenarioError::NonConvergence(Box::new(outcome)));
    }
    Ok(outcome)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io(format!("{}: {e}", path.display()))
}

fn write_outputs(spec: &ScenarioSpec, outcome: &mut RunOutcome) -> Result<(), ScenarioError> {
    let c = &outcome.config;
    if let Some(path) = &spec.out_field {
        write_complex_field(path, c.dim, c.n, &outcome.solution).map_err(|e| io_err(path, e))?;
        outcome.bundle.field = Some(path.clone());
    }
    if let Some(path) = &spec.out_report {
        outcome.report.write(path)?;
        outcome.bundle.report = Some(path.clone());
    }
    if let Some(path) = &spec.out_rank {
        let m = (c.n / 2).max(1);
        let profile = probe(c, &spec.velocity, m, 1e-6).map_err(|e| ScenarioError::Factorization(e.to_string()))?;
        debug_assert_eq!(profile.bc, boundary_label(c));
        profile.write_csv(path).map_err(|e| io_err(path, e))?;
        outcome.bundle.rank_profile = Some(path.clone());
    }
    Ok(())
}

/// `dir/stem-<tag>.ext` for `dir/stem.ext`.
fn tagged(path: &Option<PathBuf>, tag: &str) -> Option<PathBuf> {
    path.as_ref().map(|p| {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let name = match p.extension() {
            Some(ext) => format!("{stem}-{tag}.{}", ext.to_string_lossy()),
            None => format!("{stem}-{tag}"),
        };
        p.with_file_name(name)
    })
}

/// Run the spec with both signs of its sweep axis. Output paths get a
/// `-pos` / `-neg` suffix. Non-convergence of either run is reported after
/// both have finished.
pub fn run_direction_study(spec: &ScenarioSpec) -> Result<DirectionStudy, ScenarioError> {
    let run = |positive: bool| -> Result<(RunOutcome, bool), ScenarioError> {
        let tag = if positive { "pos" } else { "neg" };
        let mut s = spec.clone();
        s.name = format!("{}-{tag}", spec.name);
        s.sweep = SweepDirection { axis: spec.sweep.axis, positive };
        s.out_field = tagged(&spec.out_field, tag);
        s.out_report = tagged(&spec.out_report, tag);
        s.out_rank = tagged(&spec.out_rank, tag);
        match run_scenario(&s) {
            Ok(o) => Ok((o, true)),
            Err(ScenarioError::NonConvergence(o)) => Ok((*o, false)),
            Err(e) => Err(e),
        }
    };
    let (positive, pos_ok) = run(true)?;
    let (negative, neg_ok) = run(false)?;
    if !pos_ok {
        return Err(ScenarioError::NonConvergence(Box::new(positive)));
    }
    if !neg_ok {
        return Err(ScenarioError::NonConvergence(Box::new(negative)));
    }
    Ok(DirectionStudy { positive, negative })
}
