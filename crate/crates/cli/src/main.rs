//! Command-line front end: run scenarios, compare sweep directions, probe
//! off-diagonal ranks and validate report files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helmsweep::rank_probe::probe;
use helmsweep::scenario::{run_direction_study, run_scenario, ScenarioError, ScenarioReport, ScenarioSpec};

#[derive(Parser)]
#[command(name = "helmsweep", version, about = "Sweeping-preconditioned Helmholtz solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble, factor and solve one scenario; prints the JSON report.
    Run(SpecArgs),
    /// Run a scenario with both signs of its sweep axis.
    DirectionStudy(SpecArgs),
    /// Dense Schur complement rank profile of one layer, as CSV.
    RankProbe {
        #[command(flatten)]
        spec: SpecArgs,
        /// 1-based layer index (default: n / 2).
        #[arg(long)]
        m: Option<usize>,
        /// Singular value threshold relative to the largest singular value of T_m.
        #[arg(long, default_value_t = 1e-6)]
        tau: f64,
        /// Output CSV path (default: stdout).
        #[arg(long = "csv")]
        csv: Option<PathBuf>,
    },
    /// Validate a report file against the bundled JSON schema.
    CheckReport { report: PathBuf },
    /// Print the fully resolved scenario spec.
    ShowSpec(SpecArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    omega_over_2pi: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    velocity: Option<String>,
    #[arg(long)]
    forcing: Option<String>,
    /// `pml`, `dirichlet`, or `x1_low=dirichlet;x2_high=data:one` style entries.
    #[arg(long)]
    bc: Option<String>,
    /// Sweep axis and sign, e.g. `+x2`.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for `<name>.field` and `<name>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other spec key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl SpecArgs {
    fn load(&self) -> Result<ScenarioSpec, ScenarioError> {
        let text = match &self.spec {
            Some(p) => std::fs::read_to_string(p).map_err(|e| ScenarioError::Io(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("dim", self.dim.map(|v| v.to_string()));
        push("omega_over_2pi", self.omega_over_2pi.map(|v| v.to_string()));
        push("q", self.q.map(|v| v.to_string()));
        push("rank", self.rank.map(|v| v.to_string()));
        push("eps", self.eps.map(|v| v.to_string()));
        push("velocity", self.velocity.clone());
        push("forcing", self.forcing.clone());
        push("bc", self.bc.clone());
        push("sweep", self.sweep.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| ScenarioError::Spec(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut spec = ScenarioSpec::parse_with_overrides(&text, &overrides)?;
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| ScenarioError::Io(format!("{}: {e}", dir.display())))?;
            spec.out_field = Some(dir.join(format!("{}.field", spec.name)));
            spec.out_report = Some(dir.join(format!("{}.json", spec.name)));
        }
        Ok(spec)
    }
}

/// Write to stdout, ignoring a closed pipe (e.g. output piped into `head`).
fn emit(text: &str) -> Result<(), ScenarioError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(ScenarioError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn print_report(report: &ScenarioReport) -> Result<(), ScenarioError> {
    emit(&(report.to_json() + "\n"))
}

fn check_report(path: &Path) -> Result<(), ScenarioError> {
    let report = ScenarioReport::read(path)?;
    emit(&format!("{}: valid ({} iterations)\n", path.display(), report.n_iter))
}

fn execute(command: Command) -> Result<(), ScenarioError> {
    match command {
        Command::Run(args) => {
            let spec = args.load()?;
            match run_scenario(&spec) {
                Ok(outcome) => print_report(&outcome.report)?,
                Err(ScenarioError::NonConvergence(outcome)) => {
                    print_report(&outcome.report)?;
                    return Err(ScenarioError::NonConvergence(outcome));
                }
                Err(e) => return Err(e),
            }
        }
        Command::DirectionStudy(args) => {
            let spec = args.load()?;
            if spec.velocity.name() != "gradient" {
                log::warn!("direction study with a '{}' velocity", spec.velocity.name());
            }
            let study = run_direction_study(&spec)?;
            let pair = serde_json::json!({
                "positive": study.positive.report,
                "negative": study.negative.report,
            });
            emit(&(serde_json::to_string_pretty(&pair).expect("reports serialize") + "\n"))?;
        }
        Command::RankProbe { spec, m, tau, csv } => {
            let spec = spec.load()?;
            let config = spec.config()?;
            let m = m.unwrap_or((config.n / 2).max(1));
            let profile =
                probe(&config, &spec.velocity, m, tau).map_err(|e| ScenarioError::Factorization(e.to_string()))?;
            match csv {
                Some(path) => {
                    profile.write_csv(&path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
                    eprintln!("max off-diagonal rank {} over {} levels", profile.max_rank(), profile.levels());
                }
                None => emit(&profile.to_csv())?,
            }
        }
        Command::CheckReport { report } => check_report(&report)?,
        Command::ShowSpec(args) => emit(&args.load()?.to_text())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("helmsweep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
