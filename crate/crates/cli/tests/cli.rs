use std::path::Path;
use std::process::{Command, Output};

fn helmsweep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmsweep")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

fn small_run(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--omega-over-2pi",
        "8",
        "--velocity",
        "lens",
        "--set",
        "forcing=point",
        "--set",
        "forcing_center=0.5,0.25",
        "--set",
        "name=small",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    helmsweep(&args)
}

#[test]
fn run_writes_valid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n"], 64);
    assert_eq!(report["N"], 64 * 64);
    let iters = report["n_iter"].as_u64().unwrap() as usize;
    assert_eq!(report["resid_history"].as_array().unwrap().len(), iters + 1);
    assert!(report["resid_history"][iters].as_f64().unwrap() <= 1e-3);

    let report_path = dir.path().join("small.json");
    let check = helmsweep(&["check-report", report_path.to_str().unwrap()]);
    assert_eq!(code(&check), 0);
    let (header, data) = helmsweep::discretization::read_field(&dir.path().join("small.field")).unwrap();
    assert_eq!((header.dim, header.n, header.complex), (2, 64, true));
    assert!(matches!(data, helmsweep::discretization::FieldData::Complex(ref v) if v.len() == 64 * 64));
}

#[test]
fn identical_runs_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&small_run(a.path(), &["--seed", "7"])), 0);
    assert_eq!(code(&small_run(b.path(), &["--seed", "7"])), 0);
    let fa = std::fs::read(a.path().join("small.field")).unwrap();
    let fb = std::fs::read(b.path().join("small.field")).unwrap();
    assert_eq!(fa, fb);
    let ra: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("small.json")).unwrap()).unwrap();
    let rb: serde_json::Value = serde_json::from_slice(&std::fs::read(b.path().join("small.json")).unwrap()).unwrap();
    assert_eq!(ra["n_iter"], rb["n_iter"]);
    assert_eq!(ra["resid_history"], rb["resid_history"]);
}

#[test]
fn zero_forcing_gives_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = helmsweep(&["run", "--omega-over-2pi", "8", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_iter"], 0);
    let (_, data) = helmsweep::discretization::read_field(&dir.path().join("scenario.field")).unwrap();
    match data {
        helmsweep::discretization::FieldData::Complex(v) => assert!(v.iter().all(|z| z.norm() == 0.0)),
        other => panic!("expected a complex field, got {other:?}"),
    }
}

#[test]
fn exit_codes_follow_the_failing_stage() {
    let spec_error = helmsweep(&["run", "--omega-over-2pi", "8", "--velocity", "bogus"]);
    assert_eq!(code(&spec_error), 2);
    let missing_key = helmsweep(&["run", "--velocity", "lens"]);
    assert_eq!(code(&missing_key), 2);
    let bad_data_side = helmsweep(&["run", "--omega-over-2pi", "8", "--bc", "x2_low=data:one"]);
    assert_eq!(code(&bad_data_side), 2);

    let assembly = helmsweep(&["run", "--omega-over-2pi", "8", "--set", "velocity_value=-1"]);
    assert_eq!(code(&assembly), 3, "{}", String::from_utf8_lossy(&assembly.stderr));
    let bad_center = helmsweep(&["run", "--omega-over-2pi", "8", "--forcing", "point", "--set", "forcing_center=0.5"]);
    assert_eq!(code(&bad_center), 3);

    let stalled = helmsweep(&[
        "run",
        "--omega-over-2pi",
        "16",
        "--forcing",
        "point",
        "--set",
        "forcing_center=0.5,0.5",
        "--set",
        "max_iters=1",
        "--set",
        "rel_tol=1e-12",
    ]);
    assert_eq!(code(&stalled), 5);
    let partial: serde_json::Value = serde_json::from_slice(&stalled.stdout).unwrap();
    assert_eq!(partial["n_iter"], 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 64}"#).unwrap();
    assert_eq!(code(&helmsweep(&["check-report", bad.to_str().unwrap()])), 6);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&helmsweep(&["check-report", missing.to_str().unwrap()])), 6);
    assert_eq!(code(&helmsweep(&["run", "--spec", missing.to_str().unwrap()])), 6);
}

#[test]
fn show_spec_round_trips() {
    let first = helmsweep(&["show-spec", "--spec", &scenario("mixed-sides-w16.spec"), "--rank", "3"]);
    assert_eq!(code(&first), 0);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("rank = 3\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("again.spec");
    std::fs::write(&path, &text).unwrap();
    let second = helmsweep(&["show-spec", "--spec", path.to_str().unwrap()]);
    assert_eq!(String::from_utf8(second.stdout).unwrap(), text);
}

#[test]
fn direction_study_reports_both_signs() {
    let dir = tempfile::tempdir().unwrap();
    let out = helmsweep(&[
        "direction-study",
        "--spec",
        &scenario("gradient-w16.spec"),
        "--omega-over-2pi",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pair: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(pair["positive"]["sweep"], "+x2");
    assert_eq!(pair["negative"]["sweep"], "-x2");
    assert!(dir.path().join("gradient-w16-pos.json").exists());
    assert!(dir.path().join("gradient-w16-neg.field").exists());
}

#[test]
fn rank_probe_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ranks.csv");
    let out = helmsweep(&[
        "rank-probe",
        "--spec",
        &scenario("ranks-constant-w32-pml.spec"),
        "--omega-over-2pi",
        "8",
        "--m",
        "32",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "level,i,i_prime,rows,cols,rank,tau,omega,n,m,bc");
    let rows: Vec<&str> = lines.collect();
    // Weak partition of 64 points with leaf 16: 2 + 4 blocks.
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.ends_with(",64,32,pml")));
}
