//! Command-line contract: exit codes, caching, verification and determinism.

use std::path::PathBuf;
use std::sync::OnceLock;

use leray_lab::cli::{exit_code, run, EXIT_CONFIG, EXIT_CRITERION, EXIT_NONCONVERGENCE, EXIT_PASS};
use leray_lab::config::{Mode, RunConfig};
use leray_lab::pipeline::run_pipeline;
use leray_lab::report::{verify, Report};
use leray_lab::LabError;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("leray-lab-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn small() -> RunConfig {
    RunConfig { mode: Mode::Ss, n: 32, k: 8, skip_physical: true, ..RunConfig::default() }
}

/// One small self-similar report shared by the verification tests.
fn fresh() -> &'static Report {
    static REPORT: OnceLock<Report> = OnceLock::new();
    REPORT.get_or_init(|| run_pipeline(&small()).expect("small run"))
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("leray-lab").chain(list.iter().copied()).map(String::from).collect()
}

#[test]
fn solve_then_verify_then_export() {
    let out = scratch("solve");
    let o = out.to_str().unwrap();
    let solve = args(&["solve", "--mode", "ss", "--n", "32", "--k", "8", "--skip-physical", "--output", o]);
    assert_eq!(run(solve.clone()), EXIT_PASS);
    for f in ["report.json", "energy.csv", "trajectory.json", "criteria.csv", "pressure_s0.bin", "profile_plane_s0.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    // second call is served from the cache
    let stamp = std::fs::metadata(out.join("report.json")).unwrap().modified().unwrap();
    assert_eq!(run(solve), EXIT_PASS);
    assert_eq!(std::fs::metadata(out.join("report.json")).unwrap().modified().unwrap(), stamp);

    let report = out.join("report.json");
    assert_eq!(run(args(&["verify", "--report", report.to_str().unwrap()])), EXIT_PASS);
    let tables = out.join("tables");
    assert_eq!(run(args(&["export", "--report", report.to_str().unwrap(), "--output", tables.to_str().unwrap()])), EXIT_PASS);
    assert!(tables.join("energy.csv").exists() && tables.join("criteria.csv").exists());
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn configuration_errors_exit_with_two() {
    let out = scratch("config");
    let o = out.to_str().unwrap();
    assert_eq!(run(args(&["solve", "--mode", "dss", "--lambda", "0.5", "--output", o])), EXIT_CONFIG);
    assert_eq!(run(args(&["solve", "--system", "euler"])), EXIT_CONFIG);
    assert_eq!(run(args(&["solve", "--n", "7", "--output", o])), EXIT_CONFIG);
    assert_eq!(run(args(&["verify", "--report", out.join("missing.json").to_str().unwrap()])), EXIT_CONFIG);
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("corrupt.json"), "{ not json").unwrap();
    assert_eq!(run(args(&["verify", "--report", out.join("corrupt.json").to_str().unwrap()])), EXIT_CONFIG);
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn stage_failures_map_to_exit_codes() {
    let nc = LabError::NonConvergence { stage: "poincare fixed point".into(), detail: "stalled".into() };
    assert_eq!(exit_code(&nc), EXIT_NONCONVERGENCE);
    assert_eq!(exit_code(&LabError::Domain("x".into())), EXIT_NONCONVERGENCE);
    assert_eq!(exit_code(&LabError::Config("x".into())), EXIT_CONFIG);
    assert_eq!(exit_code(&LabError::Format("x".into())), EXIT_CONFIG);
}

#[test]
fn fresh_report_verifies() {
    let v = verify(fresh(), Some(&small()));
    assert!(v.passed(), "{}", v.table());
    assert!(v.warnings.is_empty(), "{:?}", v.warnings);
}

#[test]
fn tampered_energy_trace_fails_the_energy_criterion() {
    let mut r = fresh().clone();
    let mid = r.orbit.trace.energy.len() / 2;
    r.orbit.trace.energy[mid] *= 1.01;
    let v = verify(&r, None);
    let energy = v.criteria.iter().find(|c| c.id == 3).expect("energy criterion");
    assert!(!energy.passed);
    assert_eq!(energy.name, "energy identity");
    assert!(v.criteria.iter().filter(|c| c.id != 3).all(|c| c.passed));

    let out = scratch("tampered");
    std::fs::create_dir_all(&out).unwrap();
    let path = out.join("report.json");
    std::fs::write(&path, r.to_json()).unwrap();
    assert_eq!(run(args(&["verify", "--report", path.to_str().unwrap()])), EXIT_CRITERION);
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn older_report_version_warns() {
    let mut r = fresh().clone();
    r.version -= 1;
    let v = verify(&r, None);
    assert!(v.warnings.iter().any(|w| w.contains("version")), "{:?}", v.warnings);
    let other = RunConfig { k: 9, ..small() };
    let v = verify(fresh(), Some(&other));
    assert!(v.warnings.iter().any(|w| w.contains("different configuration")), "{:?}", v.warnings);
}

#[test]
fn identical_configurations_give_identical_reports() {
    let again = run_pipeline(&small()).unwrap();
    assert_eq!(again.to_json(), fresh().to_json());
}

#[test]
fn zero_data_gives_the_zero_solution() {
    for mode in [Mode::Ss, Mode::Dss] {
        let cfg = RunConfig { mode, amplitude: 0.0, n: 32, k: 6, ..RunConfig::default() };
        let r = run_pipeline(&cfg).unwrap();
        assert!(r.orbit.start.iter().all(|c| *c == 0.0), "{mode:?}");
        assert_eq!(r.orbit.fixed_point_residual, 0.0);
        assert_eq!(r.system.budget.c2, 0.0);
        assert!(r.pressure.poisson_residual == 0.0 && r.pressure.bound.pressure_norm == 0.0);
        if let Some(st) = &r.stationary {
            assert_eq!(st.report.residual, 0.0);
        }
        let ph = r.physical.as_ref().unwrap();
        assert!(ph.lei.iter().all(|t| t.residual == 0.0));
    }
}
