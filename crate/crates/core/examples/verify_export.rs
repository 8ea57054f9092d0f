//! Writes a run's artifacts, re-verifies the stored report, and shows a
//! tampered energy trace failing by name.

use leray_lab::config::{Mode, RunConfig};
use leray_lab::pipeline::{run_with, write_artifacts};
use leray_lab::report::{verify, Report};

fn main() -> leray_lab::Result<()> {
    let dir = std::env::temp_dir().join("leray-lab-verify-example");
    let cfg = RunConfig { mode: Mode::Ss, n: 32, k: 8, skip_physical: true, output: dir.clone(), ..RunConfig::default() };
    let (report, prep, sol) = run_with(&cfg)?;
    write_artifacts(&dir, &prep, &report, &sol)?;
    println!("artifacts in {}", dir.display());

    let stored = Report::load(&dir.join("report.json"))?;
    print!("{}", verify(&stored, Some(&cfg)).table());

    let mut tampered = stored.clone();
    let mid = tampered.orbit.trace.energy.len() / 2;
    tampered.orbit.trace.energy[mid] *= 1.001;
    println!("after tampering with one energy sample:");
    print!("{}", verify(&tampered, Some(&cfg)).table());
    Ok(())
}
