//! Galerkin system assembly, cubic cancellation, one period of the energy
//! identity and the Gronwall trap.

use leray_lab::config::RunConfig;
use leray_lab::galerkin::CoeffState;
use leray_lab::orbit::{energy_audit, integrate_period, trap_experiment};
use leray_lab::pipeline::{cubic_defect, prepare};

fn main() -> leray_lab::Result<()> {
    let cfg = RunConfig { n: 32, k: 8, ..RunConfig::default() };
    let prep = prepare(&cfg)?;
    let b = &prep.budget;
    println!("dimension {}, epsilon {:.3}, C2 = {:.4e}, rho = {:.4e}, ball radius {:.4e}", prep.system.dimension(), prep.mollifier.epsilon, prep.c2, b.rho, b.ball_radius);
    println!("cubic defect over 100 states: {:.2e}", cubic_defect(&prep.system, b.period, 100, 1));

    let start = CoeffState::from_flat(0.0, prep.basis.k(), &vec![0.0; prep.system.dimension()]);
    let orbit = integrate_period(&prep.system, &start, b, cfg.steps)?;
    let audit = energy_audit(&orbit, b)?;
    println!(
        "energy identity from rest: |dE/ds - rate| = {:.2e} (estimate {:.2e}, holds: {}), inequality slack {:.2e}",
        audit.identity_error, audit.identity_estimate, audit.identity_ok, audit.inequality_slack
    );
    let trap = trap_experiment(&prep.system, b, 20, cfg.steps, 3)?;
    println!("trap: {} starts, worst excess {:.2e} (slack {:.2e}): {}", trap.starts, trap.worst_excess, trap.slack, trap.ok);
    Ok(())
}
