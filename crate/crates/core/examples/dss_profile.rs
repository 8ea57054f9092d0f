//! Full DSS run at desk scale: periodic profile, audits and criteria.

use leray_lab::config::RunConfig;
use leray_lab::pipeline::run_pipeline;

fn main() -> leray_lab::Result<()> {
    let cfg = RunConfig::default();
    let report = run_pipeline(&cfg)?;
    println!("C2 = {:.4e}, rho = {:.4e}, R0 = {}", report.system.budget.c2, report.system.budget.rho, report.background.r0);
    println!(
        "fixed point: residual {:.2e} after {} iterations ({} Newton)",
        report.orbit.fixed_point_residual, report.orbit.iterations, report.orbit.newton_steps
    );
    for c in &report.criteria {
        println!("[{}] {:>2} {:<30} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    }
    Ok(())
}
