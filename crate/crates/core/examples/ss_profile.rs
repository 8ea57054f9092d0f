//! Self-similar run: stationary Newton solve, sphere certificate and audits.

use leray_lab::config::{Mode, RunConfig};
use leray_lab::pipeline::run_pipeline;

fn main() -> leray_lab::Result<()> {
    let cfg = RunConfig { mode: Mode::Ss, ..RunConfig::default() };
    let report = run_pipeline(&cfg)?;
    let st = report.stationary.as_ref().expect("stationary section");
    println!(
        "Newton: |P(x*)| = {:.2e}, |x*| = {:.4e} (sphere {:.4e}), {} Newton / {} gradient steps",
        st.report.residual, st.report.norm, st.report.sphere_radius, st.report.newton_steps, st.report.gradient_steps
    );
    println!("weak-form residual (relative) {:.2e}", st.weak_residual);
    println!("certificate: worst slack {:.3e} over {} samples", st.certificate.worst_slack, st.certificate.samples);
    for c in &report.criteria {
        println!("[{}] {:>2} {:<30} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    }
    Ok(())
}
