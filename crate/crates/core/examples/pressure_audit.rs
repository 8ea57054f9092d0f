//! Pressure of a solved profile: Poisson residual, Riesz identity, the
//! space-time bound under refinement and the zero-pressure cases.

use leray_lab::config::{Mode, RunConfig};
use leray_lab::pipeline::{candidate, prepare, pressure_audit, solve};

fn main() -> leray_lab::Result<()> {
    let cfg = RunConfig { mode: Mode::Ss, n: 32, k: 8, ..RunConfig::default() };
    let prep = prepare(&cfg)?;
    let sol = solve(&prep)?;
    let cand = candidate(&prep, &sol)?;
    let p = pressure_audit(&prep, &cand)?;
    println!("poisson residual {:.2e}, gauge mean {:.2e}, Riesz identity {:.2e}", p.poisson_residual, p.gauge_mean, p.identity_defect);
    println!(
        "bound ratio {:.4} (n/2 grid {:.4}, change {:.2e}), |p|_5/3 = {:.3e}",
        p.bound.ratio, p.bound_coarse.ratio, p.refinement_change, p.bound.pressure_norm
    );
    for (i, b) in p.background_time.iter().enumerate() {
        println!("background {i}: |W|_10/3 = {:.3e} <= {:.3e}: {}", b.spacetime_norm, b.bound, b.ok);
    }
    let ip = &p.interpolation;
    println!("interpolation: {:.3e} <= {:.3e} ({})", ip.lhs, ip.rhs, ip.ok);
    println!("zero-pressure cases: shear {:.1e}, u = a {:.1e}", p.zero_checks.shear, p.zero_checks.elsasser);
    Ok(())
}
