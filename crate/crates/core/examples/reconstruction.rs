//! Physical-space audits of a DSS profile: dyadic scaling of the distance to
//! the heat flow, local energy, the energy inequality and data attainment.

use leray_lab::config::RunConfig;
use leray_lab::pipeline::{candidate, physical_audit, prepare, solve};

fn main() -> leray_lab::Result<()> {
    let cfg = RunConfig { n: 32, k: 8, ..RunConfig::default() };
    let prep = prepare(&cfg)?;
    let sol = solve(&prep)?;
    let cand = candidate(&prep, &sol)?;
    let ph = physical_audit(&prep, &cand)?;
    println!("DSS defect {:.2e} (scale {:.2e})", ph.dss_defect, ph.dss_scale);
    let d = &ph.dyadic;
    println!("scaling defect {:.2e}, t^(1/4) envelopes {:?}", d.scaling_defect, d.envelopes);
    for row in &ph.local_energy.rows {
        println!(
            "R = {}: energy {:.3e}, enstrophy {:.3e}, decay {:?} (monotone {}), split constant {:.3}",
            row.radius, row.energy, row.enstrophy, row.decay, row.decay_monotone, row.split_constant
        );
    }
    for t in &ph.lei {
        println!("bump: lhs {:.3e}, heat {:.3e}, flux {:.3e}, coupling {:.3e} -> residual/scale {:.3}", t.lhs, t.heat, t.flux, t.coupling, t.residual / t.scale);
    }
    let init = &ph.initial;
    for ((t, c), h) in init.times.iter().zip(&init.candidate_part).zip(&init.heat_part) {
        println!("t = {t:.3e}: |v - heat| = {c:.3e}, |heat - v0| = {h:.3e}");
    }
    Ok(())
}
