//! The viscoelastic system with a single active column reproduces the MHD
//! fixed point; MHD with zero magnetic data reproduces Navier–Stokes.

use leray_lab::config::RunConfig;
use leray_lab::galerkin::SystemKind;
use leray_lab::pipeline::run_pipeline;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> leray_lab::Result<()> {
    let base = RunConfig { n: 32, k: 8, skip_physical: true, ..RunConfig::default() };
    let mhd = run_pipeline(&base)?;
    let vns = run_pipeline(&RunConfig {
        system: SystemKind::Viscoelastic,
        column_amplitudes: vec![base.column_amplitudes[0], 0.0, 0.0],
        delta: Some(base.delta()),
        ..base.clone()
    })?;
    let n = mhd.orbit.start.len();
    println!("vNSEd vs MHD: max |dc| = {:.2e}, idle columns max {:.2e}", max_diff(&vns.orbit.start[..n], &mhd.orbit.start), vns.orbit.start[n..].iter().fold(0.0f64, |m, x| m.max(x.abs())));

    let zero_b = run_pipeline(&RunConfig { column_amplitudes: vec![0.0], ..base.clone() })?;
    let ns = run_pipeline(&RunConfig { system: SystemKind::NavierStokes, ..base.clone() })?;
    let k = ns.orbit.start.len();
    println!("MHD(alpha = 0) vs NS: max |dc| = {:.2e}", max_diff(&zero_b.orbit.start[..k], &ns.orbit.start));
    Ok(())
}
