//! Heat-smoothed backgrounds of DSS data and the shared cutoff radius that
//! makes their cutoff versions small. The cutoff norms decay only slowly
//! with the radius, so the ladder moves for δ just below the `R0 = 1` value.

use leray_lab::background::{build_cutoff, CutoffSettings, HeatBackground};
use leray_lab::data::dss_data;
use leray_lab::grid::Grid;
use leray_lab::similarity::SimilarityMap;

fn main() -> leray_lab::Result<()> {
    let grid = Grid::new(6.0, 32)?;
    let map = SimilarityMap::new(2.0)?;
    let velocity = HeatBackground::new(&dss_data(0, 0.15, 2.0, 0.3)?, map, grid, 8)?;
    let magnetic = HeatBackground::new(&dss_data(1, 0.075, 2.0, 0.3)?, map, grid, 8)?;
    println!("harmonic orders {:?}, periodicity defect {:.2e}", velocity.orders, velocity.periodicity_defect());
    for delta in [0.5, 0.268, 0.262, 0.25] {
        match build_cutoff(&[&velocity, &magnetic], delta, &CutoffSettings::default()) {
            Ok(c) => {
                println!("delta {delta}: R0 = {}, theta(R0) = {:?}", c.r0, c.theta_r0);
                for (i, f) in c.fields.iter().enumerate() {
                    println!(
                        "  field {i}: sup L^q {:.3e}, sup L4 {:.3e}, sup |LW|_H-1 {:.3e}, div defect {:.1e}",
                        f.lq_sup, f.l4_sup, f.forcing_h_minus1_sup, f.divergence_defect
                    );
                }
            }
            Err(e) => println!("delta {delta}: {e}"),
        }
    }
    Ok(())
}
