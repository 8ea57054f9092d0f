//! Similarity variables and the discrete scaling defect of initial data.

use leray_lab::data::{dss_data, homogeneous_data};
use leray_lab::similarity::{default_probes, dss_defect, map_to_physical, map_to_profile, PhysicalSample};

fn main() -> leray_lab::Result<()> {
    let p = PhysicalSample { x: [1.0, -0.5, 2.0], t: 0.125 };
    let y = map_to_profile(p)?;
    println!("(x, t) = ({:?}, {}) -> (y, s) = ({:?}, {:.4}) -> {:?}", p.x, p.t, y.y, y.s, map_to_physical(y));

    let probes = default_probes(2.0, 4, 3, 6);
    let homog = homogeneous_data(2, 0.5);
    let log_periodic = dss_data(2, 0.5, 2.0, 0.4)?;
    for lambda in [2.0, 3.0, 4.0] {
        let dh = dss_defect(|x, _| homog.eval(x), lambda, &probes)?;
        let dd = dss_defect(|x, _| log_periodic.eval(x), lambda, &probes)?;
        println!("lambda {lambda}: homogeneous defect {dh:.2e}, log-periodic (period 2) defect {dd:.2e}");
    }
    Ok(())
}
