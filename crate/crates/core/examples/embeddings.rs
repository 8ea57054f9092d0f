//! Weak-L³, Morrey and weighted-L² norms of a small field corpus, with the
//! measured embedding constants.

use leray_lab::data::{homogeneous_data, AnalyticData, Shape};
use leray_lab::field::{TailDescriptor, VectorField};
use leray_lab::grid::Grid;
use leray_lab::norms::{embedding_report, NormSettings};

fn main() -> leray_lab::Result<()> {
    let grid = Grid::new(4.0, 32)?;
    let st = NormSettings::default();
    let analytic = |d: AnalyticData| VectorField::from_descriptor(grid, TailDescriptor::Data(d));
    let corpus = [
        ("1/|x|", analytic(AnalyticData::single(1.0, Shape::Radial { axis: 0 }))),
        ("swirl", analytic(AnalyticData::single(1.0, Shape::Swirl))),
        ("poloidal", analytic(AnalyticData::single(1.0, Shape::Poloidal))),
        ("homogeneous mix", analytic(homogeneous_data(4, 1.0))),
        ("gaussian", VectorField::from_fn(grid, |x| [(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.0, 0.0])),
    ];
    println!("{:<16} {:>9} {:>9} {:>9} {:>10} {:>10} {:>8}", "field", "weak L3", "Morrey", "wL2", "C_morrey", "C_weight", "ball");
    for (name, f) in &corpus {
        let r = embedding_report(f, &st, 2.0);
        println!(
            "{name:<16} {:>9.4} {:>9.4} {:>9.4} {:>10.4} {:>10.4} {:>8.4}",
            r.weak_l3, r.morrey, r.weighted_l2, r.morrey_constant, r.weighted_constant, r.ball_ratio
        );
    }
    println!("reference for 1/|x|: weak L3 = (4pi/3)^(1/3) = 1.6120, weighted L2 = sqrt(2pi) = 2.5066");
    Ok(())
}
