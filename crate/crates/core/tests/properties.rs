//! Invariants checked on random inputs.

use std::sync::OnceLock;

use proptest::prelude::*;

use leray_lab::config::{Mode, RunConfig};
use leray_lab::data::{dss_data, homogeneous_data};
use leray_lab::galerkin::system::quadratic_part;
use leray_lab::grid::Grid;
use leray_lab::pipeline::{prepare, Prepared};
use leray_lab::similarity::{
    map_to_physical, map_to_profile, scale_field_value, Direction, PhysicalSample, Quantity, SimilarityMap,
};
use leray_lab::smooth::{bell, step};
use leray_lab::spectral::Spectral;

fn small_system() -> &'static Prepared {
    static PREP: OnceLock<Prepared> = OnceLock::new();
    PREP.get_or_init(|| {
        let cfg = RunConfig { n: 24, k: 4, half_width: 4.0, skip_physical: true, ..RunConfig::default() };
        prepare(&cfg).expect("small system")
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-5.0..5.0f64).prop_filter("away from the origin", |x| x.iter().map(|v| v * v).sum::<f64>() > 1e-4)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_variables_round_trip(x in point(), t in 1e-4..1e4f64) {
        let back = map_to_physical(map_to_profile(PhysicalSample { x, t }).unwrap());
        prop_assert!((back.t / t - 1.0).abs() < 1e-12);
        for a in 0..3 {
            prop_assert!((back.x[a] - x[a]).abs() < 1e-12 * (1.0 + x[a].abs()));
        }
    }

    #[test]
    fn field_scaling_round_trips(v in prop::array::uniform3(-10.0..10.0f64), t in 1e-3..1e3f64, pressure in any::<bool>()) {
        let q = if pressure { Quantity::Pressure } else { Quantity::Velocity };
        let p = scale_field_value(v, q, Direction::ToProfile, t).unwrap();
        let back = scale_field_value(p, q, Direction::ToPhysical, t).unwrap();
        for a in 0..3 {
            prop_assert!((back[a] - v[a]).abs() <= 1e-13 * (1.0 + v[a].abs()));
        }
    }

    #[test]
    fn period_reduction_stays_in_one_period(lambda in 1.01..10.0f64, s in -50.0..50.0f64) {
        let map = SimilarityMap::new(lambda).unwrap();
        let r = map.reduce(s);
        prop_assert!(r >= 0.0 && r < map.period);
        let turns = (s - r) / map.period;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn homogeneous_data_is_bounded_and_minus_one_homogeneous(seed in 0u64..500, c0 in 0.01..2.0f64, x in point(), mu in 0.1..10.0f64) {
        let d = homogeneous_data(seed, c0);
        let v = d.eval(x);
        let r = norm(&x);
        prop_assert!(r * norm(&v) <= d.pointwise_bound() * (1.0 + 1e-12));
        let w = d.eval([mu * x[0], mu * x[1], mu * x[2]]);
        for a in 0..3 {
            prop_assert!((mu * w[a] - v[a]).abs() <= 1e-12 * (1.0 + v[a].abs()) / r);
        }
    }

    #[test]
    fn log_periodic_data_is_discretely_self_similar(seed in 0u64..200, lambda in 1.2..5.0f64, depth in 0.0..0.9f64, x in point()) {
        let d = dss_data(seed, 0.5, lambda, depth).unwrap();
        let v = d.eval(x);
        let w = d.eval([lambda * x[0], lambda * x[1], lambda * x[2]]);
        for a in 0..3 {
            prop_assert!((lambda * w[a] - v[a]).abs() <= 1e-10 * (1.0 + v[a].abs()));
        }
    }

    #[test]
    fn bell_and_step_stay_in_unit_interval(x in -2.0..2.0f64) {
        let (b, _, _) = bell(x);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert_eq!(b, bell(-x).0);
        let (z, dz, _) = step(x);
        prop_assert!((0.0..=1.0).contains(&z));
        prop_assert!(dz >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadratic_terms_do_no_work(raw in prop::collection::vec(-1.0..1.0f64, 8), scale in 0.01..100.0f64, phase in 0.0..1.0f64) {
        let prep = small_system();
        let dim = prep.system.dimension();
        prop_assume!(norm(&raw[..dim.min(raw.len())]) > 1e-3);
        let x: Vec<f64> = (0..dim).map(|i| scale * raw[i % raw.len()] * (1.0 + i as f64 / dim as f64)).collect();
        let q = quadratic_part(&prep.system.tables_at(phase * prep.map.period), &x);
        let pairing: f64 = x.iter().zip(&q).map(|(a, b)| a * b).sum();
        prop_assert!(pairing.abs() <= 1e-10 * norm(&x).powi(3), "pairing {pairing:e}");
    }

    #[test]
    fn leray_projection_is_idempotent_and_solenoidal(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let grid = Grid::new(2.0, 8).unwrap();
        let sp = Spectral::new(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: [Vec<f64>; 3] = std::array::from_fn(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let p = sp.leray_project(&v);
        let pp = sp.leray_project(&p);
        let div = sp.divergence(&p);
        prop_assert!(div.iter().all(|d| d.abs() < 1e-12));
        for a in 0..3 {
            for (x, y) in p[a].iter().zip(&pp[a]) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_hash_tracks_content_not_output(lambda in 1.01..8.0f64, k in 1usize..40, out in "[a-z]{1,8}") {
        let a = RunConfig { lambda, k, ..RunConfig::default() };
        let b = RunConfig { output: out.into(), ..a.clone() };
        prop_assert_eq!(a.content_hash(), b.content_hash());
        let back = RunConfig::from_toml(&a.to_toml()).unwrap();
        prop_assert_eq!(&back, &a);
        let c = RunConfig { mode: Mode::Ss, ..a.clone() };
        prop_assert_ne!(a.content_hash(), c.content_hash());
    }
}
