//! Self-similar change of variables `y = x / sqrt(2t)`, `s = log sqrt(2t)`.

use serde::{Deserialize, Serialize};

use crate::error::{argument, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    pub lambda: f64,
    pub period: f64,
}

impl SimilarityMap {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return argument(format!("scale factor must be positive, got {lambda}"));
        }
        Ok(Self { lambda, period: lambda.ln() })
    }

    pub fn is_discrete(&self) -> bool {
        self.lambda > 1.0
    }

    /// Reduces `s` into `[0, T)`.
    pub fn reduce(&self, s: f64) -> f64 {
        if self.period > 0.0 {
            s.rem_euclid(self.period)
        } else {
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSample {
    pub x: [f64; 3],
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub y: [f64; 3],
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    ToProfile,
    ToPhysical,
}

/// Velocity-like quantities scale with `sqrt(2t)`, pressure with `2t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    Velocity,
    Pressure,
}

pub fn map_to_profile(xt: PhysicalSample) -> Result<ProfileSample> {
    if !(xt.t > 0.0) {
        return domain(format!("physical time must be positive, got {}", xt.t));
    }
    let r = (2.0 * xt.t).sqrt();
    Ok(ProfileSample { y: [xt.x[0] / r, xt.x[1] / r, xt.x[2] / r], s: r.ln() })
}

pub fn map_to_physical(ys: ProfileSample) -> PhysicalSample {
    let r = ys.s.exp();
    PhysicalSample { x: [ys.y[0] * r, ys.y[1] * r, ys.y[2] * r], t: 0.5 * r * r }
}

pub fn scale_field_value(value: [f64; 3], quantity: Quantity, direction: Direction, t: f64) -> Result<[f64; 3]> {
    if !(t > 0.0) {
        return domain(format!("physical time must be positive, got {t}"));
    }
    let base = 2.0 * t;
    let factor = match quantity {
        Quantity::Velocity => base.sqrt(),
        Quantity::Pressure => base,
    };
    let f = match direction {
        Direction::ToProfile => factor,
        Direction::ToPhysical => 1.0 / factor,
    };
    Ok([value[0] * f, value[1] * f, value[2] * f])
}

pub fn scale_scalar(value: f64, quantity: Quantity, direction: Direction, t: f64) -> Result<f64> {
    Ok(scale_field_value([value, 0.0, 0.0], quantity, direction, t)?[0])
}

/// `max |λ f(λx, λ²t) − f(x,t)|` over the probes.
pub fn dss_defect<F>(sampler: F, lambda: f64, probes: &[PhysicalSample]) -> Result<f64>
where
    F: Fn([f64; 3], f64) -> [f64; 3],
{
    if probes.is_empty() {
        return argument("empty probe set");
    }
    if !(lambda > 1.0) {
        return argument(format!("scale factor must exceed 1, got {lambda}"));
    }
    let mut worst: f64 = 0.0;
    for p in probes {
        if !(p.t > 0.0) {
            return domain(format!("probe time must be positive, got {}", p.t));
        }
        let scaled = sampler([lambda * p.x[0], lambda * p.x[1], lambda * p.x[2]], lambda * lambda * p.t);
        let base = sampler(p.x, p.t);
        let d = ((lambda * scaled[0] - base[0]).powi(2)
            + (lambda * scaled[1] - base[1]).powi(2)
            + (lambda * scaled[2] - base[2]).powi(2))
        .sqrt();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Log-uniform times over one `λ²` dyad crossed with an annulus `0.5 ≤ |x| ≤ 2`.
pub fn default_probes(lambda: f64, times: usize, radii: usize, directions: usize) -> Vec<PhysicalSample> {
    let mut out = Vec::with_capacity(times * radii * directions);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for it in 0..times {
        let t = 0.5 * (lambda * lambda).powf(it as f64 / times as f64);
        for ir in 0..radii {
            let r = 0.5 * 4f64.powf((ir as f64 + 0.5) / radii as f64);
            for id in 0..directions {
                let z = 1.0 - 2.0 * (id as f64 + 0.5) / directions as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * id as f64;
                out.push(PhysicalSample { x: [r * rho * phi.cos(), r * rho * phi.sin(), r * z], t });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_time_is_identity() {
        let p = map_to_profile(PhysicalSample { x: [1.0, 0.0, 0.0], t: 0.5 }).unwrap();
        assert_eq!(p.y, [1.0, 0.0, 0.0]);
        assert_eq!(p.s, 0.0);
        let q = map_to_profile(PhysicalSample { x: [2.0, 0.0, 0.0], t: 2.0 }).unwrap();
        assert!((q.y[0] - 1.0).abs() < 1e-15);
        assert!((q.s - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pressure_scales_with_two_t() {
        let v = scale_scalar(4.0, Quantity::Pressure, Direction::ToProfile, 2.0).unwrap();
        assert_eq!(v, 16.0);
        assert!(map_to_profile(PhysicalSample { x: [0.0; 3], t: 0.0 }).is_err());
    }

    #[test]
    fn constant_field_defect() {
        let probes = default_probes(2.0, 3, 2, 4);
        let d = dss_defect(|_, _| [1.0, 2.0, 2.0], 2.0, &probes).unwrap();
        assert!((d - 3.0).abs() < 1e-14);
    }
}
