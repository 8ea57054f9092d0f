//! Analytic initial data: sums of rotated (−1)-homogeneous building blocks,
//! optionally modulated by a log-periodic radial factor (λ-DSS data).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// `(−x₂, x₁, 0)/|x|²`
    Swirl,
    /// `½(x₁x₃, x₂x₃, r² + x₃²)/r³`, divergence-free with a radial part.
    Poloidal,
    /// `e_axis/|x|` (not divergence-free; used by norm tests).
    Radial { axis: usize },
}

/// Radial factor `1 + depth·sin(2π log r / log λ + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPeriodic {
    pub depth: f64,
    pub phase: f64,
    pub lambda: f64,
}

impl LogPeriodic {
    pub fn angular_rate(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda.ln()
    }

    /// Factor and its radial derivative.
    pub fn factor(&self, r: f64) -> (f64, f64) {
        let w = self.angular_rate();
        let th = w * r.ln() + self.phase;
        (1.0 + self.depth * th.sin(), self.depth * th.cos() * w / r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub rotation: Mat3,
    pub shape: Shape,
    pub modulation: Option<LogPeriodic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnalyticData {
    pub terms: Vec<Term>,
}

pub fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_t_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// `R J Rᵀ`.
pub fn conjugate(r: &Mat3, j: &Mat3) -> Mat3 {
    let mut tmp = [[0.0; 3]; 3];
    for a in 0..3 {
        for c in 0..3 {
            tmp[a][c] = (0..3).map(|d| r[a][d] * j[d][c]).sum();
        }
    }
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = (0..3).map(|c| tmp[a][c] * r[b][c]).sum();
        }
    }
    out
}

/// Uniformly random rotation from a unit quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let mut q = [0.0f64; 4];
    loop {
        for c in q.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n2: f64 = q.iter().map(|c| c * c).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            for c in q.iter_mut() {
                *c /= n;
            }
            break;
        }
    }
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Building block in the body frame.
fn shape_value(shape: Shape, y: [f64; 3]) -> [f64; 3] {
    let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    if r2 == 0.0 {
        return [0.0; 3];
    }
    match shape {
        Shape::Swirl => [-y[1] / r2, y[0] / r2, 0.0],
        Shape::Poloidal => {
            let r = r2.sqrt();
            let r3 = r2 * r;
            [0.5 * y[0] * y[2] / r3, 0.5 * y[1] * y[2] / r3, 0.5 * (r2 + y[2] * y[2]) / r3]
        }
        Shape::Radial { axis } => {
            let mut v = [0.0; 3];
            v[axis] = 1.0 / r2.sqrt();
            v
        }
    }
}

impl Term {
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let body = mat_t_vec(&self.rotation, x);
        let mut v = mat_vec(&self.rotation, shape_value(self.shape, body));
        let mut f = self.weight;
        if let Some(m) = &self.modulation {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r > 0.0 {
                f *= m.factor(r).0;
            }
        }
        for c in v.iter_mut() {
            *c *= f;
        }
        v
    }

    pub fn is_divergence_free(&self) -> bool {
        match self.shape {
            Shape::Swirl => true,
            Shape::Poloidal => self.modulation.is_none(),
            Shape::Radial { .. } => false,
        }
    }
}

impl AnalyticData {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn single(weight: f64, shape: Shape) -> Self {
        Self { terms: vec![Term { weight, rotation: IDENTITY, shape, modulation: None }] }
    }

    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for t in &self.terms {
            let w = t.eval(x);
            for c in 0..3 {
                v[c] += w[c];
            }
        }
        v
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for t in out.terms.iter_mut() {
            t.weight *= factor;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }

    pub fn is_divergence_free(&self) -> bool {
        self.terms.iter().all(Term::is_divergence_free)
    }

    /// `e^s v0(e^s x)`: homogeneous terms are unchanged, modulations shift phase.
    pub fn rescaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for t in out.terms.iter_mut() {
            if let Some(m) = t.modulation.as_mut() {
                m.phase += m.angular_rate() * s;
            }
        }
        out
    }

    /// True when `λ v0(λx) = v0(x)` holds exactly.
    pub fn is_dss(&self, lambda: f64) -> bool {
        self.terms.iter().all(|t| match &t.modulation {
            None => true,
            Some(m) => {
                let ratio = lambda.ln() / m.lambda.ln();
                (ratio - ratio.round()).abs() < 1e-12 && ratio.round() >= 1.0
            }
        })
    }

    pub fn is_homogeneous(&self) -> bool {
        self.terms.iter().all(|t| t.modulation.is_none() || t.modulation.map(|m| m.depth == 0.0).unwrap_or(true))
    }

    /// Pointwise bound `sup |x||v0(x)|` implied by the term weights.
    pub fn pointwise_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight.abs() * t.modulation.map(|m| 1.0 + m.depth.abs()).unwrap_or(1.0))
            .sum()
    }
}

/// Canonical (−1)-homogeneous divergence-free data with `|v0(x)| ≤ c0/|x|`.
///
/// Seed 0 is the pure swirl; other seeds rotate a swirl/poloidal mixture.
pub fn homogeneous_data(seed: u64, c0: f64) -> AnalyticData {
    if seed == 0 {
        return AnalyticData::single(c0, Shape::Swirl);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = random_rotation(&mut rng);
    let a: f64 = rng.gen_range(0.3..0.8);
    let b = 1.0 - a;
    AnalyticData {
        terms: vec![
            Term { weight: c0 * a, rotation, shape: Shape::Swirl, modulation: None },
            Term { weight: c0 * b, rotation, shape: Shape::Poloidal, modulation: None },
        ],
    }
}

/// Canonical λ-DSS data: homogeneous data whose swirl parts carry a
/// log-periodic factor of the given depth. The bound becomes `c0/|x|`.
pub fn dss_data(seed: u64, c0: f64, lambda: f64, depth: f64) -> Result<AnalyticData> {
    if !(lambda > 1.0) {
        return argument(format!("scale factor must exceed 1, got {lambda}"));
    }
    if !(0.0..1.0).contains(&depth) {
        return argument(format!("modulation depth must lie in [0, 1), got {depth}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let phase = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let mut data = homogeneous_data(seed, c0);
    for t in data.terms.iter_mut() {
        if t.shape == Shape::Swirl {
            t.modulation = Some(LogPeriodic { depth, phase, lambda });
        }
    }
    let bound = data.pointwise_bound();
    Ok(if bound > 0.0 { data.scaled(c0 / bound) } else { data })
}

/// A profile given on the fundamental annulus `inner ≤ |x| < outer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProfile {
    pub data: AnalyticData,
    pub inner: f64,
    pub outer: f64,
}

/// Discretely self-similar extension `v(x) = λ^k v_p(λ^k x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DssExtension {
    pub profile: AnnulusProfile,
    pub lambda: f64,
}

impl DssExtension {
    pub fn new(profile: AnnulusProfile, lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) {
            return argument(format!("scale factor must exceed 1, got {lambda}"));
        }
        if !(profile.inner > 0.0) || profile.outer < profile.inner * lambda * (1.0 - 1e-12) {
            return argument(format!(
                "profile on [{}, {}) does not cover a full annulus for λ = {lambda}",
                profile.inner, profile.outer
            ));
        }
        Ok(Self { profile, lambda })
    }

    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 {
            return [0.0; 3];
        }
        let k = -((r / self.profile.inner).ln() / self.lambda.ln()).floor();
        let f = self.lambda.powf(k);
        let v = self.profile.data.eval([f * x[0], f * x[1], f * x[2]]);
        [f * v[0], f * v[1], f * v[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn div(f: impl Fn([f64; 3]) -> [f64; 3], x: [f64; 3]) -> f64 {
        let h = 1e-5;
        (0..3)
            .map(|a| {
                let mut p = x;
                let mut m = x;
                p[a] += h;
                m[a] -= h;
                (f(p)[a] - f(m)[a]) / (2.0 * h)
            })
            .sum()
    }

    #[test]
    fn canonical_fields_are_solenoidal() {
        for seed in 0..4 {
            let d = homogeneous_data(seed, 1.0);
            let dss = dss_data(seed, 1.0, 2.0, 0.3).unwrap();
            for x in [[0.3, -0.7, 0.5], [1.2, 0.4, -0.9], [-2.0, 1.0, 0.1]] {
                assert!(div(|p| d.eval(p), x).abs() < 1e-7);
                assert!(div(|p| dss.eval(p), x).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn pointwise_bound_holds() {
        let d = dss_data(3, 0.7, 2.0, 0.4).unwrap();
        for i in 0..200 {
            let t = i as f64 * 0.37;
            let x = [t.sin() * (1.0 + t), (2.0 * t).cos(), (0.5 * t).sin() * 3.0];
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let v = d.eval(x);
            assert!((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() * r <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn dss_data_is_dss() {
        let d = dss_data(1, 1.0, 2.0, 0.5).unwrap();
        assert!(d.is_dss(2.0) && d.is_dss(4.0) && !d.is_dss(3.0));
        let x = [0.3, 0.2, -0.4];
        let a = d.eval(x);
        let b = d.eval([2.0 * x[0], 2.0 * x[1], 2.0 * x[2]]);
        for c in 0..3 {
            assert!((a[c] - 2.0 * b[c]).abs() < 1e-14);
        }
    }
}
