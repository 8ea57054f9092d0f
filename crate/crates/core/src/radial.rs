//! Exact Gaussian smoothing of the analytic data via the Funk–Hecke formula.
//!
//! For `g(x) = H_l(x) a(|x|)` with `H_l` a harmonic polynomial of degree `l`,
//! unit-variance Gaussian smoothing gives `H_l(y) b(r)` where
//! `b(r) = √(2/π) ∫ ρ^{2+2l} a(ρ) e^{-(r-ρ)²/2} ĵ_l(rρ) dρ`,
//! `ĵ_l(κ) = e^{-κ} i_l(κ) / κ^l`.

use crate::data::{conjugate, mat_t_vec, mat_vec, AnalyticData, LogPeriodic, Mat3, Shape};
use crate::quadrature::Rule;

/// `e^{-κ} i_l(κ) / κ^l` for `l ≤ 4`, stable for all `κ ≥ 0`.
pub fn scaled_bessel(l: usize, kappa: f64) -> f64 {
    if kappa < 4.0 {
        let x = 0.5 * kappa * kappa;
        let mut dfact = 1.0; // (2l+1)!!
        for m in 1..=l {
            dfact *= (2 * m + 1) as f64;
        }
        let mut term = 1.0 / dfact;
        let mut sum = term;
        for n in 1..60 {
            term *= x / (n as f64 * (2 * l + 2 * n + 1) as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return (-kappa).exp() * sum;
    }
    let e2 = (-2.0 * kappa).exp();
    let i0 = (1.0 - e2) / (2.0 * kappa);
    if l == 0 {
        return i0;
    }
    let i1 = (kappa * (1.0 + e2) - (1.0 - e2)) / (2.0 * kappa * kappa);
    let (mut prev, mut cur) = (i0, i1);
    for m in 1..l {
        let next = prev - (2 * m + 1) as f64 * cur / kappa;
        prev = cur;
        cur = next;
    }
    cur / kappa.powi(l as i32)
}

/// Radial part `a(ρ)` of one harmonic component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radial {
    Power(i32),
    /// `ρ^p sin(w log ρ)`
    LogSin { power: i32, rate: f64 },
    /// `ρ^p cos(w log ρ)`
    LogCos { power: i32, rate: f64 },
}

impl Radial {
    /// `(a(ρ), a'(ρ)/ρ)`
    pub fn raw(&self, rho: f64) -> (f64, f64) {
        match *self {
            Radial::Power(p) => {
                let a = rho.powi(p);
                (a, p as f64 * a / (rho * rho))
            }
            Radial::LogSin { power, rate } => {
                let base = rho.powi(power);
                let th = rate * rho.ln();
                let a = base * th.sin();
                let d = base * (power as f64 * th.sin() + rate * th.cos()) / rho;
                (a, d / rho)
            }
            Radial::LogCos { power, rate } => {
                let base = rho.powi(power);
                let th = rate * rho.ln();
                let a = base * th.cos();
                let d = base * (power as f64 * th.cos() - rate * th.sin()) / rho;
                (a, d / rho)
            }
        }
    }

    fn value(&self, rho: f64) -> f64 {
        self.raw(rho).0
    }
}

/// Quadrature in `ρ` suited to a smoothing window centred at `r`.
fn window_rule(r: f64) -> Rule {
    let width = 10.0;
    let lo = (r - width).max(0.0);
    let hi = r + width;
    let mut rule = Rule::empty();
    let mut start = lo;
    if lo < 1.0 {
        // geometric panels resolve ρ^p·(log-oscillation) near the origin
        rule.extend(Rule::geometric_to_zero(1.0, 2.0, 40, 8));
        start = 1.0;
    }
    let panels = (hi - start).ceil() as usize;
    rule.extend(Rule::composite(start, hi, panels.max(1), 10));
    rule
}

/// `(b(r), b'(r)/r)` by direct quadrature.
pub fn smooth(l: usize, radial: Radial, r: f64) -> (f64, f64) {
    let rule = window_rule(r);
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let mut b = 0.0;
    let mut q = 0.0;
    for (&rho, &w) in rule.nodes.iter().zip(&rule.weights) {
        let g = (-(r - rho) * (r - rho) / 2.0).exp();
        if g == 0.0 {
            continue;
        }
        let base = w * g * rho.powi(2 + 2 * l as i32) * radial.value(rho);
        let k = r * rho;
        let jl = scaled_bessel(l, k);
        b += base * jl;
        q += base * (rho * rho * scaled_bessel(l + 1, k) - jl);
    }
    (c * b, c * q)
}

/// Harmonic components of one building block.
fn components(shape: Shape, modulation: Option<LogPeriodic>) -> Vec<(usize, Radial)> {
    let rate = modulation.map(|m| m.angular_rate()).unwrap_or(0.0);
    let modulated = |l: usize, p: i32| -> Vec<(usize, Radial)> {
        let mut v = vec![(l, Radial::Power(p))];
        if modulation.is_some() {
            v.push((l, Radial::LogSin { power: p, rate }));
            v.push((l, Radial::LogCos { power: p, rate }));
        }
        v
    };
    match shape {
        Shape::Swirl => modulated(1, -2),
        Shape::Radial { .. } => modulated(0, -1),
        Shape::Poloidal => vec![(0, Radial::Power(-1)), (2, Radial::Power(-3))],
    }
}

/// Uniform table of `(b, b'/r)` with cubic (Catmull-Rom) interpolation.
#[derive(Debug, Clone)]
struct Table {
    dr: f64,
    b: Vec<f64>,
    q: Vec<f64>,
}

impl Table {
    fn build(l: usize, radial: Radial, dr: f64, r_max: f64) -> Self {
        let n = (r_max / dr).ceil() as usize + 3;
        let mut b = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for i in 0..n {
            let (bi, qi) = smooth(l, radial, i as f64 * dr);
            b.push(bi);
            q.push(qi);
        }
        Self { dr, b, q }
    }

    fn r_max(&self) -> f64 {
        (self.b.len() - 3) as f64 * self.dr
    }

    fn interp(v: &[f64], x: f64) -> f64 {
        let i = x.floor() as usize;
        let t = x - i as f64;
        let p1 = v[i];
        let p2 = v[i + 1];
        // even symmetry about r = 0 (b and b'/r are even functions of r)
        let p0 = if i == 0 { v[1] } else { v[i - 1] };
        let p3 = v[i + 2];
        p1 + 0.5
            * t
            * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        let x = r / self.dr;
        (Self::interp(&self.b, x), Self::interp(&self.q, x))
    }
}

/// How radial profiles are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// Direct quadrature at every radius.
    Exact,
    /// Interpolated tables (raw data beyond the table range).
    Tabulated,
    /// The unsmoothed data itself.
    Raw,
}

#[derive(Debug, Clone)]
struct SmoothedTerm {
    weight: f64,
    rotation: Mat3,
    shape: Shape,
    modulation: Option<LogPeriodic>,
    components: Vec<(usize, Radial)>,
    tables: Vec<Table>,
}

/// Heat-smoothed analytic data `U0(y, s) = (G * e^s v0(e^s ·))(y)`.
#[derive(Debug, Clone)]
pub struct SmoothedData {
    data: AnalyticData,
    terms: Vec<SmoothedTerm>,
}

/// Value and Jacobian `J[a][b] = ∂_a U_b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: [f64; 3],
    pub jacobian: Mat3,
}

impl Jet {
    pub fn divergence(&self) -> f64 {
        self.jacobian[0][0] + self.jacobian[1][1] + self.jacobian[2][2]
    }

    fn add_scaled(&mut self, other: &Jet, w: f64) {
        for a in 0..3 {
            self.value[a] += w * other.value[a];
            for b in 0..3 {
                self.jacobian[a][b] += w * other.jacobian[a][b];
            }
        }
    }
}

/// Profile values `(b, b'/r)` per component at one radius.
pub type RadialValues = Vec<Vec<(f64, f64)>>;

pub const TABLE_STEP: f64 = 0.05;
pub const TABLE_RANGE: f64 = 200.0;

impl SmoothedData {
    /// Builds without tables (exact/raw evaluation only).
    pub fn new(data: &AnalyticData) -> Self {
        let terms = data
            .terms
            .iter()
            .map(|t| SmoothedTerm {
                weight: t.weight,
                rotation: t.rotation,
                shape: t.shape,
                modulation: t.modulation,
                components: components(t.shape, t.modulation),
                tables: Vec::new(),
            })
            .collect();
        Self { data: data.clone(), terms }
    }

    /// Builds interpolation tables for pointwise evaluation.
    pub fn with_tables(data: &AnalyticData) -> Self {
        let mut out = Self::new(data);
        for t in out.terms.iter_mut() {
            t.tables = t.components.iter().map(|&(l, rad)| Table::build(l, rad, TABLE_STEP, TABLE_RANGE)).collect();
        }
        out
    }

    pub fn data(&self) -> &AnalyticData {
        &self.data
    }

    pub fn has_tables(&self) -> bool {
        self.terms.iter().all(|t| !t.tables.is_empty() || t.components.is_empty())
    }

    fn term_values(t: &SmoothedTerm, r: f64, mode: Evaluation, out: &mut [(f64, f64); 3]) {
        for (ci, &(l, rad)) in t.components.iter().enumerate() {
            out[ci] = match mode {
                Evaluation::Exact => smooth(l, rad, r),
                Evaluation::Raw => rad.raw(r),
                Evaluation::Tabulated => {
                    if t.tables.is_empty() {
                        smooth(l, rad, r)
                    } else if r >= t.tables[ci].r_max() {
                        rad.raw(r)
                    } else {
                        t.tables[ci].eval(r)
                    }
                }
            };
        }
    }

    /// Radial profile values of every term at radius `r`.
    pub fn radial_values(&self, r: f64, mode: Evaluation) -> RadialValues {
        self.terms
            .iter()
            .map(|t| {
                let mut buf = [(0.0, 0.0); 3];
                Self::term_values(t, r, mode, &mut buf);
                buf[..t.components.len()].to_vec()
            })
            .collect()
    }

    fn term_jet(t: &SmoothedTerm, y: [f64; 3], s: f64, vals: &[(f64, f64)]) -> Jet {
        // combine modulation harmonics at this s
        let (b, q, b2, q2) = match t.shape {
            Shape::Poloidal => (vals[0].0, vals[0].1, vals[1].0, vals[1].1),
            _ => {
                let (mut b, mut q) = vals[0];
                if let Some(m) = t.modulation {
                    let phase = m.phase + m.angular_rate() * s;
                    let (cs, sn) = (phase.cos(), phase.sin());
                    // sin(θ + φ) = sin θ cos φ + cos θ sin φ
                    b += m.depth * (cs * vals[1].0 + sn * vals[2].0);
                    q += m.depth * (cs * vals[1].1 + sn * vals[2].1);
                }
                (b, q, 0.0, 0.0)
            }
        };
        let body = mat_t_vec(&t.rotation, y);
        let local = body_jet(t.shape, body, b, q, b2, q2);
        Jet { value: mat_vec(&t.rotation, local.value), jacobian: conjugate(&t.rotation, &local.jacobian) }
    }

    /// Assembles `U0(y, s)` from precomputed radial values at `|y|`.
    pub fn assemble(&self, y: [f64; 3], s: f64, values: &RadialValues) -> Jet {
        let mut jet = Jet::default();
        for (t, vals) in self.terms.iter().zip(values) {
            jet.add_scaled(&Self::term_jet(t, y, s, vals), t.weight);
        }
        jet
    }

    pub fn eval(&self, y: [f64; 3], s: f64, mode: Evaluation) -> Jet {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if mode == Evaluation::Raw && r == 0.0 {
            return Jet::default();
        }
        let mut jet = Jet::default();
        let mut buf = [(0.0, 0.0); 3];
        for t in &self.terms {
            Self::term_values(t, r, mode, &mut buf);
            jet.add_scaled(&Self::term_jet(t, y, s, &buf[..t.components.len()]), t.weight);
        }
        jet
    }
}

fn body_jet(shape: Shape, y: [f64; 3], b: f64, q: f64, b2: f64, q2: f64) -> Jet {
    let mut j = Jet::default();
    match shape {
        Shape::Swirl => {
            j.value = [-y[1] * b, y[0] * b, 0.0];
            for a in 0..3 {
                j.jacobian[a][0] = -y[1] * y[a] * q;
                j.jacobian[a][1] = y[0] * y[a] * q;
            }
            j.jacobian[1][0] -= b;
            j.jacobian[0][1] += b;
        }
        Shape::Radial { axis } => {
            j.value[axis] = b;
            for a in 0..3 {
                j.jacobian[a][axis] = y[a] * q;
            }
        }
        Shape::Poloidal => {
            // U_j = ½[(4/3) δ_j3 B0 + Y_j B2],  Y_j = y3 y_j − δ_j3 r²/3
            let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
            let (b0, q0) = (b, q);
            let yv = [y[2] * y[0], y[2] * y[1], y[2] * y[2] - r2 / 3.0];
            for c in 0..3 {
                let d = if c == 2 { 1.0 } else { 0.0 };
                j.value[c] = 0.5 * ((4.0 / 3.0) * d * b0 + yv[c] * b2);
            }
            for a in 0..3 {
                for c in 0..3 {
                    let dc3 = if c == 2 { 1.0 } else { 0.0 };
                    let da3 = if a == 2 { 1.0 } else { 0.0 };
                    let dac = if a == c { 1.0 } else { 0.0 };
                    let dy = da3 * y[c] + y[2] * dac - dc3 * (2.0 / 3.0) * y[a];
                    j.jacobian[a][c] = 0.5 * ((4.0 / 3.0) * dc3 * y[a] * q0 + dy * b2 + yv[c] * y[a] * q2);
                }
            }
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_branches_agree() {
        for l in 0..4 {
            let lo = scaled_bessel(l, 4.0 - 1e-12);
            let hi = scaled_bessel(l, 4.0);
            assert!((lo - hi).abs() < 1e-12 * hi.abs().max(1e-300), "l={l}: {lo} vs {hi}");
        }
        // i_0(κ) = sinh κ / κ
        let k: f64 = 2.5;
        assert!((scaled_bessel(0, k) - (-k).exp() * k.sinh() / k).abs() < 1e-15);
    }

    #[test]
    fn smoothing_preserves_constants() {
        let (b, q) = smooth(0, Radial::Power(0), 1.7);
        assert!((b - 1.0).abs() < 1e-12);
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn smoothing_quadratic_adds_trace() {
        // G * |x|² = |y|² + 3
        for &r in &[0.0, 0.4, 2.0, 9.0] {
            let (b, q) = smooth(0, Radial::Power(2), r);
            assert!((b - (r * r + 3.0)).abs() < 1e-10);
            assert!((q - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothed_fields_are_solenoidal() {
        let data = crate::data::dss_data(2, 1.0, 2.0, 0.4).unwrap();
        let sm = SmoothedData::new(&data);
        for y in [[0.2, 0.1, -0.3], [1.5, -0.7, 0.9], [3.0, 2.0, -1.0]] {
            let jet = sm.eval(y, 0.3, Evaluation::Exact);
            assert!(jet.divergence().abs() < 1e-11, "{}", jet.divergence());
        }
    }
}
