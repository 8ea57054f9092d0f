//! Whole-space norms of sampled fields: midpoint sums over grid cells plus
//! ray quadrature (via the cube-face parameterization) of the analytic
//! descriptor inside a small origin cube and outside the computational cube.

use crate::data::{homogeneous_data, AnnulusProfile, DssExtension};
use crate::error::Result;
use crate::field::{PointEval, TailDescriptor, VectorField};
use crate::grid::Grid;
use crate::quadrature::{CubeFaces, Rule};
use crate::spectral::Spectral;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NormSettings {
    /// Origin cube half-width in cells (`(m + ½) h`).
    pub excision_cells: usize,
    pub face_panels: usize,
    pub face_order: usize,
    /// Samples per octave along rays for distribution functions.
    pub ray_samples_per_octave: usize,
    pub ray_octaves: usize,
    pub levels: usize,
}

impl Default for NormSettings {
    fn default() -> Self {
        Self { excision_cells: 3, face_panels: 2, face_order: 8, ray_samples_per_octave: 8, ray_octaves: 24, levels: 400 }
    }
}

/// A norm value together with where it came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormParts {
    pub grid: f64,
    pub origin_cube: f64,
    pub exterior: f64,
    /// Set when the exterior integral could not be closed (non-decaying data).
    pub unbounded: bool,
}

impl NormParts {
    pub fn total(&self) -> f64 {
        if self.unbounded {
            f64::INFINITY
        } else {
            self.grid + self.origin_cube + self.exterior
        }
    }
}

struct Regions {
    h: f64,
    nodes: Vec<usize>,
    inner: Option<CubeFaces>,
    outer: Option<CubeFaces>,
    eval: Option<PointEval>,
}

impl Regions {
    fn new(f: &VectorField, st: &NormSettings) -> Self {
        Self::build(f.grid, f.tail.as_ref(), st)
    }

    fn build(g: Grid, tail: Option<&TailDescriptor>, st: &NormSettings) -> Self {
        let h = g.spacing();
        match tail {
            None => Self { h, nodes: (0..g.len()).collect(), inner: None, outer: None, eval: None },
            Some(tail) => {
                let singular = tail.is_singular();
                let m = st.excision_cells as i64;
                let c = (g.n / 2) as i64;
                let nodes = (0..g.len())
                    .filter(|&idx| {
                        if !g.in_inner_cube(idx) {
                            return false;
                        }
                        if !singular {
                            return true;
                        }
                        let (i, j, k) = g.unravel(idx);
                        let near = |a: usize| (a as i64 - c).abs() <= m;
                        !(near(i) && near(j) && near(k))
                    })
                    .collect();
                let inner = singular.then(|| CubeFaces::new((m as f64 + 0.5) * h, st.face_panels, st.face_order));
                let outer = Some(CubeFaces::new(g.inner_half_width(), st.face_panels * 2, st.face_order));
                Self { h, nodes, inner, outer, eval: Some(tail.evaluator()) }
            }
        }
    }
}

fn inner_rule() -> Rule {
    Rule::geometric_to_zero(1.0, 2.0, 40, 8)
}

fn outer_rule() -> Rule {
    Rule::geometric(1.0, 2.0, 100, 8)
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Grid nodes that carry sampled values in the split quadrature.
pub fn grid_nodes(grid: Grid, tail: Option<&TailDescriptor>, st: &NormSettings) -> Vec<usize> {
    Regions::build(grid, tail, st).nodes
}

/// `∫ g(x, f(x)) dx` split by region; `g` must be nonnegative.
pub fn integrate_parts<G>(f: &VectorField, st: &NormSettings, g: G) -> NormParts
where
    G: Fn([f64; 3], [f64; 3]) -> f64,
{
    let reg = Regions::new(f, st);
    let grid = f.grid;
    let mut acc = 0.0;
    for &idx in &reg.nodes {
        acc += g(grid.point(idx), f.at(idx));
    }
    let mut parts = analytic_regions(&reg, &g);
    parts.grid = acc * grid.cell_volume();
    parts
}

/// The origin-cube and exterior parts only (grid part zero).
pub fn analytic_parts<G>(grid: Grid, tail: &TailDescriptor, st: &NormSettings, g: G) -> NormParts
where
    G: Fn([f64; 3], [f64; 3]) -> f64,
{
    analytic_regions(&Regions::build(grid, Some(tail), st), &g)
}

fn analytic_regions<G>(reg: &Regions, g: &G) -> NormParts
where
    G: Fn([f64; 3], [f64; 3]) -> f64,
{
    let mut parts = NormParts::default();
    if let (Some(eval), Some(faces)) = (&reg.eval, &reg.inner) {
        let rule = inner_rule();
        parts.origin_cube = faces.integrate_inside(&rule, |x| g(x, eval(x)));
    }
    if let (Some(eval), Some(faces)) = (&reg.eval, &reg.outer) {
        let rule = outer_rule();
        let t_last = *rule.nodes.last().unwrap();
        // exponent span of ten octaves averages out log-periodic modulation
        let t_prev = t_last / 1024.0;
        let mut total = 0.0;
        for (p, &w) in faces.points.iter().zip(&faces.weights) {
            let at = |t: f64| g([t * p[0], t * p[1], t * p[2]], eval([t * p[0], t * p[1], t * p[2]]));
            let ray = rule.integrate(|t| t * t * at(t));
            // close the ray with the local power law F ~ t^{-k}
            let (f1, f2) = (at(t_prev), at(t_last));
            let mut rem = 0.0;
            if f2 > 0.0 && f1 > 0.0 {
                let k = -(f2 / f1).ln() / (t_last / t_prev).ln();
                let scale = t_last.powi(3) * f2;
                if k > 3.0 + 1e-9 {
                    rem = scale / (k - 3.0);
                } else if scale > 1e-9 * ray.abs().max(f64::MIN_POSITIVE) {
                    parts.unbounded = true;
                }
            }
            total += w * (ray + rem);
        }
        parts.exterior = total;
    }
    parts
}

pub fn lq_norm(f: &VectorField, q: f64, st: &NormSettings) -> (f64, NormParts) {
    let parts = integrate_parts(f, st, |_, v| norm3(v).powf(q));
    (parts.total().powf(1.0 / q), parts)
}

/// `(∫ |f|² / (1 + |x|)³ dx)^{1/2}`.
pub fn weighted_l2_norm(f: &VectorField, st: &NormSettings) -> (f64, NormParts) {
    let parts = integrate_parts(f, st, |x, v| {
        let r = norm3(x);
        let a = norm3(v);
        a * a / (1.0 + r).powi(3)
    });
    (parts.total().sqrt(), parts)
}

/// Ray interval `{t ≥ 0 : |t p − c| < r}`.
fn ray_ball(p: [f64; 3], c: [f64; 3], r: f64) -> Option<(f64, f64)> {
    let pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    let pc = p[0] * c[0] + p[1] * c[1] + p[2] * c[2];
    let cc = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
    let disc = pc * pc - pp * (cc - r * r);
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((pc - sq) / pp, (pc + sq) / pp))
}

/// `∫_{B_r(c)} |f|²` with a smeared ball indicator on grid cells and exact
/// ray intervals in the analytic regions.
pub fn ball_energy(f: &VectorField, reg_st: &NormSettings, c: [f64; 3], r: f64) -> f64 {
    let reg = Regions::new(f, reg_st);
    ball_energy_in(f, &reg, c, r)
}

fn ball_energy_in(f: &VectorField, reg: &Regions, c: [f64; 3], r: f64) -> f64 {
    let grid = f.grid;
    let h = reg.h;
    let mut acc = 0.0;
    for &idx in &reg.nodes {
        let x = grid.point(idx);
        let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        let dist = norm3(d);
        if dist > r + h {
            continue;
        }
        let l1 = if dist > 0.0 { (d[0].abs() + d[1].abs() + d[2].abs()) / dist } else { 1.0 };
        let w = (0.5 + (r - dist) / (h * l1)).clamp(0.0, 1.0);
        if w > 0.0 {
            let v = f.at(idx);
            acc += w * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
    }
    acc *= grid.cell_volume();
    let Some(eval) = &reg.eval else { return acc };
    let seg = |faces: &CubeFaces, lo_lim: f64, hi_lim: f64| -> f64 {
        let mut total = 0.0;
        for (p, &w) in faces.points.iter().zip(&faces.weights) {
            let Some((t0, t1)) = ray_ball(*p, c, r) else { continue };
            let lo = t0.max(lo_lim);
            let hi = t1.min(hi_lim);
            if hi <= lo {
                continue;
            }
            let rule = if lo == 0.0 { Rule::geometric_to_zero(hi, 2.0, 30, 8) } else { Rule::composite(lo, hi, 4, 8) };
            total += w * rule.integrate(|t| {
                let v = eval([t * p[0], t * p[1], t * p[2]]);
                t * t * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            });
        }
        total
    };
    if let Some(faces) = &reg.inner {
        acc += seg(faces, 0.0, 1.0);
    }
    if let Some(faces) = &reg.outer {
        acc += seg(faces, 1.0, f64::INFINITY);
    }
    acc
}

/// `‖f‖²_{L²(B_M)}` about the origin.
pub fn l2_ball_squared(f: &VectorField, st: &NormSettings, m: f64) -> f64 {
    ball_energy(f, st, [0.0; 3], m)
}

/// Lower bound of `sup_{c, r} (r^{-1} ∫_{B_r(c)} |f|²)^{1/2}` over a centre
/// lattice of spacing `L/2` and dyadic radii `h, 2h, … ≤ L`.
pub fn morrey_norm(f: &VectorField, st: &NormSettings) -> f64 {
    let reg = Regions::new(f, st);
    let g = f.grid;
    let step = 0.5 * g.inner_half_width();
    let mut best: f64 = 0.0;
    let mut r = g.spacing();
    while r <= g.half_width * (1.0 + 1e-12) {
        for a in -1..=1 {
            for b in -1..=1 {
                for cc in -1..=1 {
                    let c = [a as f64 * step, b as f64 * step, cc as f64 * step];
                    let e = ball_energy_in(f, &reg, c, r);
                    best = best.max((e / r).sqrt());
                }
            }
        }
        r *= 2.0;
    }
    best
}

/// Measure of `{t ∈ ray : φ(t) > α}` weighted by `t²`, with `φ` log-log
/// interpolated between samples (exact for power laws).
fn ray_measure(ts: &[f64], phi: &[f64], alpha: f64) -> f64 {
    let mut m = 0.0;
    for k in 0..ts.len() - 1 {
        let (ta, tb) = (ts[k], ts[k + 1]);
        let (fa, fb) = (phi[k], phi[k + 1]);
        let above_a = fa > alpha;
        let above_b = fb > alpha;
        let (lo, hi) = match (above_a, above_b) {
            (true, true) => (ta, tb),
            (false, false) => continue,
            _ => {
                let tc = if fa > 0.0 && fb > 0.0 {
                    let s = (alpha.ln() - fa.ln()) / (fb.ln() - fa.ln());
                    (ta.ln() + s * (tb.ln() - ta.ln())).exp()
                } else {
                    ta + (alpha - fa) / (fb - fa) * (tb - ta)
                };
                if above_a {
                    (ta, tc)
                } else {
                    (tc, tb)
                }
            }
        };
        m += (hi.powi(3) - lo.powi(3)) / 3.0;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeakL3Report {
    pub value: f64,
    pub argmax_level: f64,
    /// Set when the field neither decays inside the grid nor has a descriptor.
    pub boundary_warning: bool,
}

/// `sup_α α μ{|f| > α}^{1/3}` from a smeared distribution function (cells
/// spread linearly over their limited slope).
pub fn weak_l3_norm(f: &VectorField, st: &NormSettings) -> WeakL3Report {
    let reg = Regions::new(f, st);
    let g = f.grid;
    let h = g.spacing();
    let mag = f.magnitude();
    let n = g.n;
    // per-node value and smear width h‖∇|f|‖₁
    let mut vals = Vec::with_capacity(reg.nodes.len());
    let mut widths = Vec::with_capacity(reg.nodes.len());
    let mut boundary_max: f64 = 0.0;
    for &idx in &reg.nodes {
        let (i, j, k) = g.unravel(idx);
        let mut l1 = 0.0;
        let ijk = [i, j, k];
        for a in 0..3 {
            if ijk[a] == 0 || ijk[a] == n - 1 {
                continue;
            }
            let mut p = ijk;
            let mut m = ijk;
            p[a] += 1;
            m[a] -= 1;
            // minmod slope: jumps get no smear
            let fwd = mag[g.index(p[0], p[1], p[2])] - mag[idx];
            let bwd = mag[idx] - mag[g.index(m[0], m[1], m[2])];
            if fwd * bwd > 0.0 {
                l1 += fwd.abs().min(bwd.abs()) / h;
            }
        }
        vals.push(mag[idx]);
        widths.push(h * l1);
        if i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1 {
            boundary_max = boundary_max.max(mag[idx]);
        }
    }
    let field_max = vals.iter().cloned().fold(0.0, f64::max);
    // ray samples in the analytic regions
    let mut rays: Vec<(f64, Vec<f64>, Vec<f64>, bool)> = Vec::new();
    let mut ray_max: f64 = 0.0;
    if let Some(eval) = &reg.eval {
        let spo = st.ray_samples_per_octave;
        let count = spo * st.ray_octaves;
        if let Some(faces) = &reg.inner {
            let ts: Vec<f64> = (0..=count).rev().map(|kk| 2f64.powf(-(kk as f64) / spo as f64)).collect();
            for (p, &w) in faces.points.iter().zip(&faces.weights) {
                let phi: Vec<f64> = ts.iter().map(|&t| norm3(eval([t * p[0], t * p[1], t * p[2]]))).collect();
                ray_max = ray_max.max(phi[0]);
                rays.push((w, ts.clone(), phi, true));
            }
        }
        if let Some(faces) = &reg.outer {
            let ts: Vec<f64> = (0..=count).map(|kk| 2f64.powf(kk as f64 / spo as f64)).collect();
            for (p, &w) in faces.points.iter().zip(&faces.weights) {
                let phi: Vec<f64> = ts.iter().map(|&t| norm3(eval([t * p[0], t * p[1], t * p[2]]))).collect();
                ray_max = ray_max.max(phi[0]);
                rays.push((w, ts.clone(), phi, false));
            }
        }
    }
    let top = field_max.max(ray_max);
    if top == 0.0 {
        return WeakL3Report { value: 0.0, argmax_level: 0.0, boundary_warning: false };
    }
    let value_at = |alpha: f64| -> f64 {
        let mut mu = 0.0;
        for (v, w) in vals.iter().zip(&widths) {
            let frac = if *w > 0.0 { (0.5 + (v - alpha) / w).clamp(0.0, 1.0) } else if *v > alpha { 1.0 } else { 0.0 };
            mu += frac;
        }
        mu *= g.cell_volume();
        for (w, ts, phi, inner) in &rays {
            let mut m = ray_measure(ts, phi, alpha);
            if *inner {
                if phi[0] > alpha {
                    m += ts[0].powi(3) / 3.0;
                }
            } else {
                let l = phi.len();
                if phi[l - 1] > alpha {
                    let k = -(phi[l - 1] / phi[l - 2]).ln() / (ts[l - 1] / ts[l - 2]).ln();
                    if k > 0.0 {
                        let tc = ts[l - 1] * (phi[l - 1] / alpha).powf(1.0 / k);
                        m += (tc.powi(3) - ts[l - 1].powi(3)) / 3.0;
                    } else {
                        m = f64::INFINITY;
                    }
                }
            }
            mu += w * m;
        }
        alpha * mu.cbrt()
    };
    // coarse log-spaced scan, the level just below the maximum, then a
    // local refinement around the best coarse level
    let bottom = top * 1e-6;
    let levels = st.levels.max(2);
    let ratio = (top / bottom).powf(1.0 / (levels - 1) as f64);
    let mut best = (0.0, 0.0);
    let consider = |alpha: f64, best: &mut (f64, f64)| {
        let val = value_at(alpha);
        if val > best.0 {
            *best = (val, alpha);
        }
    };
    for li in 0..levels {
        consider(bottom * ratio.powi(li as i32), &mut best);
    }
    consider(top * (1.0 - 1e-12), &mut best);
    let centre = best.1;
    if centre > 0.0 {
        for li in 0..=40 {
            consider(centre * ratio.powf(li as f64 / 20.0 - 1.0), &mut best);
        }
    }
    let boundary_warning = reg.eval.is_none() && boundary_max > 1e-3 * field_max;
    WeakL3Report { value: best.0, argmax_level: best.1, boundary_warning }
}

/// `‖f‖_{H^{-1}}` surrogate `‖(1+|ξ|²)^{-1/2} f̂‖` on the zero-padded grid.
pub fn h_minus1_norm(comps: &[Vec<f64>; 3], grid: &Grid, padded: &Spectral) -> f64 {
    let pads: Vec<Vec<f64>> = comps.iter().map(|c| grid.embed_in_padded(c)).collect();
    let refs: Vec<&[f64]> = pads.iter().map(|v| v.as_slice()).collect();
    padded.sobolev_norm(&refs, -0.5)
}

/// Embedding ratios recorded for one field.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingReport {
    pub weak_l3: f64,
    pub morrey: f64,
    pub weighted_l2: f64,
    pub ball_radius: f64,
    pub l2_ball_squared: f64,
    /// `morrey² / (1 + weak_l3³)`
    pub morrey_constant: f64,
    /// `weighted_l2² / morrey²`
    pub weighted_constant: f64,
    /// `‖f‖²_{L²(B_M)} / ((1+M)³ ‖f‖²_{L²_{-3/2}})`, at most 1.
    pub ball_ratio: f64,
}

pub fn embedding_report(f: &VectorField, st: &NormSettings, ball_radius: f64) -> EmbeddingReport {
    let weak_l3 = weak_l3_norm(f, st).value;
    let morrey = morrey_norm(f, st);
    let weighted_l2 = weighted_l2_norm(f, st).0;
    let l2b = l2_ball_squared(f, st, ball_radius);
    let safe = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    EmbeddingReport {
        weak_l3,
        morrey,
        weighted_l2,
        ball_radius,
        l2_ball_squared: l2b,
        morrey_constant: safe(morrey * morrey, 1.0 + weak_l3.powi(3)),
        weighted_constant: safe(weighted_l2 * weighted_l2, morrey * morrey),
        ball_ratio: safe(l2b, (1.0 + ball_radius).powi(3) * weighted_l2 * weighted_l2),
    }
}

/// Canonical divergence-free (−1)-homogeneous data sampled on `grid`.
pub fn make_homogeneous_data(seed: u64, c0: f64, grid: Grid) -> VectorField {
    VectorField::from_descriptor(grid, TailDescriptor::Data(homogeneous_data(seed, c0)))
}

/// DSS extension `λ^k v(λ^k x)` of an annulus profile, sampled on `grid`.
pub fn make_dss_data(profile: AnnulusProfile, lambda: f64, grid: Grid) -> Result<VectorField> {
    let ext = DssExtension::new(profile, lambda)?;
    Ok(VectorField::from_descriptor(grid, TailDescriptor::Extension(ext)))
}

/// Fourier Leray projection; the analytic descriptor is dropped.
pub fn leray_project(f: &VectorField) -> VectorField {
    let sp = Spectral::new(f.grid);
    VectorField { grid: f.grid, comps: sp.leray_project(&f.comps), tail: None, divergence_free: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnalyticData, Shape};
    use crate::field::TailDescriptor;

    fn inverse_radius(n: usize) -> VectorField {
        let grid = Grid::new(4.0, n).unwrap();
        VectorField::from_descriptor(grid, TailDescriptor::Data(AnalyticData::single(1.0, Shape::Radial { axis: 0 })))
    }

    #[test]
    fn inverse_radius_norms() {
        let f = inverse_radius(32);
        let st = NormSettings::default();
        let wl3 = weak_l3_norm(&f, &st).value;
        let exact = (4.0 * std::f64::consts::PI / 3.0).cbrt();
        assert!((wl3 / exact - 1.0).abs() < 0.01, "weak L3 {wl3} vs {exact}");
        let wl2 = weighted_l2_norm(&f, &st).0;
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((wl2 / exact - 1.0).abs() < 0.01, "weighted L2 {wl2} vs {exact}");
        let m = morrey_norm(&f, &st);
        let exact = (4.0 * std::f64::consts::PI).sqrt();
        assert!((m / exact - 1.0).abs() < 0.02, "Morrey {m} vs {exact}");
        // ∫_{B_M} r^{-2} = 4πM
        let b = l2_ball_squared(&f, &st, 2.0);
        assert!((b / (8.0 * std::f64::consts::PI) - 1.0).abs() < 0.01, "ball {b}");
    }

    #[test]
    fn swirl_weak_l3() {
        let grid = Grid::new(4.0, 32).unwrap();
        let f = VectorField::from_descriptor(grid, TailDescriptor::Data(AnalyticData::single(1.0, Shape::Swirl)));
        let wl3 = weak_l3_norm(&f, &NormSettings::default()).value;
        let exact = (std::f64::consts::PI.powi(2) / 4.0).cbrt();
        assert!((wl3 / exact - 1.0).abs() < 0.01, "{wl3} vs {exact}");
    }

    #[test]
    fn unit_ball_indicator() {
        let grid = Grid::new(2.0, 64).unwrap();
        let f = VectorField::from_fn(grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            [if r < 1.0 { 1.0 } else { 0.0 }, 0.0, 0.0]
        });
        let vol = 4.0 * std::f64::consts::PI / 3.0;
        let (l2, _) = lq_norm(&f, 2.0, &NormSettings::default());
        assert!((l2 * l2 / vol - 1.0).abs() < 0.03, "{l2}");
        let wl3 = weak_l3_norm(&f, &NormSettings::default()).value;
        assert!((wl3 / vol.cbrt() - 1.0).abs() < 0.03, "{wl3}");
    }

    #[test]
    fn projection_kills_gradients_and_divergence() {
        use rand::{Rng, SeedableRng};
        let grid = Grid::new(3.0, 16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut f = VectorField::zeros(grid);
        for c in f.comps.iter_mut() {
            for v in c.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let sp = Spectral::new(grid);
        let p = leray_project(&f);
        assert!(p.spectral_divergence(&sp) < 1e-12);
        let pp = leray_project(&p);
        for c in 0..3 {
            for (a, b) in p.comps[c].iter().zip(&pp.comps[c]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let phi = grid.sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp());
        let grad = VectorField { grid, comps: sp.gradient(&phi), tail: None, divergence_free: false };
        assert!(leray_project(&grad).max_abs() < 1e-12);
    }

    #[test]
    fn homogeneous_restriction_extends_to_itself() {
        let grid = Grid::new(2.0, 16).unwrap();
        let data = homogeneous_data(3, 0.5);
        let prof = AnnulusProfile { data: data.clone(), inner: 1.0, outer: 2.0 };
        let f = make_dss_data(prof, 2.0, grid).unwrap();
        let g = make_homogeneous_data(3, 0.5, grid);
        for c in 0..3 {
            for (a, b) in f.comps[c].iter().zip(&g.comps[c]) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }
        assert!(make_dss_data(AnnulusProfile { data, inner: 1.0, outer: 1.5 }, 2.0, grid).is_err());
    }

    #[test]
    fn zero_field() {
        let f = VectorField::zeros(Grid::new(2.0, 8).unwrap());
        let st = NormSettings::default();
        assert_eq!(weak_l3_norm(&f, &st).value, 0.0);
        assert_eq!(morrey_norm(&f, &st), 0.0);
        assert_eq!(weighted_l2_norm(&f, &st).0, 0.0);
    }

    #[test]
    fn ball_energy_bounded_by_weighted_norm() {
        let f = inverse_radius(16);
        let st = NormSettings::default();
        let rep = embedding_report(&f, &st, 1.5);
        assert!(rep.ball_ratio <= 1.0, "{rep:?}");
    }
}
