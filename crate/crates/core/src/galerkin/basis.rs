//! Divergence-free Galerkin modes and the mollifier.
//!
//! Raw modes are curls `∇×(φ_c e_m)` of Gaussian potentials centred on a
//! lattice; the curl is taken spectrally so every mode (and every linear
//! combination) is discretely divergence-free to rounding.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::grid::Grid;
use crate::spectral::{Spectral, Vec3Field};

/// Lattice of potential centres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Simple cubic lattice through the origin.
    Cubic,
    /// Cubic lattice shifted by half a spacing in every direction.
    Staggered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSettings {
    pub k: usize,
    pub layout: Layout,
    /// Gaussian width as a fraction of the grid half width.
    pub width_fraction: f64,
    /// Lattice spacing as a fraction of the grid half width.
    pub spacing_fraction: f64,
}

impl Default for BasisSettings {
    fn default() -> Self {
        Self { k: 12, layout: Layout::Cubic, width_fraction: 0.1, spacing_fraction: 1.0 / 6.0 }
    }
}

/// One raw mode: potential centre and axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMode {
    pub center: [f64; 3],
    pub axis: usize,
}

#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    pub grid: Grid,
    pub settings: BasisSettings,
    pub modes: Vec<Vec3Field>,
    /// Raw modes kept by the orthonormalization.
    pub sources: Vec<RawMode>,
    /// Raw modes discarded as (numerically) dependent.
    pub dropped: usize,
    /// Frobenius norm of `Gram − I`.
    pub gram_residual: f64,
    /// Largest spectral divergence over all modes.
    pub divergence: f64,
    /// Largest `|h|` on the outer two layers of nodes relative to the largest `|h|`.
    pub edge_ratio: f64,
}

impl GalerkinBasis {
    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn sigma(&self) -> f64 {
        self.settings.width_fraction * self.grid.half_width
    }

    /// `Σ c_i h_i` on the grid.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec3Field {
        let n = self.grid.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (m, &c) in self.modes.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for a in 0..3 {
                for (o, v) in out[a].iter_mut().zip(&m[a]) {
                    *o += c * v;
                }
            }
        }
        out
    }

    /// Coefficients `(f, h_i)`.
    pub fn project(&self, f: &Vec3Field) -> Vec<f64> {
        self.modes.iter().map(|m| inner(&self.grid, m, f)).collect()
    }
}

/// `L²` inner product by the grid rule.
pub fn inner(grid: &Grid, u: &Vec3Field, v: &Vec3Field) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        acc += u[a].iter().zip(&v[a]).map(|(x, y)| x * y).sum::<f64>();
    }
    acc * grid.cell_volume()
}

fn lattice(layout: Layout, spacing: f64, reach: f64) -> Vec<[f64; 3]> {
    let shift = match layout {
        Layout::Cubic => 0.0,
        Layout::Staggered => 0.5,
    };
    let m = (reach / spacing).ceil() as i64 + 1;
    let mut pts = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let c = [(i as f64 + shift) * spacing, (j as f64 + shift) * spacing, (k as f64 + shift) * spacing];
                if c.iter().all(|x| x.abs() <= reach + 1e-12) {
                    pts.push(c);
                }
            }
        }
    }
    let key = |c: &[f64; 3]| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2], *c);
    pts.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    pts
}

/// Spectral curl of `φ e_axis`.
fn curl_mode(sp: &Spectral, phi_hat: &[Complex64], axis: usize) -> Vec3Field {
    let n = sp.grid().len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    // (∇φ × e_m)_a = ε_{a b m} ∂_b φ
    for a in 0..3 {
        if a == axis {
            continue;
        }
        let b = 3 - a - axis;
        let sign = if (a + 1) % 3 == b { 1.0 } else { -1.0 };
        let c: Vec<Complex64> = phi_hat
            .iter()
            .enumerate()
            .map(|(idx, z)| z * Complex64::new(0.0, sign * sp.wave_vector(idx)[b]))
            .collect();
        out[a] = sp.inverse(c);
    }
    out
}

pub fn build_basis(grid: Grid, settings: &BasisSettings) -> Result<GalerkinBasis> {
    if settings.k == 0 {
        return argument("basis needs at least one mode");
    }
    if !(settings.width_fraction > 0.0 && settings.spacing_fraction > 0.0) {
        return argument("basis width and spacing must be positive");
    }
    let l = grid.half_width;
    let sigma = settings.width_fraction * l;
    let spacing = settings.spacing_fraction * l;
    // keep seven widths between every centre and the box faces
    let reach = l - 7.0 * sigma;
    if reach < 0.0 {
        return argument(format!("basis width {sigma} too large for half width {l}"));
    }
    let centers = lattice(settings.layout, spacing, reach);
    if 3 * centers.len() < settings.k {
        return argument(format!("lattice offers {} modes, {} requested", 3 * centers.len(), settings.k));
    }
    let sp = Spectral::new(grid);
    let mut modes: Vec<Vec3Field> = Vec::with_capacity(settings.k);
    let mut sources = Vec::with_capacity(settings.k);
    let mut dropped = 0;
    'outer: for c in &centers {
        let phi = grid.sample(|y| {
            let r2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2) + (y[2] - c[2]).powi(2);
            (-r2 / (2.0 * sigma * sigma)).exp()
        });
        let phi_hat = sp.forward(&phi);
        for axis in 0..3 {
            if modes.len() == settings.k {
                break 'outer;
            }
            let mut v = curl_mode(&sp, &phi_hat, axis);
            let norm0 = inner(&grid, &v, &v).sqrt();
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for m in &modes {
                    let p = inner(&grid, &v, m);
                    for a in 0..3 {
                        for (x, y) in v[a].iter_mut().zip(&m[a]) {
                            *x -= p * y;
                        }
                    }
                }
            }
            let norm = inner(&grid, &v, &v).sqrt();
            if norm <= 1e-6 * norm0 {
                dropped += 1;
                continue;
            }
            for comp in v.iter_mut() {
                for x in comp.iter_mut() {
                    *x /= norm;
                }
            }
            modes.push(v);
            sources.push(RawMode { center: *c, axis });
        }
    }

    let k = modes.len();
    let mut gram_residual = 0.0;
    for i in 0..k {
        for j in 0..k {
            let g = inner(&grid, &modes[i], &modes[j]) - if i == j { 1.0 } else { 0.0 };
            gram_residual += g * g;
        }
    }
    let divergence = modes.iter().map(|m| sp.divergence(m).into_iter().fold(0.0, |a: f64, x| a.max(x.abs()))).fold(0.0, f64::max);
    let mut edge = 0.0f64;
    let mut peak = 0.0f64;
    let n = grid.n;
    for m in &modes {
        for idx in 0..grid.len() {
            let v = (m[0][idx].powi(2) + m[1][idx].powi(2) + m[2][idx].powi(2)).sqrt();
            peak = peak.max(v);
            let (i, j, kk) = grid.unravel(idx);
            let near = |a: usize| a < 2 || a >= n - 2;
            if near(i) || near(j) || near(kk) {
                edge = edge.max(v);
            }
        }
    }
    Ok(GalerkinBasis {
        grid,
        settings: settings.clone(),
        modes,
        sources,
        dropped,
        gram_residual: gram_residual.sqrt(),
        divergence,
        edge_ratio: if peak > 0.0 { edge / peak } else { 0.0 },
    })
}

/// Gaussian mollifier `η_ε(y) = (2πε²)^{-3/2} exp(−|y|²/(2ε²))`, applied as
/// its Fourier symbol `exp(−ε²|k|²/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub epsilon: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return argument(format!("mollifier width must be non-negative, got {epsilon}"));
        }
        Ok(Self { epsilon })
    }

    pub fn identity() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn kernel(&self, y: [f64; 3]) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        (2.0 * std::f64::consts::PI * e2).powf(-1.5) * (-r2 / (2.0 * e2)).exp()
    }

    /// Grid quadrature of the kernel (exactly one in the continuum).
    pub fn mass(&self, grid: &Grid) -> f64 {
        if self.epsilon == 0.0 {
            return 1.0;
        }
        grid.integrate(&grid.sample(|y| self.kernel(y)))
    }

    pub fn symbol(&self, k: [f64; 3]) -> f64 {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        (-0.5 * self.epsilon * self.epsilon * k2).exp()
    }

    pub fn apply(&self, sp: &Spectral, v: &Vec3Field) -> Vec3Field {
        if self.epsilon == 0.0 {
            return v.clone();
        }
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(3);
        for comp in v {
            let mut c = sp.forward(comp);
            for (idx, z) in c.iter_mut().enumerate() {
                *z *= self.symbol(sp.wave_vector_full(idx));
            }
            out.push(sp.inverse(c));
        }
        [out.remove(0), out.remove(0), out.remove(0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(6.0, 48).unwrap()
    }

    #[test]
    fn single_mode_is_normalized() {
        let b = build_basis(grid(), &BasisSettings { k: 1, ..Default::default() }).unwrap();
        assert_eq!(b.k(), 1);
        assert!((inner(&b.grid, &b.modes[0], &b.modes[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twenty_modes_are_orthonormal_and_solenoidal() {
        let b = build_basis(grid(), &BasisSettings { k: 20, ..Default::default() }).unwrap();
        assert_eq!(b.k(), 20);
        // independent Gram computation
        let mut fro = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                let mut acc = 0.0;
                for idx in 0..b.grid.len() {
                    for a in 0..3 {
                        acc += b.modes[i][a][idx] * b.modes[j][a][idx];
                    }
                }
                let g = acc * b.grid.cell_volume() - if i == j { 1.0 } else { 0.0 };
                fro += g * g;
            }
        }
        assert!(fro.sqrt() < 1e-10, "gram residual {}", fro.sqrt());
        assert!(b.gram_residual < 1e-10);
        assert!(b.divergence < 1e-10, "divergence {}", b.divergence);
        assert!(b.edge_ratio < 1e-8, "edge ratio {}", b.edge_ratio);
    }

    #[test]
    fn staggered_layout_builds() {
        let b = build_basis(grid(), &BasisSettings { k: 12, layout: Layout::Staggered, ..Default::default() }).unwrap();
        assert_eq!(b.k(), 12);
        assert!(b.gram_residual < 1e-10);
    }

    #[test]
    fn mollifier_has_unit_mass_and_keeps_divergence() {
        let g = grid();
        let m = Mollifier::new(2.0 * g.spacing()).unwrap();
        assert!((m.mass(&g) - 1.0).abs() < 1e-10);
        let b = build_basis(g, &BasisSettings { k: 3, ..Default::default() }).unwrap();
        let sp = Spectral::new(g);
        for mode in &b.modes {
            let mv = m.apply(&sp, mode);
            assert!(mv[0].iter().chain(&mv[1]).chain(&mv[2]).all(|x| x.is_finite()));
            assert!(sp.divergence(&mv).iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn oversized_request_is_rejected() {
        let st = BasisSettings { k: 500, ..Default::default() };
        assert!(build_basis(Grid::new(1.0, 8).unwrap(), &st).is_err());
    }
}
