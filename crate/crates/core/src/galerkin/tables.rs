//! Coefficient tables of the Galerkin systems.
//!
//! Every inner product is a grid sum. Background fields enter linearly
//! (or bilinearly, for the forcing) through their temporal harmonics, so the
//! tables at any `s` are exact trigonometric combinations of precomputed
//! blocks. Terms that contain `∇W` are integrated by parts onto the modes:
//! `(h_i·∇X, h_j) = −(h_i·∇h_j, X)` for solenoidal `h_i`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{GalerkinBasis, Mollifier};
use super::SystemKind;
use crate::background::{harmonic_ds_weights, harmonic_weights, PeriodicField};
use crate::error::{argument, Result};
use crate::spectral::{Spectral, Vec3Field};

/// Blocks contributed by one background field `X = Σ_a w_a(s) X_a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldBlocks {
    pub orders: Vec<usize>,
    pub period: f64,
    /// `−(h_i·∇h_j, X_a)` (equals `(h_i·∇X_a, h_j)`), row-major `i·k + j`.
    pub transport: Vec<Vec<f64>>,
    /// `(X_a·∇h_i, h_j)` as computed by the grid rule.
    pub advection: Vec<Vec<f64>>,
    /// `(X_a, h_j)`.
    pub pairing: Vec<Vec<f64>>,
    /// `(X_a, 2h_j + y·∇h_j − Δh_j)`: the weak `ℒ` pairing without `∂_s`.
    pub adjoint: Vec<Vec<f64>>,
}

impl FieldBlocks {
    fn harmonics(&self) -> usize {
        self.transport.len()
    }

    fn weights(&self, s: f64) -> Vec<f64> {
        harmonic_weights(&self.orders, self.period, s)
    }

    fn ds_weights(&self, s: f64) -> Vec<f64> {
        harmonic_ds_weights(&self.orders, self.period, s)
    }
}

/// All `s`-independent ingredients of the tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GalerkinSystem {
    pub kind: SystemKind,
    pub k: usize,
    pub epsilon: f64,
    /// `(∇h_i, ∇h_j)`.
    pub stiffness: Vec<f64>,
    /// `(h_i + y·∇h_i, h_j)` in structured form: `−½δ_ij` plus the
    /// antisymmetric part of the quadrature of `(y·∇h_i, h_j)`.
    pub drift: Vec<f64>,
    /// Largest `|(y·∇h_i, h_j) + (y·∇h_j, h_i) + 3δ_ij|` of the raw quadrature.
    pub drift_defect: f64,
    /// Skew form `½[−((η*h_i)·∇h_l, h_j) + ((η*h_i)·∇h_j, h_l)]`, index `(i·k + l)·k + j`.
    pub quadratic: Vec<f64>,
    /// Largest `|C_ilj + C_ijl|` of the unsymmetrized quadrature.
    pub quadratic_skew_defect: f64,
    /// Largest `|C_ilj|` of the unsymmetrized quadrature.
    pub quadratic_scale: f64,
    /// Velocity background first, then the magnetic or stress columns.
    pub fields: Vec<FieldBlocks>,
    /// `(X_p·∇h_j, X_q)` for every pair of harmonics `p, q` over all fields.
    pub triple: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

/// Tables frozen at one similarity time.
#[derive(Debug, Clone)]
pub struct CoeffTables<'a> {
    pub kind: SystemKind,
    pub k: usize,
    pub a: Vec<f64>,
    /// One block per column.
    pub b: Vec<Vec<f64>>,
    pub c: &'a [f64],
    pub d: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

fn dot(u: &Vec3Field, v: &Vec3Field) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        acc += u[a].iter().zip(&v[a]).map(|(x, y)| x * y).sum::<f64>();
    }
    acc
}

/// `∂_b h_a` (stored `[a][b]`) and `Δh`.
fn derivatives(sp: &Spectral, h: &Vec3Field) -> ([[Vec<f64>; 3]; 3], Vec3Field) {
    let n = sp.grid().len();
    let mut grad: [[Vec<f64>; 3]; 3] = Default::default();
    let mut lap: Vec3Field = Default::default();
    for a in 0..3 {
        let c = sp.forward(&h[a]);
        for b in 0..3 {
            let d: Vec<Complex64> =
                c.iter().enumerate().map(|(idx, z)| z * Complex64::new(0.0, sp.wave_vector(idx)[b])).collect();
            grad[a][b] = sp.inverse(d);
        }
        let l: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let k = sp.wave_vector_full(idx);
                z * -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
            })
            .collect();
        lap[a] = sp.inverse(l);
        debug_assert_eq!(lap[a].len(), n);
    }
    (grad, lap)
}

/// `(v·∇) h` from the gradient of `h`.
fn directional(v: &Vec3Field, grad: &[[Vec<f64>; 3]; 3], out: &mut Vec3Field) {
    for a in 0..3 {
        let o = &mut out[a];
        let (g0, g1, g2) = (&grad[a][0], &grad[a][1], &grad[a][2]);
        for idx in 0..o.len() {
            o[idx] = v[0][idx] * g0[idx] + v[1][idx] * g1[idx] + v[2][idx] * g2[idx];
        }
    }
}

/// `Σ_a ∂_b h_a X_a` for each `b`.
fn transposed(x: &Vec3Field, grad: &[[Vec<f64>; 3]; 3], out: &mut Vec3Field) {
    for b in 0..3 {
        let o = &mut out[b];
        let (g0, g1, g2) = (&grad[0][b], &grad[1][b], &grad[2][b]);
        for idx in 0..o.len() {
            o[idx] = x[0][idx] * g0[idx] + x[1][idx] * g1[idx] + x[2][idx] * g2[idx];
        }
    }
}

impl GalerkinSystem {
    /// Assembles all blocks. `fields` holds the velocity background first and
    /// then one field per column of `kind`.
    pub fn assemble(basis: &GalerkinBasis, mollifier: &Mollifier, fields: &[&PeriodicField], kind: SystemKind) -> Result<Self> {
        if fields.len() != 1 + kind.columns() {
            return argument(format!("{:?} needs {} background fields, got {}", kind, 1 + kind.columns(), fields.len()));
        }
        let grid = basis.grid;
        if let Some(f) = fields.iter().find(|f| f.grid != grid) {
            return argument(format!("background grid {:?} differs from basis grid {:?}", f.grid, grid));
        }
        let k = basis.k();
        let n = grid.len();
        let vol = grid.cell_volume();
        let sp = Spectral::new(grid);
        let modes = &basis.modes;
        let smoothed: Vec<Vec3Field> = modes.iter().map(|m| mollifier.apply(&sp, m)).collect();
        let ys = grid.sample_vector(|y| y);

        let mut offsets = Vec::with_capacity(fields.len());
        let mut total = 0;
        for f in fields {
            offsets.push(total);
            total += f.coeffs.len();
        }
        let harmonics: Vec<&Vec3Field> = fields.iter().flat_map(|f| f.coeffs.iter()).collect();

        let mut stiffness = vec![0.0; k * k];
        let mut drift = vec![0.0; k * k];
        let mut raw = vec![0.0; k * k * k];
        let mut transport = vec![vec![0.0; k * k]; total];
        let mut advection = vec![vec![0.0; k * k]; total];
        let mut pairing = vec![vec![0.0; k]; total];
        let mut adjoint = vec![vec![0.0; k]; total];
        let mut triple = vec![vec![0.0; k]; total * total];

        let zero = || -> Vec3Field { [vec![0.0; n], vec![0.0; n], vec![0.0; n]] };
        let mut work = zero();
        let mut adj = zero();
        for l in 0..k {
            let (grad, lap) = derivatives(&sp, &modes[l]);
            for i in 0..k {
                stiffness[i * k + l] = -dot(&modes[i], &lap) * vol;
            }
            // y·∇h_l
            directional(&ys, &grad, &mut work);
            for a in 0..3 {
                for idx in 0..n {
                    adj[a][idx] = 2.0 * modes[l][a][idx] + work[a][idx] - lap[a][idx];
                }
            }
            for j in 0..k {
                drift[l * k + j] = dot(&work, &modes[j]) * vol;
            }
            for (p, x) in harmonics.iter().enumerate() {
                pairing[p][l] = dot(x, &modes[l]) * vol;
                adjoint[p][l] = dot(x, &adj) * vol;
                transposed(x, &grad, &mut work);
                for i in 0..k {
                    transport[p][i * k + l] = -dot(&modes[i], &work) * vol;
                }
                directional(x, &grad, &mut work);
                for j in 0..k {
                    advection[p][l * k + j] = dot(&work, &modes[j]) * vol;
                }
                for (q, y) in harmonics.iter().enumerate() {
                    triple[p * total + q][l] = dot(&work, y) * vol;
                }
            }
            for i in 0..k {
                directional(&smoothed[i], &grad, &mut work);
                for j in 0..k {
                    raw[(i * k + l) * k + j] = -dot(&work, &modes[j]) * vol;
                }
            }
        }

        // (y·∇h_i, h_j) + (y·∇h_j, h_i) = −3δ_ij for orthonormal solenoidal modes
        let mut structured = vec![0.0; k * k];
        let mut drift_defect = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let (a, b) = (drift[i * k + j], drift[j * k + i]);
                let id = if i == j { 1.0 } else { 0.0 };
                structured[i * k + j] = 0.5 * (a - b) - 0.5 * id;
                drift_defect = drift_defect.max((a + b + 3.0 * id).abs());
            }
        }

        let mut quadratic = vec![0.0; k * k * k];
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..k {
            for l in 0..k {
                for j in 0..k {
                    let a = raw[(i * k + l) * k + j];
                    let b = raw[(i * k + j) * k + l];
                    quadratic[(i * k + l) * k + j] = 0.5 * (a - b);
                    defect = defect.max((a + b).abs());
                    scale = scale.max(a.abs());
                }
            }
        }

        let mut blocks = Vec::with_capacity(fields.len());
        for (fi, f) in fields.iter().enumerate() {
            let r = offsets[fi]..offsets[fi] + f.coeffs.len();
            blocks.push(FieldBlocks {
                orders: f.orders.clone(),
                period: f.period,
                transport: transport[r.clone()].to_vec(),
                advection: advection[r.clone()].to_vec(),
                pairing: pairing[r.clone()].to_vec(),
                adjoint: adjoint[r].to_vec(),
            });
        }
        Ok(Self {
            kind,
            k,
            epsilon: mollifier.epsilon,
            stiffness,
            drift: structured,
            drift_defect,
            quadratic,
            quadratic_skew_defect: defect,
            quadratic_scale: scale,
            fields: blocks,
            triple,
            offsets,
        })
    }

    pub fn columns(&self) -> usize {
        self.kind.columns()
    }

    /// State dimension `k·(1 + columns)`.
    pub fn dimension(&self) -> usize {
        self.k * (1 + self.columns())
    }

    pub fn is_stationary(&self) -> bool {
        self.fields.iter().all(|f| f.orders.is_empty())
    }

    /// Common period of the backgrounds (1 for stationary ones).
    pub fn period(&self) -> f64 {
        self.fields.iter().find(|f| !f.orders.is_empty()).map(|f| f.period).unwrap_or(1.0)
    }

    fn triple_at(&self, f: usize, wf: &[f64], g: usize, wg: &[f64]) -> Vec<f64> {
        let total: usize = self.fields.iter().map(|f| f.harmonics()).sum();
        let mut out = vec![0.0; self.k];
        for (a, &wa) in wf.iter().enumerate() {
            for (b, &wb) in wg.iter().enumerate() {
                let w = wa * wb;
                if w == 0.0 {
                    continue;
                }
                let t = &self.triple[(self.offsets[f] + a) * total + self.offsets[g] + b];
                for (o, v) in out.iter_mut().zip(t) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// `Σ_a w_a B_a` for a list of `k × k` blocks.
    fn combine(blocks: &[Vec<f64>], w: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (b, &wa) in blocks.iter().zip(w) {
            if wa == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(b) {
                *o += wa * v;
            }
        }
        out
    }

    /// Field blocks combined at `s`: transport, skew advection, raw advection.
    pub fn field_blocks_at(&self, f: usize, s: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.k;
        let fb = &self.fields[f];
        let w = fb.weights(s);
        let p = Self::combine(&fb.transport, &w, k * k);
        let m = Self::combine(&fb.advection, &w, k * k);
        let mut skew = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                skew[i * k + j] = 0.5 * (m[i * k + j] - m[j * k + i]);
            }
        }
        (p, skew, m)
    }

    /// `⟨ℒX_f, h_j⟩` at `s` (weak form).
    pub fn weak_operator(&self, f: usize, s: f64) -> Vec<f64> {
        let fb = &self.fields[f];
        let w = fb.weights(s);
        let dw = fb.ds_weights(s);
        let mut out = Self::combine(&fb.pairing, &dw, self.k);
        for (o, v) in out.iter_mut().zip(Self::combine(&fb.adjoint, &w, self.k)) {
            *o += v;
        }
        out
    }

    pub fn tables_at(&self, s: f64) -> CoeffTables<'_> {
        let k = self.k;
        let cols = self.columns();
        let weights: Vec<Vec<f64>> = self.fields.iter().map(|f| f.weights(s)).collect();
        let (pw, mw, _) = self.field_blocks_at(0, s);
        let mut a = vec![0.0; k * k];
        let mut f = vec![0.0; k * k];
        for idx in 0..k * k {
            let base = -self.stiffness[idx] + self.drift[idx];
            a[idx] = base - pw[idx] - mw[idx];
            f[idx] = base + pw[idx] - mw[idx];
        }
        // forcing: −⟨ℒW, h⟩ + (W·∇h, W) − Σ (E_n·∇h, E_n)
        let mut d: Vec<f64> = self.weak_operator(0, s).into_iter().map(|v| -v).collect();
        for (o, v) in d.iter_mut().zip(self.triple_at(0, &weights[0], 0, &weights[0])) {
            *o += v;
        }
        let mut b = Vec::with_capacity(cols);
        let mut e = Vec::with_capacity(cols);
        let mut h = Vec::with_capacity(cols);
        for n in 1..=cols {
            let (pn, mn, _) = self.field_blocks_at(n, s);
            b.push(pn.iter().zip(&mn).map(|(p, m)| p + m).collect());
            e.push(pn.iter().zip(&mn).map(|(p, m)| -p + m).collect());
            for (o, v) in d.iter_mut().zip(self.triple_at(n, &weights[n], n, &weights[n])) {
                *o -= v;
            }
            // −⟨ℒE, h⟩ + (W·∇h, E) − (E·∇h, W)
            let mut hn: Vec<f64> = self.weak_operator(n, s).into_iter().map(|v| -v).collect();
            let wx = self.triple_at(0, &weights[0], n, &weights[n]);
            let xw = self.triple_at(n, &weights[n], 0, &weights[0]);
            for j in 0..k {
                hn[j] += wx[j] - xw[j];
            }
            h.push(hn);
        }
        CoeffTables { kind: self.kind, k, a, b, c: &self.quadratic, d, e, f, h }
    }
}

#[cfg(test)]
mod tests {
    use super::super::basis::{build_basis, BasisSettings};
    use super::*;
    use crate::grid::Grid;

    fn setup(kind: SystemKind, k: usize) -> (GalerkinBasis, GalerkinSystem) {
        let grid = Grid::new(6.0, 48).unwrap();
        let basis = build_basis(grid, &BasisSettings { k, ..Default::default() }).unwrap();
        let zero = PeriodicField::zeros(grid, 1.0, vec![]);
        let fields: Vec<&PeriodicField> = (0..=kind.columns()).map(|_| &zero).collect();
        let mol = Mollifier::new(2.0 * grid.spacing()).unwrap();
        let sys = GalerkinSystem::assemble(&basis, &mol, &fields, kind).unwrap();
        (basis, sys)
    }

    #[test]
    fn zero_backgrounds_give_zero_forcing_and_coupling() {
        let (_, sys) = setup(SystemKind::Mhd, 6);
        let t = sys.tables_at(0.3);
        assert!(t.d.iter().chain(&t.h[0]).all(|v| *v == 0.0));
        assert!(t.b[0].iter().chain(&t.e[0]).all(|v| *v == 0.0));
    }

    #[test]
    fn drift_diagonal_identity() {
        let (basis, sys) = setup(SystemKind::NavierStokes, 12);
        let t = sys.tables_at(0.0);
        let k = sys.k;
        let grid = basis.grid;
        for i in 0..k {
            // independent quadrature of (y·∇h_i, h_i) by central differences of |h|²/2
            let h = &basis.modes[i];
            let e: Vec<f64> = (0..grid.len()).map(|x| 0.5 * (h[0][x].powi(2) + h[1][x].powi(2) + h[2][x].powi(2))).collect();
            let sp = Spectral::new(grid);
            let g = sp.gradient(&e);
            let ys = grid.sample_vector(|y| y);
            let lhs: f64 = (0..grid.len()).map(|x| ys[0][x] * g[0][x] + ys[1][x] * g[1][x] + ys[2][x] * g[2][x]).sum::<f64>()
                * grid.cell_volume();
            // the product |h|² is less resolved than h itself
            assert!((lhs + 1.5).abs() < 1e-5, "(y·∇h, h) = {lhs}");
            assert!(sys.drift_defect < 1e-8, "drift defect {}", sys.drift_defect);
            let expected = -sys.stiffness[i * k + i] - 0.5;
            assert!((t.a[i * k + i] - expected).abs() < 1e-8, "A_ii {} vs {}", t.a[i * k + i], expected);
        }
    }

    #[test]
    fn quadratic_table_is_skew() {
        let (_, sys) = setup(SystemKind::Mhd, 8);
        let k = sys.k;
        for i in 0..k {
            for l in 0..k {
                for j in 0..k {
                    let s = sys.quadratic[(i * k + l) * k + j] + sys.quadratic[(i * k + j) * k + l];
                    assert!(s.abs() <= 1e-10);
                }
            }
        }
        // the unsymmetrized quadrature is already skew up to resolution
        assert!(sys.quadratic_skew_defect < 1e-5 * sys.quadratic_scale, "{} / {}", sys.quadratic_skew_defect, sys.quadratic_scale);
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let grid = Grid::new(6.0, 32).unwrap();
        let basis = build_basis(grid, &BasisSettings { k: 3, ..Default::default() }).unwrap();
        let other = PeriodicField::zeros(Grid::new(6.0, 16).unwrap(), 1.0, vec![]);
        let r = GalerkinSystem::assemble(&basis, &Mollifier::identity(), &[&other], SystemKind::NavierStokes);
        assert!(r.is_err());
    }
}
