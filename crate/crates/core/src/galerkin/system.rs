//! Right-hand sides of the Galerkin ODEs and the energy bookkeeping.

use serde::{Deserialize, Serialize};

use super::tables::{CoeffTables, GalerkinSystem};
use super::SystemKind;
use crate::background::CutoffBackground;
use crate::error::{argument, Result};

/// Galerkin coefficients: velocity `mu` and one vector per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffState {
    pub s: f64,
    pub mu: Vec<f64>,
    pub aux: Vec<Vec<f64>>,
}

impl CoeffState {
    pub fn zeros(kind: SystemKind, k: usize) -> Self {
        Self { s: 0.0, mu: vec![0.0; k], aux: vec![vec![0.0; k]; kind.columns()] }
    }

    pub fn from_flat(s: f64, k: usize, flat: &[f64]) -> Self {
        let mut chunks = flat.chunks(k);
        let mu = chunks.next().map(|c| c.to_vec()).unwrap_or_default();
        Self { s, mu, aux: chunks.map(|c| c.to_vec()).collect() }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.mu.clone();
        for a in &self.aux {
            v.extend_from_slice(a);
        }
        v
    }

    pub fn energy(&self) -> f64 {
        self.mu.iter().chain(self.aux.iter().flatten()).map(|x| x * x).sum()
    }
}

/// `out_j += sign Σ_il C_ilj x_i y_l`.
fn quadratic_into(c: &[f64], k: usize, x: &[f64], y: &[f64], sign: f64, out: &mut [f64]) {
    for i in 0..k {
        if x[i] == 0.0 {
            continue;
        }
        for l in 0..k {
            let w = sign * x[i] * y[l];
            if w == 0.0 {
                continue;
            }
            let row = &c[(i * k + l) * k..(i * k + l + 1) * k];
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
    }
}

/// `out_j += Σ_i M_ij x_i`.
fn linear_into(m: &[f64], k: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..k {
        if x[i] == 0.0 {
            continue;
        }
        let row = &m[i * k..(i + 1) * k];
        for (o, r) in out.iter_mut().zip(row) {
            *o += x[i] * r;
        }
    }
}

/// Quadratic part only (velocity block first).
pub fn quadratic_part(tables: &CoeffTables, state: &[f64]) -> Vec<f64> {
    let k = tables.k;
    let cols = tables.kind.columns();
    let mut out = vec![0.0; state.len()];
    let mu = &state[..k];
    let (head, tail) = out.split_at_mut(k);
    quadratic_into(tables.c, k, mu, mu, 1.0, head);
    for n in 0..cols {
        let al = &state[(n + 1) * k..(n + 2) * k];
        quadratic_into(tables.c, k, al, al, -1.0, head);
        let dst = &mut tail[n * k..(n + 1) * k];
        // G_ilj = C_ilj − C_lij
        quadratic_into(tables.c, k, mu, al, 1.0, dst);
        quadratic_into(tables.c, k, al, mu, -1.0, dst);
    }
    out
}

/// Unchecked right-hand side, written into `out`.
pub fn rhs_into(tables: &CoeffTables, state: &[f64], out: &mut [f64]) {
    let k = tables.k;
    let cols = tables.kind.columns();
    out.fill(0.0);
    let mu = &state[..k];
    {
        let (head, tail) = out.split_at_mut(k);
        linear_into(&tables.a, k, mu, head);
        quadratic_into(tables.c, k, mu, mu, 1.0, head);
        for (o, d) in head.iter_mut().zip(&tables.d) {
            *o += d;
        }
        for n in 0..cols {
            let al = &state[(n + 1) * k..(n + 2) * k];
            linear_into(&tables.b[n], k, al, head);
            quadratic_into(tables.c, k, al, al, -1.0, head);
            let dst = &mut tail[n * k..(n + 1) * k];
            linear_into(&tables.e[n], k, mu, dst);
            linear_into(&tables.f, k, al, dst);
            quadratic_into(tables.c, k, mu, al, 1.0, dst);
            quadratic_into(tables.c, k, al, mu, -1.0, dst);
            for (o, h) in dst.iter_mut().zip(&tables.h[n]) {
                *o += h;
            }
        }
    }
}

pub fn rhs(tables: &CoeffTables, state: &[f64]) -> Result<Vec<f64>> {
    let dim = tables.k * (1 + tables.kind.columns());
    if state.len() != dim {
        return argument(format!("state has dimension {}, system expects {dim}", state.len()));
    }
    let mut out = vec![0.0; dim];
    rhs_into(tables, state, &mut out);
    Ok(out)
}

/// Terms of the energy identity at one state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `‖U‖² + Σ‖A_n‖²`.
    pub energy: f64,
    /// `‖∇U‖² + Σ‖∇A_n‖²`.
    pub gradient: f64,
    /// Background coupling terms of the identity.
    pub coupling: f64,
    /// `−⟨𝓡, ·⟩` pairings.
    pub forcing: f64,
    /// Predicted `dE/ds = 2(−E/2 − gradient + coupling + forcing)`.
    pub rate: f64,
}

impl EnergyTerms {
    pub fn h1(&self) -> f64 {
        self.energy + self.gradient
    }
}

fn bilinear(m: &[f64], k: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            acc += x[i] * m[i * k + j] * y[j];
        }
    }
    acc
}

impl GalerkinSystem {
    /// Right-hand side of the energy identity assembled term by term from the
    /// tables (the advection terms that vanish or cancel are omitted).
    pub fn energy_terms(&self, state: &[f64], s: f64) -> EnergyTerms {
        let k = self.k;
        let tables = self.tables_at(s);
        let mu = &state[..k];
        let energy: f64 = state.iter().map(|x| x * x).sum();
        let mut gradient = bilinear(&self.stiffness, k, mu, mu);
        let (pw, _, _) = self.field_blocks_at(0, s);
        // −(U·∇W, U)
        let mut coupling = -bilinear(&pw, k, mu, mu);
        let mut forcing: f64 = tables.d.iter().zip(mu).map(|(a, b)| a * b).sum();
        for n in 0..self.columns() {
            let al = &state[(n + 1) * k..(n + 2) * k];
            gradient += bilinear(&self.stiffness, k, al, al);
            let (pn, mn, _) = self.field_blocks_at(n + 1, s);
            // (E·∇A, U) + (A·∇E, U) − (U·∇E, A) + (E·∇U, A) + (A·∇W, A)
            coupling += bilinear(&mn, k, al, mu) + bilinear(&pn, k, al, mu) - bilinear(&pn, k, mu, al)
                + bilinear(&mn, k, mu, al)
                + bilinear(&pw, k, al, al);
            forcing += tables.h[n].iter().zip(al).map(|(a, b)| a * b).sum::<f64>();
        }
        EnergyTerms { energy, gradient, coupling, forcing, rate: 2.0 * (-0.5 * energy - gradient + coupling + forcing) }
    }
}

/// Sup-in-`s` norms entering the forcing constant, velocity background first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcingNorms {
    /// `‖ℒX‖_{H^{-1}}` per background.
    pub h_minus1: Vec<f64>,
    /// `‖X‖_{L⁴}` per background.
    pub l4: Vec<f64>,
}

impl ForcingNorms {
    pub fn zeros(kind: SystemKind) -> Self {
        Self { h_minus1: vec![0.0; 1 + kind.columns()], l4: vec![0.0; 1 + kind.columns()] }
    }

    pub fn from_cutoff(bg: &CutoffBackground) -> Self {
        Self {
            h_minus1: bg.fields.iter().map(|f| f.forcing_h_minus1_sup).collect(),
            l4: bg.fields.iter().map(|f| f.l4_sup).collect(),
        }
    }
}

/// `C₂ = c (Σ‖ℒX‖²_{H^{-1}} + (Σ‖X‖²_{L⁴})²)` with `c = 8` (MHD) or `32` (viscoelastic).
pub fn forcing_constant(kind: SystemKind, norms: &ForcingNorms) -> f64 {
    let h: f64 = norms.h_minus1.iter().map(|x| x * x).sum();
    let l: f64 = norms.l4.iter().map(|x| x * x).sum();
    kind.forcing_prefactor() * (h + l * l)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::super::basis::{build_basis, BasisSettings, GalerkinBasis, Mollifier};
    use super::*;
    use crate::background::PeriodicField;
    use crate::grid::Grid;
    use crate::spectral::{Spectral, Vec3Field};

    /// Smooth solenoidal field `∇×(ψ e)` with a Gaussian `ψ` of width `w`.
    fn swirl(grid: &Grid, c: [f64; 3], w: f64, e: usize, amp: f64) -> Vec3Field {
        let sp = Spectral::new(*grid);
        let psi = grid.sample(|y| {
            let r2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2) + (y[2] - c[2]).powi(2);
            amp * (-r2 / (2.0 * w * w)).exp()
        });
        let g = sp.gradient(&psi);
        let mut out: Vec3Field = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
        for a in 0..3 {
            if a == e {
                continue;
            }
            let b = 3 - a - e;
            let sign = if (a + 1) % 3 == b { 1.0 } else { -1.0 };
            out[a] = g[b].iter().map(|v| sign * v).collect();
        }
        out
    }

    fn background(grid: &Grid, seed: u64, period: f64) -> PeriodicField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = PeriodicField::zeros(*grid, period, vec![1]);
        for slot in f.coeffs.iter_mut() {
            let c = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            *slot = swirl(grid, c, 1.2, rng.gen_range(0..3), rng.gen_range(-0.3..0.3));
        }
        f
    }

    fn basis(n: usize, k: usize) -> GalerkinBasis {
        build_basis(Grid::new(6.0, n).unwrap(), &BasisSettings { k, ..Default::default() }).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_state_zero_forcing_is_at_rest() {
        let b = basis(32, 6);
        let z = PeriodicField::zeros(b.grid, 1.0, vec![]);
        let sys = GalerkinSystem::assemble(&b, &Mollifier::identity(), &[&z, &z], SystemKind::Mhd).unwrap();
        let t = sys.tables_at(0.0);
        assert!(rhs(&t, &vec![0.0; 12]).unwrap().iter().all(|v| *v == 0.0));
        assert!(rhs(&t, &[0.0; 5]).is_err());
    }

    #[test]
    fn quadratic_part_matches_field_space_trilinear_form() {
        let b = basis(64, 12);
        let g = b.grid;
        let sp = Spectral::new(g);
        let mol = Mollifier::new(2.0 * g.spacing()).unwrap();
        let z = PeriodicField::zeros(g, 1.0, vec![]);
        let sys = GalerkinSystem::assemble(&b, &mol, &[&z], SystemKind::NavierStokes).unwrap();
        let t = sys.tables_at(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = random_state(&mut rng, 12);
        let q = quadratic_part(&t, &mu);
        let u = b.synthesize(&mu);
        let eu = mol.apply(&sp, &u);
        let grads: Vec<Vec3Field> = (0..3).map(|a| sp.gradient(&u[a])).collect();
        let mut adv: Vec3Field = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
        for a in 0..3 {
            for x in 0..g.len() {
                adv[a][x] = -(eu[0][x] * grads[a][0][x] + eu[1][x] * grads[a][1][x] + eu[2][x] * grads[a][2][x]);
            }
        }
        let direct = b.project(&adv);
        for j in 0..12 {
            assert!((q[j] - direct[j]).abs() < 1e-8, "j={j}: {} vs {}", q[j], direct[j]);
        }
    }

    #[test]
    fn energy_identity_matches_field_space_evaluation() {
        let b = basis(48, 12);
        let g = b.grid;
        let sp = Spectral::new(g);
        let period = 0.7;
        let w = background(&g, 11, period);
        let d = background(&g, 12, period);
        let mol = Mollifier::new(2.0 * g.spacing()).unwrap();
        let sys = GalerkinSystem::assemble(&b, &mol, &[&w, &d], SystemKind::Mhd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = random_state(&mut rng, 24);
        let s = 0.23;
        let t = sys.tables_at(s);
        let r = rhs(&t, &state).unwrap();
        let lhs: f64 = state.iter().zip(&r).map(|(a, b)| a * b).sum();

        // independent field-space evaluation of the identity
        let u = b.synthesize(&state[..12]);
        let a = b.synthesize(&state[12..]);
        let wf = w.at(s);
        let df = d.at(s);
        let n = g.len();
        let vol = g.cell_volume();
        let grad = |f: &Vec3Field| -> Vec<Vec3Field> { (0..3).map(|c| sp.gradient(&f[c])).collect() };
        let adv = |x: &Vec3Field, gy: &[Vec3Field]| -> Vec3Field {
            let mut o: Vec3Field = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for c in 0..3 {
                for i in 0..n {
                    o[c][i] = x[0][i] * gy[c][0][i] + x[1][i] * gy[c][1][i] + x[2][i] * gy[c][2][i];
                }
            }
            o
        };
        let ip = |x: &Vec3Field, y: &Vec3Field| -> f64 { (0..3).map(|c| x[c].iter().zip(&y[c]).map(|(p, q)| p * q).sum::<f64>()).sum::<f64>() * vol };
        let (gu, ga, gw, gd) = (grad(&u), grad(&a), grad(&wf), grad(&df));
        let lop = |f: &PeriodicField, gf: &[Vec3Field]| -> Vec3Field {
            let v = f.at(s);
            let dv = f.ds(s);
            let ys = g.sample_vector(|y| y);
            let mut o: Vec3Field = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for c in 0..3 {
                let lap = sp.laplacian(&v[c]);
                for i in 0..n {
                    o[c][i] = dv[c][i] - lap[i] - v[c][i] - (ys[0][i] * gf[c][0][i] + ys[1][i] * gf[c][1][i] + ys[2][i] * gf[c][2][i]);
                }
            }
            o
        };
        let mut r1 = lop(&w, &gw);
        let mut r2 = lop(&d, &gd);
        let (ww, dd, wd, dw) = (adv(&wf, &gw), adv(&df, &gd), adv(&wf, &gd), adv(&df, &gw));
        for c in 0..3 {
            for i in 0..n {
                r1[c][i] += ww[c][i] - dd[c][i];
                r2[c][i] += wd[c][i] - dw[c][i];
            }
        }
        let energy = ip(&u, &u) + ip(&a, &a);
        let dissip: f64 = (0..3).map(|c| ip(&gu[c], &gu[c]) + ip(&ga[c], &ga[c])).sum();
        let coupling = -ip(&adv(&u, &gw), &u) + ip(&adv(&df, &ga), &u) + ip(&adv(&a, &gd), &u) - ip(&adv(&u, &gd), &a)
            + ip(&adv(&df, &gu), &a)
            + ip(&adv(&a, &gw), &a);
        let forcing = -ip(&r1, &u) - ip(&r2, &a);
        let expected = -0.5 * energy - dissip + coupling + forcing;
        let scale = energy + dissip + coupling.abs() + forcing.abs();
        assert!((lhs - expected).abs() < 1e-8 * scale, "{lhs} vs {expected}");
        let terms = sys.energy_terms(&state, s);
        // the assembled identity is exact for the discrete system
        assert!((terms.rate - 2.0 * lhs).abs() < 1e-12 * scale, "{} vs {}", terms.rate, 2.0 * lhs);
    }

    #[test]
    fn cubic_terms_cancel() {
        let b = basis(32, 8);
        let z = PeriodicField::zeros(b.grid, 1.0, vec![]);
        let mol = Mollifier::new(2.0 * b.grid.spacing()).unwrap();
        let sys = GalerkinSystem::assemble(&b, &mol, &[&z, &z, &z, &z], SystemKind::Viscoelastic).unwrap();
        let t = sys.tables_at(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = random_state(&mut rng, 32);
            let q = quadratic_part(&t, &x);
            let c: f64 = x.iter().zip(&q).map(|(a, b)| a * b).sum();
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(c.abs() <= 1e-10 * nrm.powi(3), "{c}");
        }
    }

    #[test]
    fn viscoelastic_reduces_to_mhd() {
        let b = basis(32, 6);
        let g = b.grid;
        let w = background(&g, 1, 0.7);
        let d = background(&g, 2, 0.7);
        let z = PeriodicField::zeros(g, 0.7, vec![1]);
        let mol = Mollifier::new(2.0 * g.spacing()).unwrap();
        let mhd = GalerkinSystem::assemble(&b, &mol, &[&w, &d], SystemKind::Mhd).unwrap();
        let vis = GalerkinSystem::assemble(&b, &mol, &[&w, &d, &z, &z], SystemKind::Viscoelastic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_state(&mut rng, 12);
        let mut y = x.clone();
        y.extend(vec![0.0; 12]);
        let s = 0.4;
        let rm = rhs(&mhd.tables_at(s), &x).unwrap();
        let rv = rhs(&vis.tables_at(s), &y).unwrap();
        for i in 0..12 {
            assert!((rm[i] - rv[i]).abs() <= 1e-12 * (1.0 + rm[i].abs()));
        }
        assert!(rv[12..].iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn mhd_without_magnetic_field_is_navier_stokes() {
        let b = basis(32, 6);
        let g = b.grid;
        let w = background(&g, 1, 0.7);
        let z = PeriodicField::zeros(g, 0.7, vec![1]);
        let mol = Mollifier::new(2.0 * g.spacing()).unwrap();
        let mhd = GalerkinSystem::assemble(&b, &mol, &[&w, &z], SystemKind::Mhd).unwrap();
        let ns = GalerkinSystem::assemble(&b, &mol, &[&w], SystemKind::NavierStokes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mu = random_state(&mut rng, 6);
        let mut x = mu.clone();
        x.extend(vec![0.0; 6]);
        let rm = rhs(&mhd.tables_at(0.1), &x).unwrap();
        let rn = rhs(&ns.tables_at(0.1), &mu).unwrap();
        for i in 0..6 {
            assert_eq!(rm[i], rn[i]);
            // magnetic block: forced only by the (zero) field
            assert_eq!(rm[6 + i], 0.0);
        }
    }

    #[test]
    fn forcing_constant_prefactors() {
        assert_eq!(forcing_constant(SystemKind::Mhd, &ForcingNorms::zeros(SystemKind::Mhd)), 0.0);
        let m = ForcingNorms { h_minus1: vec![0.3, 0.2], l4: vec![0.5, 0.1] };
        let v = ForcingNorms { h_minus1: vec![0.3, 0.2, 0.0, 0.0], l4: vec![0.5, 0.1, 0.0, 0.0] };
        let cm = forcing_constant(SystemKind::Mhd, &m);
        let cv = forcing_constant(SystemKind::Viscoelastic, &v);
        assert!((cv - 4.0 * cm).abs() < 1e-15);
        assert!((cm - 8.0 * (0.13 + 0.26f64.powi(2))).abs() < 1e-15);
    }
}
