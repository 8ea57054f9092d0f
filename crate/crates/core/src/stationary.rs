//! Algebraic Galerkin system of the stationary Leray profiles: Newton solve
//! and the sphere sign certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::galerkin::{rhs_into, CoeffTables, GalerkinBasis, GalerkinSystem};
use crate::spectral::{Spectral, Vec3Field};

/// `P(x)` for an `s`-independent system.
pub struct AlgebraicSystem<'a> {
    pub system: &'a GalerkinSystem,
    pub tables: CoeffTables<'a>,
    pub c2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarySettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for StationarySettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 60 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryReport {
    pub solution: Vec<f64>,
    pub residual: f64,
    pub norm: f64,
    /// `8√C₂`.
    pub sphere_radius: f64,
    pub inside_sphere: bool,
    pub converged: bool,
    pub newton_steps: usize,
    pub gradient_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereCertificate {
    pub radius: f64,
    pub samples: usize,
    /// Largest `P(x)·x + |x|²/32 − C₂`.
    pub worst_slack: f64,
    /// Largest `P(x)·x`.
    pub worst_pairing: f64,
    /// Allowed slack `1e-6·(1 + C₂)`.
    pub allowance: f64,
    pub ok: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> AlgebraicSystem<'a> {
    pub fn new(system: &'a GalerkinSystem, c2: f64) -> Result<Self> {
        if !system.is_stationary() {
            return argument("stationary solve needs s-independent backgrounds");
        }
        Ok(Self { system, tables: system.tables_at(0.0), c2 })
    }

    pub fn dimension(&self) -> usize {
        self.system.dimension()
    }

    pub fn sphere_radius(&self) -> f64 {
        8.0 * self.c2.sqrt()
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return argument(format!("vector has dimension {}, system expects {}", x.len(), self.dimension()));
        }
        let mut out = vec![0.0; x.len()];
        rhs_into(&self.tables, x, &mut out);
        Ok(out)
    }

    fn jacobian(&self, x: &[f64], f0: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let h = 1e-6 * (1.0 + norm(x));
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        for j in 0..n {
            xp[j] += h;
            rhs_into(&self.tables, &xp, &mut fp);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f0[i]) / h;
            }
            xp[j] = x[j];
        }
        jac
    }

    /// Newton with backtracking from `x = 0`; damped gradient steps on
    /// `‖P‖²` when the Newton direction fails.
    pub fn solve(&self, st: &StationarySettings) -> Result<StationaryReport> {
        if !(st.tol > 0.0) {
            return argument("tolerance must be positive");
        }
        let n = self.dimension();
        let mut x = vec![0.0; n];
        let mut f = self.residual(&x)?;
        let mut r = norm(&f);
        let (mut newton_steps, mut gradient_steps) = (0, 0);
        let mut iters = 0;
        while r > st.tol && iters < st.max_iters {
            iters += 1;
            let jac = self.jacobian(&x, &f);
            let mut accepted = false;
            if let Some(d) = jac.clone().lu().solve(&(-DVector::from_column_slice(&f))) {
                let mut t = 1.0;
                while t > 1e-6 {
                    let xt: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
                    let ft = self.residual(&xt)?;
                    let rt = norm(&ft);
                    if rt < (1.0 - 1e-4 * t) * r {
                        x = xt;
                        f = ft;
                        r = rt;
                        accepted = true;
                        newton_steps += 1;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if !accepted {
                // steepest descent on ½‖P‖²
                let g = jac.transpose() * DVector::from_column_slice(&f);
                let mut t = r * r / g.norm_squared().max(1e-300);
                while t > 1e-12 {
                    let xt: Vec<f64> = x.iter().zip(g.iter()).map(|(a, b)| a - t * b).collect();
                    let ft = self.residual(&xt)?;
                    let rt = norm(&ft);
                    if rt < r {
                        x = xt;
                        f = ft;
                        r = rt;
                        gradient_steps += 1;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        let radius = self.sphere_radius();
        let nx = norm(&x);
        Ok(StationaryReport {
            solution: x,
            residual: r,
            norm: nx,
            sphere_radius: radius,
            inside_sphere: nx <= radius * (1.0 + 1e-12) + 1e-300,
            converged: r <= st.tol,
            newton_steps,
            gradient_steps,
        })
    }

    /// Samples `P(x)·x` on a sphere (radius `8√C₂` unless given).
    pub fn sphere_certificate(&self, samples: usize, radius: Option<f64>, seed: u64) -> Result<SphereCertificate> {
        use rand::{Rng, SeedableRng};
        if samples == 0 {
            return argument("certificate needs at least one sample");
        }
        let radius = radius.unwrap_or_else(|| self.sphere_radius());
        let n = self.dimension();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst_slack = f64::NEG_INFINITY;
        let mut worst_pairing = f64::NEG_INFINITY;
        for _ in 0..samples {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = norm(&x);
            x.iter_mut().for_each(|v| *v *= radius / r);
            let p = self.residual(&x)?;
            let pair: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
            worst_pairing = worst_pairing.max(pair);
            worst_slack = worst_slack.max(pair + radius * radius / 32.0 - self.c2);
        }
        let allowance = 1e-6 * (1.0 + self.c2);
        let ok = worst_slack <= allowance && (radius == 0.0 || worst_pairing < 0.0);
        Ok(SphereCertificate { radius, samples, worst_slack, worst_pairing, allowance, ok })
    }
}

/// Residual of the stationary weak form against every mode, evaluated in
/// field space: `U`, `A` are synthesized on the grid and all products and
/// derivatives are taken there. Velocity background first in `backgrounds`.
pub fn weak_form_residual(basis: &GalerkinBasis, backgrounds: &[Vec3Field], x: &[f64]) -> Result<Vec<f64>> {
    let k = basis.k();
    if x.len() != k * backgrounds.len() {
        return argument("coefficient vector does not match backgrounds");
    }
    let grid = basis.grid;
    let n = grid.len();
    let sp = Spectral::new(grid);
    let vol = grid.cell_volume();
    let ys = grid.sample_vector(|y| y);
    let fields: Vec<Vec3Field> = x.chunks(k).map(|c| basis.synthesize(c)).collect();
    let grads = |f: &Vec3Field| -> Vec<Vec3Field> { (0..3).map(|a| sp.gradient(&f[a])).collect() };
    let adv = |v: &Vec3Field, g: &[Vec3Field]| -> Vec3Field {
        let mut o: Vec3Field = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for a in 0..3 {
            for i in 0..n {
                o[a][i] = v[0][i] * g[a][0][i] + v[1][i] * g[a][1][i] + v[2][i] * g[a][2][i];
            }
        }
        o
    };
    let fg: Vec<Vec<Vec3Field>> = fields.iter().map(|f| grads(f)).collect();
    let bg: Vec<Vec<Vec3Field>> = backgrounds.iter().map(|f| grads(f)).collect();
    let cols = backgrounds.len() - 1;
    // strong residual of each equation (all terms moved to one side)
    let mut eqs: Vec<Vec3Field> = Vec::with_capacity(1 + cols);
    for e in 0..=cols {
        let (x_f, x_g, b_f, b_g) = (&fields[e], &fg[e], &backgrounds[e], &bg[e]);
        let mut r: Vec3Field = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for a in 0..3 {
            let lap_x = sp.laplacian(&x_f[a]);
            let lap_b = sp.laplacian(&b_f[a]);
            for i in 0..n {
                let yx = ys[0][i] * x_g[a][0][i] + ys[1][i] * x_g[a][1][i] + ys[2][i] * x_g[a][2][i];
                let yb = ys[0][i] * b_g[a][0][i] + ys[1][i] * b_g[a][1][i] + ys[2][i] * b_g[a][2][i];
                // Δ(X + B) + (X + B) + y·∇(X + B), i.e. −ℒ of the full field
                r[a][i] = lap_x[i] + x_f[a][i] + yx + lap_b[i] + b_f[a][i] + yb;
            }
        }
        let u_full: Vec3Field = std::array::from_fn(|a| (0..n).map(|i| fields[0][a][i] + backgrounds[0][a][i]).collect());
        let u_grad: Vec<Vec3Field> = (0..3).map(|a| std::array::from_fn(|b| (0..n).map(|i| fg[0][a][b][i] + bg[0][a][b][i]).collect())).collect();
        if e == 0 {
            // −(u·∇u − Σ a_n·∇a_n)
            let uu = adv(&u_full, &u_grad);
            for a in 0..3 {
                for i in 0..n {
                    r[a][i] -= uu[a][i];
                }
            }
            for c in 1..=cols {
                let a_full: Vec3Field = std::array::from_fn(|a| (0..n).map(|i| fields[c][a][i] + backgrounds[c][a][i]).collect());
                let a_grad: Vec<Vec3Field> = (0..3).map(|a| std::array::from_fn(|b| (0..n).map(|i| fg[c][a][b][i] + bg[c][a][b][i]).collect())).collect();
                let aa = adv(&a_full, &a_grad);
                for a in 0..3 {
                    for i in 0..n {
                        r[a][i] += aa[a][i];
                    }
                }
            }
        } else {
            // −(u·∇a − a·∇u)
            let a_full: Vec3Field = std::array::from_fn(|a| (0..n).map(|i| fields[e][a][i] + backgrounds[e][a][i]).collect());
            let a_grad: Vec<Vec3Field> = (0..3).map(|a| std::array::from_fn(|b| (0..n).map(|i| fg[e][a][b][i] + bg[e][a][b][i]).collect())).collect();
            let ua = adv(&u_full, &a_grad);
            let au = adv(&a_full, &u_grad);
            for a in 0..3 {
                for i in 0..n {
                    r[a][i] -= ua[a][i] - au[a][i];
                }
            }
        }
        eqs.push(r);
    }
    let mut out = Vec::with_capacity(x.len());
    for r in &eqs {
        for m in &basis.modes {
            let mut acc = 0.0;
            for a in 0..3 {
                acc += r[a].iter().zip(&m[a]).map(|(p, q)| p * q).sum::<f64>();
            }
            out.push(acc * vol);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::PeriodicField;
    use crate::galerkin::{build_basis, BasisSettings, Mollifier, SystemKind};
    use crate::grid::Grid;
    use crate::orbit::{integrate_period, EnergyBudget};

    fn setup(kind: SystemKind, amp: f64) -> (GalerkinBasis, GalerkinSystem, Vec<Vec3Field>) {
        let grid = Grid::new(6.0, 48).unwrap();
        let basis = build_basis(grid, &BasisSettings { k: 6, ..Default::default() }).unwrap();
        let sp = Spectral::new(grid);
        let mut fields = Vec::new();
        for c in 0..=kind.columns() {
            let psi = grid.sample(|y| {
                let r2 = (y[0] - 0.3 * c as f64).powi(2) + y[1] * y[1] + y[2] * y[2];
                amp * (-r2 / 2.0).exp()
            });
            let g = sp.gradient(&psi);
            let mut w = PeriodicField::zeros(grid, 1.0, vec![]);
            w.coeffs[0] = [g[1].clone(), g[0].iter().map(|v| -v).collect(), vec![0.0; grid.len()]];
            fields.push(w);
        }
        let refs: Vec<&PeriodicField> = fields.iter().collect();
        let sys = GalerkinSystem::assemble(&basis, &Mollifier::identity(), &refs, kind).unwrap();
        let raw = fields.into_iter().map(|f| f.coeffs[0].clone()).collect();
        (basis, sys, raw)
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (_, sys, _) = setup(SystemKind::Mhd, 0.0);
        let alg = AlgebraicSystem::new(&sys, 0.0).unwrap();
        let r = alg.solve(&StationarySettings::default()).unwrap();
        assert!(r.converged && r.norm == 0.0 && r.newton_steps == 0);
        let cert = alg.sphere_certificate(50, Some(1.0), 1).unwrap();
        assert!(cert.worst_pairing < 0.0);
    }

    #[test]
    fn newton_converges_and_matches_weak_form() {
        let (basis, sys, raw) = setup(SystemKind::Mhd, 0.2);
        let alg = AlgebraicSystem::new(&sys, 1.0).unwrap();
        let r = alg.solve(&StationarySettings { tol: 1e-12, max_iters: 40 }).unwrap();
        assert!(r.converged, "residual {}", r.residual);
        let weak = weak_form_residual(&basis, &raw, &r.solution).unwrap();
        let p0 = alg.residual(&vec![0.0; 12]).unwrap();
        let scale = norm(&p0);
        assert!(norm(&weak) <= 1e-6 * scale, "weak residual {} (scale {scale})", norm(&weak));
        // stationary solutions are fixed points of the period map
        let budget = EnergyBudget::new(SystemKind::Mhd, 1.0, 2f64.ln()).unwrap();
        let orbit = integrate_period(&sys, &crate::galerkin::CoeffState::from_flat(0.0, 6, &r.solution), &budget, 64).unwrap();
        assert!(orbit.fixed_point_residual <= 1e-10);
    }

    #[test]
    fn quadratic_part_agrees_with_time_dependent_rhs() {
        let (_, sys, _) = setup(SystemKind::Viscoelastic, 0.1);
        let alg = AlgebraicSystem::new(&sys, 0.0).unwrap();
        let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let z = vec![0.0; 24];
        let p = alg.residual(&x).unwrap();
        let lin = {
            let mut xm = x.clone();
            xm.iter_mut().for_each(|v| *v = -*v);
            alg.residual(&xm).unwrap()
        };
        let p0 = alg.residual(&z).unwrap();
        // quadratic part: (P(x) + P(−x))/2 − P(0)
        let quad: Vec<f64> = (0..24).map(|i| 0.5 * (p[i] + lin[i]) - p0[i]).collect();
        let direct = crate::galerkin::system::quadratic_part(&sys.tables_at(0.7), &x);
        for i in 0..24 {
            assert!((quad[i] - direct[i]).abs() <= 1e-12 * (1.0 + direct[i].abs()));
        }
    }

    #[test]
    fn sign_certificate_on_the_sphere() {
        let (_, sys, _) = setup(SystemKind::Mhd, 0.2);
        let alg = AlgebraicSystem::new(&sys, 0.05).unwrap();
        let c = alg.sphere_certificate(200, None, 7).unwrap();
        assert!(c.ok, "{c:?}");
    }
}
