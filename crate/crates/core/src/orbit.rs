//! Period integration of the Galerkin ODEs, the Poincaré-map fixed point and
//! the energy audit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{argument, LabError, Result};
use crate::galerkin::{rhs_into, CoeffState, GalerkinSystem, SystemKind};

/// Constants of the energy inequality for one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub kind: SystemKind,
    pub c2: f64,
    pub decay_rate: f64,
    pub period: f64,
    /// `C₂T / (1 − e^{−T·rate})`.
    pub rho: f64,
    /// Radius of the ball mapped into itself by the period map:
    /// `max(ρ, √ρ)`, since the energy bound controls `‖c‖²`.
    pub ball_radius: f64,
}

impl EnergyBudget {
    pub fn new(kind: SystemKind, c2: f64, period: f64) -> Result<Self> {
        if !(period > 0.0) || !(c2 >= 0.0) {
            return argument(format!("budget needs positive period and non-negative C2 (T = {period}, C2 = {c2})"));
        }
        let decay_rate = kind.decay_rate();
        let rho = c2 * period / (1.0 - (-period * decay_rate).exp());
        Ok(Self { kind, c2, decay_rate, period, rho, ball_radius: rho.max(rho.sqrt()) })
    }

    /// Integrated Gronwall bound on `‖c(s)‖²`.
    pub fn envelope(&self, e0: f64, s: f64) -> f64 {
        let q = (-self.decay_rate * s).exp();
        e0 * q + self.c2 / self.decay_rate * (1.0 - q)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitResult {
    pub kind: SystemKind,
    pub k: usize,
    pub times: Vec<f64>,
    /// Flattened states (velocity block first).
    pub states: Vec<Vec<f64>>,
    /// `‖μ‖² + Σ‖α_n‖²`.
    pub energy: Vec<f64>,
    /// `H¹` sums `E + ‖∇U‖² + Σ‖∇A_n‖²`.
    pub dissipation: Vec<f64>,
    /// Assembled right-hand side of the energy identity (`dE/ds`).
    pub rate: Vec<f64>,
    /// Energy of the run with halved steps, at the same times.
    pub fine_energy: Vec<f64>,
    /// `‖c_h(T) − c_{h/2}(T)‖`.
    pub step_error: f64,
    /// `‖c(T) − c(0)‖`.
    pub fixed_point_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projections: usize,
    pub newton_steps: usize,
}

impl OrbitResult {
    pub fn start(&self) -> CoeffState {
        CoeffState::from_flat(self.times[0], self.k, &self.states[0])
    }

    pub fn end(&self) -> CoeffState {
        CoeffState::from_flat(*self.times.last().unwrap(), self.k, self.states.last().unwrap())
    }

    /// Largest distance between two orbits sampled at the same times.
    pub fn distance(&self, other: &OrbitResult) -> f64 {
        self.states.iter().zip(&other.states).map(|(a, b)| norm(&sub(a, b))).fold(0.0, f64::max)
    }

    /// Orbit dump as CSV: `s,energy,dissipation,rate,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,energy,dissipation,rate,residual\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                self.times[i], self.energy[i], self.dissipation[i], self.rate[i], self.fixed_point_residual
            ));
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Fixed-step classical Runge–Kutta; returns the states at every step.
fn rk4(sys: &GalerkinSystem, start: &[f64], s0: f64, period: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let n = start.len();
    let dt = period / steps as f64;
    let mut x = start.to_vec();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x.clone());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let s = s0 + step as f64 * dt;
        let t0 = sys.tables_at(s);
        let th = sys.tables_at(s + 0.5 * dt);
        let t1 = sys.tables_at(s + dt);
        rhs_into(&t0, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs_into(&th, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs_into(&th, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        rhs_into(&t1, &tmp, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonConvergence {
                stage: "period integration".into(),
                detail: format!("non-finite state at s = {}", s + dt),
            });
        }
        path.push(x.clone());
    }
    Ok(path)
}

/// Period map `c ↦ c(T)`.
pub fn period_map(sys: &GalerkinSystem, start: &[f64], period: f64, steps: usize) -> Result<Vec<f64>> {
    Ok(rk4(sys, start, 0.0, period, steps)?.pop().unwrap())
}

/// Integrates one period from `start` (at `s = 0`) with traces and a
/// step-halving error estimate.
pub fn integrate_period(sys: &GalerkinSystem, start: &CoeffState, budget: &EnergyBudget, steps: usize) -> Result<OrbitResult> {
    if steps < 16 {
        return argument(format!("at least 16 steps per period required, got {steps}"));
    }
    let x0 = start.flat();
    if x0.len() != sys.dimension() {
        return argument(format!("state has dimension {}, system expects {}", x0.len(), sys.dimension()));
    }
    if start.s != 0.0 {
        return argument("period integration starts at s = 0");
    }
    let period = budget.period;
    let coarse = rk4(sys, &x0, 0.0, period, steps)?;
    let fine = rk4(sys, &x0, 0.0, period, 2 * steps)?;
    let times: Vec<f64> = (0..=steps).map(|i| period * i as f64 / steps as f64).collect();
    let mut energy = Vec::with_capacity(steps + 1);
    let mut dissipation = Vec::with_capacity(steps + 1);
    let mut rate = Vec::with_capacity(steps + 1);
    for (x, &s) in coarse.iter().zip(&times) {
        let t = sys.energy_terms(x, s);
        energy.push(t.energy);
        dissipation.push(t.h1());
        rate.push(t.rate);
    }
    let fine_energy = (0..=steps).map(|i| fine[2 * i].iter().map(|v| v * v).sum()).collect();
    let end = coarse.last().unwrap();
    let step_error = norm(&sub(end, fine.last().unwrap()));
    let fixed_point_residual = norm(&sub(end, &x0));
    Ok(OrbitResult {
        kind: sys.kind,
        k: sys.k,
        times,
        states: coarse,
        energy,
        dissipation,
        rate,
        fine_energy,
        step_error,
        fixed_point_residual,
        converged: false,
        iterations: 0,
        projections: 0,
        newton_steps: 0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub steps: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 200, damping: 0.5, steps: 256 }
    }
}

fn project(x: &mut [f64], radius: f64) -> bool {
    let r = norm(x);
    if r > radius && r > 0.0 {
        for v in x.iter_mut() {
            *v *= radius / r;
        }
        return true;
    }
    false
}

/// Solves `Φ(c) = c` for the period map by damped iteration with a Newton
/// fallback (finite-difference Jacobian of `Φ − id`) when progress stalls.
pub fn poincare_fixed_point(sys: &GalerkinSystem, budget: &EnergyBudget, st: &FixedPointSettings) -> Result<OrbitResult> {
    if !(st.tol > 0.0) || !(st.damping > 0.0 && st.damping <= 1.0) {
        return argument("fixed point needs tol > 0 and damping in (0, 1]");
    }
    let dim = sys.dimension();
    let period = budget.period;
    let mut x = vec![0.0; dim];
    let mut phi = period_map(sys, &x, period, st.steps)?;
    let mut res = norm(&sub(&phi, &x));
    let mut best = (res, x.clone());
    let mut projections = 0;
    let mut newton_steps = 0;
    let mut stalls = 0;
    let mut iters = 0;
    while res > st.tol && iters < st.max_iters {
        iters += 1;
        let prev = res;
        let mut next: Vec<f64>;
        if stalls >= 2 || iters > 8 {
            // Newton step on F(c) = Φ(c) − c
            let f0 = sub(&phi, &x);
            let mut jac = DMatrix::zeros(dim, dim);
            for j in 0..dim {
                let h = 1e-6 * (1.0 + norm(&x));
                let mut xp = x.clone();
                xp[j] += h;
                let fp = sub(&period_map(sys, &xp, period, st.steps)?, &xp);
                for i in 0..dim {
                    jac[(i, j)] = (fp[i] - f0[i]) / h;
                }
            }
            let delta = jac.lu().solve(&(-DVector::from_vec(f0))).ok_or_else(|| LabError::NonConvergence {
                stage: "poincare fixed point".into(),
                detail: "singular Jacobian of the period map".into(),
            })?;
            next = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            newton_steps += 1;
        } else {
            next = x.iter().zip(&phi).map(|(a, p)| (1.0 - st.damping) * a + st.damping * p).collect();
        }
        if project(&mut next, budget.ball_radius) {
            projections += 1;
        }
        x = next;
        phi = period_map(sys, &x, period, st.steps)?;
        res = norm(&sub(&phi, &x));
        if res < best.0 {
            best = (res, x.clone());
        }
        stalls = if res > 0.9 * prev { stalls + 1 } else { 0 };
    }
    let (best_res, best_x) = best;
    let mut orbit = integrate_period(sys, &CoeffState::from_flat(0.0, sys.k, &best_x), budget, st.steps)?;
    orbit.converged = best_res <= st.tol;
    orbit.iterations = iters;
    orbit.projections = projections;
    orbit.newton_steps = newton_steps;
    Ok(orbit)
}

/// Checks of the energy identity and inequality along an orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyAudit {
    /// Largest `|dE/ds (finite difference) − assembled rate|` at interior samples.
    pub identity_error: f64,
    /// Largest step-halving estimate of the finite-difference derivative.
    pub identity_estimate: f64,
    /// Rounding floor of the finite difference.
    pub identity_floor: f64,
    pub identity_ok: bool,
    /// Smallest `C₂ − (dE/ds + rate·(E + ‖∇‖²))` along the orbit.
    pub inequality_slack: f64,
    pub inequality_ok: bool,
    /// `rate · ∫₀ᵀ (E + ‖∇‖²) ds`.
    pub dissipation_integral: f64,
    /// `C₂·T`.
    pub dissipation_bound: f64,
    pub dissipation_ok: bool,
}

/// Fourth-order central differences at interior samples `2..n-2`.
fn central_difference(e: &[f64], dt: f64) -> Vec<(usize, f64)> {
    (2..e.len().saturating_sub(2))
        .map(|i| (i, (e[i - 2] - 8.0 * e[i - 1] + 8.0 * e[i + 1] - e[i + 2]) / (12.0 * dt)))
        .collect()
}

pub fn energy_audit(orbit: &OrbitResult, budget: &EnergyBudget) -> Result<EnergyAudit> {
    let n = orbit.times.len();
    if n < 2 {
        return argument("energy audit needs at least two samples");
    }
    let dt = orbit.times[1] - orbit.times[0];
    let coarse = central_difference(&orbit.energy, dt);
    // the fine run sampled every other step: same stencil on the fine spacing
    // is unavailable, so compare against the fine energies on the coarse stencil
    let fine = central_difference(&orbit.fine_energy, dt);
    let emax = orbit.energy.iter().cloned().fold(0.0, f64::max);
    let floor = 64.0 * f64::EPSILON * emax / dt;
    let mut err = 0.0f64;
    let mut est = 0.0f64;
    let mut ok = true;
    for ((i, dc), (_, df)) in coarse.iter().zip(&fine) {
        let e = (dc - orbit.rate[*i]).abs();
        let h = (dc - df).abs();
        err = err.max(e);
        est = est.max(h);
        // differentiation error of the stencil, bounded by the next-order term
        let stencil = if *i >= 2 && *i + 2 < n {
            let d5 = (orbit.rate[i - 2] - 4.0 * orbit.rate[i - 1] + 6.0 * orbit.rate[*i] - 4.0 * orbit.rate[i + 1]
                + orbit.rate[i + 2])
                / dt.powi(4);
            d5.abs() * dt.powi(4) / 30.0
        } else {
            0.0
        };
        if e > 10.0 * (h + stencil) + floor {
            ok = false;
        }
    }
    let mut slack = f64::INFINITY;
    for i in 0..n {
        slack = slack.min(budget.c2 - (orbit.rate[i] + budget.decay_rate * orbit.dissipation[i]));
    }
    let scale = budget.c2 + orbit.rate.iter().fold(0.0f64, |m, r| m.max(r.abs())) + orbit.dissipation.iter().cloned().fold(0.0, f64::max);
    let inequality_ok = slack >= -1e-9 * scale;
    // trapezoid rule (periodic integrand)
    let integral: f64 = dt * (orbit.dissipation[..n - 1].iter().sum::<f64>());
    let dissipation_integral = budget.decay_rate * integral;
    let dissipation_bound = budget.c2 * budget.period;
    Ok(EnergyAudit {
        identity_error: err,
        identity_estimate: est,
        identity_floor: floor,
        identity_ok: ok,
        inequality_slack: slack,
        inequality_ok,
        dissipation_integral,
        dissipation_bound,
        dissipation_ok: dissipation_integral <= dissipation_bound * (1.0 + 1e-9) + 1e-300,
    })
}

/// Outcome of the trap-invariance experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrapReport {
    pub starts: usize,
    /// Largest `‖c(s)‖² − envelope(s)` over all starts and samples.
    pub worst_excess: f64,
    /// Slack allowed for the integrator.
    pub slack: f64,
    pub ok: bool,
}

/// Integrates from `starts` random points of the trap ball and compares
/// against the Gronwall envelope.
pub fn trap_experiment(sys: &GalerkinSystem, budget: &EnergyBudget, starts: usize, steps: usize, seed: u64) -> Result<TrapReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = sys.dimension();
    let mut worst = f64::NEG_INFINITY;
    let mut slack = 0.0f64;
    for _ in 0..starts {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&x);
        let target = budget.ball_radius * rng.gen_range(0.0f64..1.0).powf(1.0 / dim as f64);
        for v in x.iter_mut() {
            *v *= target / r;
        }
        let coarse = rk4(sys, &x, 0.0, budget.period, steps)?;
        let fine = rk4(sys, &x, 0.0, budget.period, 2 * steps)?;
        let e0: f64 = x.iter().map(|v| v * v).sum();
        for (i, c) in coarse.iter().enumerate() {
            let s = budget.period * i as f64 / steps as f64;
            let e: f64 = c.iter().map(|v| v * v).sum();
            let ef: f64 = fine[2 * i].iter().map(|v| v * v).sum();
            slack = slack.max(10.0 * (e - ef).abs() + 1e-12 * e0.max(1e-300));
            worst = worst.max(e - budget.envelope(e0, s));
        }
    }
    Ok(TrapReport { starts, worst_excess: worst, slack, ok: worst <= slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::PeriodicField;
    use crate::galerkin::{build_basis, BasisSettings, Mollifier};
    use crate::grid::Grid;
    use crate::spectral::Spectral;

    fn system(kind: SystemKind, forcing: f64) -> GalerkinSystem {
        let grid = Grid::new(6.0, 32).unwrap();
        let basis = build_basis(grid, &BasisSettings { k: 6, ..Default::default() }).unwrap();
        let sp = Spectral::new(grid);
        // stationary smooth background
        let psi = grid.sample(|y| forcing * (-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / 2.0).exp());
        let g = sp.gradient(&psi);
        let mut w = PeriodicField::zeros(grid, 1.0, vec![]);
        w.coeffs[0] = [g[1].clone(), g[0].iter().map(|v| -v).collect(), vec![0.0; grid.len()]];
        let fields: Vec<&PeriodicField> = (0..=kind.columns()).map(|_| &w).collect();
        GalerkinSystem::assemble(&basis, &Mollifier::new(2.0 * grid.spacing()).unwrap(), &fields, kind).unwrap()
    }

    #[test]
    fn zero_forcing_zero_orbit() {
        let sys = system(SystemKind::Mhd, 0.0);
        let b = EnergyBudget::new(SystemKind::Mhd, 0.0, 2f64.ln()).unwrap();
        let o = integrate_period(&sys, &CoeffState::zeros(SystemKind::Mhd, 6), &b, 32).unwrap();
        assert!(o.states.iter().flatten().all(|v| *v == 0.0));
        let f = poincare_fixed_point(&sys, &b, &FixedPointSettings { steps: 32, ..Default::default() }).unwrap();
        assert_eq!(f.fixed_point_residual, 0.0);
        let a = energy_audit(&o, &b).unwrap();
        assert!(a.identity_ok && a.inequality_ok && a.dissipation_ok);
    }

    fn linearized(sys: &GalerkinSystem) -> (DMatrix<f64>, DVector<f64>) {
        let t = sys.tables_at(0.0);
        let dim = sys.dimension();
        let mut z = vec![0.0; dim];
        let mut f0 = vec![0.0; dim];
        rhs_into(&t, &z, &mut f0);
        let mut m = DMatrix::zeros(dim, dim);
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            z[j] = 1.0;
            rhs_into(&t, &z, &mut col);
            for i in 0..dim {
                m[(i, j)] = col[i] - f0[i];
            }
            z[j] = 0.0;
        }
        (m, DVector::from_vec(f0))
    }

    #[test]
    fn linear_flow_matches_matrix_exponential() {
        let mut sys = system(SystemKind::Mhd, 0.3);
        sys.quadratic.iter_mut().for_each(|v| *v = 0.0);
        let period = 2f64.ln();
        let b = EnergyBudget::new(SystemKind::Mhd, 1.0, period).unwrap();
        let (m, f) = linearized(&sys);
        let dim = sys.dimension();
        let x0: Vec<f64> = (0..dim).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let o = integrate_period(&sys, &CoeffState::from_flat(0.0, 6, &x0), &b, 256).unwrap();
        let e = (m.clone() * period).exp();
        let minv = m.clone().try_inverse().unwrap();
        let exact = &e * DVector::from_vec(x0) + &minv * (&e - DMatrix::identity(dim, dim)) * &f;
        let end = o.states.last().unwrap();
        for i in 0..dim {
            assert!((end[i] - exact[i]).abs() < 1e-8, "{} vs {}", end[i], exact[i]);
        }
        // fixed point of the linear period map is the steady state −M⁻¹f
        let fp = poincare_fixed_point(&sys, &b, &FixedPointSettings::default()).unwrap();
        let steady = -(&minv * &f);
        for i in 0..dim {
            assert!((fp.states[0][i] - steady[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn fixed_point_is_periodic_and_audited() {
        let sys = system(SystemKind::Mhd, 0.5);
        let b = EnergyBudget::new(SystemKind::Mhd, 1.0, 2f64.ln()).unwrap();
        let f = poincare_fixed_point(&sys, &b, &FixedPointSettings::default()).unwrap();
        assert!(f.converged, "residual {}", f.fixed_point_residual);
        assert!(f.fixed_point_residual <= 1e-10);
        let again = integrate_period(&sys, &f.end().with_s(0.0), &b, 256).unwrap();
        assert!(again.distance(&f) <= 2e-10);
        let a = energy_audit(&f, &b).unwrap();
        assert!(a.identity_ok, "{a:?}");
    }

    #[test]
    fn budget_formula() {
        let b = EnergyBudget::new(SystemKind::Viscoelastic, 2.0, 0.5).unwrap();
        assert!((b.rho - 2.0 * 0.5 / (1.0 - (-0.5f64 / 64.0).exp())).abs() < 1e-12);
        assert!(b.ball_radius >= b.rho);
        assert!((b.envelope(3.0, 0.0) - 3.0).abs() < 1e-15);
    }
}
