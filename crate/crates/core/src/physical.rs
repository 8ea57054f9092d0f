//! Physical-space candidates rebuilt from profile orbits: evaluators, the
//! dyadic distance to the heat flow, local energy tables, the local energy
//! inequality residual and convergence to the data.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::background::{HeatBackground, PeriodicField};
use crate::error::{argument, domain, Result};
use crate::galerkin::{GalerkinBasis, Mollifier, SystemKind};
use crate::grid::Grid;
use crate::orbit::OrbitResult;
use crate::pressure::riesz_pressure;
use crate::quadrature::{Rule, SphereRule};
use crate::similarity::{map_to_profile, PhysicalSample, SimilarityMap};
use crate::smooth::bell;
use crate::spectral::{Spectral, Vec3Field};

/// Coefficient trajectory on a uniform `s` grid starting at 0. A single
/// state stands for an `s`-independent profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileTrajectory {
    pub k: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl ProfileTrajectory {
    pub fn stationary(k: usize, state: Vec<f64>) -> Self {
        Self { k, times: vec![0.0], states: vec![state] }
    }

    pub fn from_orbit(orbit: &OrbitResult) -> Self {
        Self { k: orbit.k, times: orbit.times.clone(), states: orbit.states.clone() }
    }

    /// Concatenates consecutive one-period orbits (shared endpoints dropped).
    pub fn from_orbits(orbits: &[OrbitResult]) -> Result<Self> {
        let Some(first) = orbits.first() else {
            return argument("no orbits to concatenate");
        };
        let mut out = Self::from_orbit(first);
        for o in &orbits[1..] {
            let shift = *out.times.last().unwrap();
            if o.times.len() != first.times.len() {
                return argument("orbits use different step counts");
            }
            for (t, x) in o.times.iter().zip(&o.states).skip(1) {
                out.times.push(shift + t);
                out.states.push(x.clone());
            }
        }
        Ok(out)
    }

    pub fn is_stationary(&self) -> bool {
        self.states.len() == 1
    }

    pub fn span(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation in `s`, reduced modulo the span.
    pub fn coeffs_at(&self, s: f64) -> Vec<f64> {
        if self.is_stationary() {
            return self.states[0].clone();
        }
        let span = self.span();
        let s = s.rem_euclid(span);
        let steps = self.times.len() - 1;
        let pos = s / span * steps as f64;
        let i = (pos.floor() as usize).min(steps - 1);
        let w = pos - i as f64;
        if w == 0.0 {
            return self.states[i].clone();
        }
        self.states[i].iter().zip(&self.states[i + 1]).map(|(a, b)| (1.0 - w) * a + w * b).collect()
    }
}

/// Trilinear stencil `(node, weight)` of `y`, or `None` outside the nodes.
fn stencil(grid: &Grid, y: [f64; 3]) -> Option<[(usize, f64); 8]> {
    let h = grid.spacing();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let u = (y[a] + grid.half_width) / h;
        if !(u >= 0.0) || u > (grid.n - 1) as f64 {
            return None;
        }
        let i = (u.floor() as usize).min(grid.n - 2);
        base[a] = i;
        frac[a] = u - i as f64;
    }
    let mut out = [(0, 0.0); 8];
    for (c, slot) in out.iter_mut().enumerate() {
        let d = [(c >> 2) & 1, (c >> 1) & 1, c & 1];
        let mut w = 1.0;
        for a in 0..3 {
            w *= if d[a] == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        *slot = (grid.index(base[0] + d[0], base[1] + d[1], base[2] + d[2]), w);
    }
    Some(out)
}

/// Fourth-order central differences (second order on the outer layers);
/// `out[a][b] = ∂_b f_a`.
pub fn fd_gradient(grid: &Grid, f: &Vec3Field) -> [Vec3Field; 3] {
    let n = grid.n;
    let h = grid.spacing();
    let mut out: [Vec3Field; 3] = std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; grid.len()]));
    for idx in 0..grid.len() {
        let ijk = grid.unravel(idx);
        let ijk = [ijk.0, ijk.1, ijk.2];
        for b in 0..3 {
            let at = |off: isize| {
                let mut p = ijk;
                p[b] = (p[b] as isize + off) as usize;
                grid.index(p[0], p[1], p[2])
            };
            let i = ijk[b];
            for a in 0..3 {
                let v = &f[a];
                out[a][b][idx] = if i >= 2 && i + 2 < n {
                    (-v[at(2)] + 8.0 * v[at(1)] - 8.0 * v[at(-1)] + v[at(-2)]) / (12.0 * h)
                } else if i >= 1 && i + 1 < n {
                    (v[at(1)] - v[at(-1)]) / (2.0 * h)
                } else if i == 0 {
                    (-3.0 * v[at(0)] + 4.0 * v[at(1)] - v[at(2)]) / (2.0 * h)
                } else {
                    (3.0 * v[at(0)] - 4.0 * v[at(-1)] + v[at(-2)]) / (2.0 * h)
                };
            }
        }
    }
    out
}

/// Profile orbit plus backgrounds, evaluated in either variable set.
pub struct SolutionCandidate<'a> {
    pub kind: SystemKind,
    pub map: SimilarityMap,
    pub basis: &'a GalerkinBasis,
    /// Cutoff backgrounds, velocity first.
    pub backgrounds: Vec<&'a PeriodicField>,
    /// Heat backgrounds, velocity first (used outside the box and for the data).
    pub heat: Vec<&'a HeatBackground>,
    pub trajectory: ProfileTrajectory,
    pub mollifier: Mollifier,
}

pub fn reconstruct<'a>(
    kind: SystemKind,
    map: SimilarityMap,
    basis: &'a GalerkinBasis,
    backgrounds: Vec<&'a PeriodicField>,
    heat: Vec<&'a HeatBackground>,
    trajectory: ProfileTrajectory,
    mollifier: Mollifier,
) -> Result<SolutionCandidate<'a>> {
    let fields = kind.columns() + 1;
    if backgrounds.len() != fields || heat.len() != fields {
        return argument(format!("{} needs {fields} backgrounds", kind.name()));
    }
    if backgrounds.iter().any(|b| b.grid != basis.grid) || heat.iter().any(|h| h.grid != basis.grid) {
        return argument("backgrounds and basis live on different grids");
    }
    if trajectory.k != basis.k() || trajectory.states.iter().any(|x| x.len() != fields * basis.k()) {
        return argument("trajectory does not match the basis");
    }
    Ok(SolutionCandidate { kind, map, basis, backgrounds, heat, trajectory, mollifier })
}

impl<'a> SolutionCandidate<'a> {
    pub fn fields(&self) -> usize {
        self.kind.columns() + 1
    }

    pub fn grid(&self) -> Grid {
        self.basis.grid
    }

    /// Profile value of field `c` (0 = velocity) at `(y, s)`: `U + W` on the
    /// grid, the heat background outside it.
    pub fn profile_value(&self, c: usize, y: [f64; 3], s: f64) -> [f64; 3] {
        let coeffs = self.trajectory.coeffs_at(s);
        self.profile_value_with(c, y, s, &coeffs)
    }

    fn profile_value_with(&self, c: usize, y: [f64; 3], s: f64, coeffs: &[f64]) -> [f64; 3] {
        let grid = self.grid();
        let Some(st) = stencil(&grid, y) else {
            return self.heat[c].eval(y, s).value;
        };
        let k = self.basis.k();
        let bw = self.backgrounds[c].weights(s);
        let mut v = [0.0; 3];
        for &(idx, w) in &st {
            if w == 0.0 {
                continue;
            }
            let b = self.backgrounds[c].node_with(idx, &bw);
            for a in 0..3 {
                let mut acc = b[a];
                for (i, m) in self.basis.modes.iter().enumerate() {
                    acc += coeffs[c * k + i] * m[a][idx];
                }
                v[a] += w * acc;
            }
        }
        v
    }

    /// Physical field `c` at `(x, t)`: the profile value divided by `√(2t)`.
    pub fn eval(&self, c: usize, x: [f64; 3], t: f64) -> Result<[f64; 3]> {
        let ys = map_to_profile(PhysicalSample { x, t })?;
        let v = self.profile_value(c, ys.y, ys.s);
        let r = (2.0 * t).sqrt();
        Ok([v[0] / r, v[1] / r, v[2] / r])
    }

    /// `e^{tΔ}` of the data of field `c` at `(x, t)`.
    pub fn heat_flow(&self, c: usize, x: [f64; 3], t: f64) -> Result<[f64; 3]> {
        let ys = map_to_profile(PhysicalSample { x, t })?;
        let v = self.heat[c].eval(ys.y, ys.s).value;
        let r = (2.0 * t).sqrt();
        Ok([v[0] / r, v[1] / r, v[2] / r])
    }

    /// Grid fields `(U_c, W_c)` at `s`.
    pub fn slice(&self, s: f64) -> (Vec<Vec3Field>, Vec<Vec3Field>) {
        let coeffs = self.trajectory.coeffs_at(s);
        let k = self.basis.k();
        let pert = (0..self.fields()).map(|c| self.basis.synthesize(&coeffs[c * k..(c + 1) * k])).collect();
        let back = self.backgrounds.iter().map(|b| b.at(s)).collect();
        (pert, back)
    }

    /// Physical pressure `π(x,t) = p(y,s)/(2t)` on the grid image at time `t`.
    pub fn pressure_slice(&self, t: f64, padding: usize) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return domain(format!("physical time must be positive, got {t}"));
        }
        let s = (2.0 * t).sqrt().ln();
        let (pert, back) = self.slice(s);
        let p = riesz_pressure(self.grid(), &pert, &back, &self.mollifier, self.kind, padding)?;
        Ok(p.values.iter().map(|v| v / (2.0 * t)).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicReport {
    pub lambda: f64,
    pub times: Vec<f64>,
    /// `g(t) = ‖v(t) − e^{tΔ}v₀‖_{L²}` over the box image (all fields).
    pub distance: Vec<f64>,
    /// Largest `|g(λ²t)/(√λ g(t)) − 1|` over sample pairs one dyad apart.
    pub scaling_defect: f64,
    /// `sup g(t)/t^{1/4}` over each dyad.
    pub envelopes: Vec<f64>,
    /// `(max − min)/max` of the envelopes.
    pub envelope_spread: f64,
}

impl<'a> SolutionCandidate<'a> {
    /// `g(t)² = √(2t) Σ_c ‖u_c − U0_c‖²_{L²(box)}(s)`.
    pub fn distance_to_heat_flow_at(&self, t: f64, heat_grids: &[PeriodicField]) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("physical time must be positive, got {t}"));
        }
        let s = (2.0 * t).sqrt().ln();
        let (pert, back) = self.slice(s);
        let grid = self.grid();
        let mut acc = 0.0;
        for c in 0..self.fields() {
            let u0 = heat_grids[c].at(s);
            for a in 0..3 {
                for i in 0..grid.len() {
                    let d = pert[c][a][i] + back[c][a][i] - u0[a][i];
                    acc += d * d;
                }
            }
        }
        Ok(((2.0 * t).sqrt() * acc * grid.cell_volume()).sqrt())
    }

    /// Samples `per_dyad` log-uniform times in each of `dyads` consecutive
    /// dyads `[t₀λ^{2j}, t₀λ^{2j+2})`.
    pub fn distance_to_heat_flow(&self, t0: f64, dyads: usize, per_dyad: usize) -> Result<DyadicReport> {
        let lambda = self.map.lambda;
        if !(lambda > 1.0) || dyads < 2 || per_dyad == 0 || !(t0 > 0.0) {
            return argument("dyadic report needs λ > 1, two dyads, samples and t₀ > 0");
        }
        let heat_grids: Vec<PeriodicField> = self.heat.iter().map(|h| h.periodic()).collect();
        let mut times = Vec::new();
        let mut distance = Vec::new();
        for j in 0..dyads {
            for i in 0..per_dyad {
                let t = t0 * lambda.powf(2.0 * (j as f64 + i as f64 / per_dyad as f64));
                times.push(t);
                distance.push(self.distance_to_heat_flow_at(t, &heat_grids)?);
            }
        }
        let mut scaling_defect: f64 = 0.0;
        for idx in 0..(dyads - 1) * per_dyad {
            let (a, b) = (distance[idx], distance[idx + per_dyad]);
            let d = if a > 0.0 { (b / (lambda.sqrt() * a) - 1.0).abs() } else if b > 0.0 { f64::INFINITY } else { 0.0 };
            scaling_defect = scaling_defect.max(d);
        }
        let envelopes: Vec<f64> = (0..dyads)
            .map(|j| (0..per_dyad).map(|i| distance[j * per_dyad + i] / times[j * per_dyad + i].powf(0.25)).fold(0.0, f64::max))
            .collect();
        let hi = envelopes.iter().cloned().fold(0.0, f64::max);
        let lo = envelopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let envelope_spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
        Ok(DyadicReport { lambda, times, distance, scaling_defect, envelopes, envelope_spread })
    }
}

/// Ball quadrature: Gauss in the radius times a product sphere rule.
struct BallRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl BallRule {
    fn new(radial: usize, theta: usize, phi: usize) -> Self {
        let r = Rule::gauss(radial, 0.0, 1.0);
        let sph = SphereRule::new(theta, phi);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (&rho, &wr) in r.nodes.iter().zip(&r.weights) {
            for (d, &wd) in sph.directions.iter().zip(&sph.weights) {
                points.push([rho * d[0], rho * d[1], rho * d[2]]);
                weights.push(wr * wd * rho * rho);
            }
        }
        Self { points, weights }
    }

    fn integrate<F: FnMut([f64; 3]) -> f64>(&self, c: [f64; 3], r: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            acc += w * f([c[0] + r * p[0], c[1] + r * p[1], c[2] + r * p[2]]);
        }
        acc * r * r * r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalEnergyRow {
    pub radius: f64,
    /// `esssup_t sup_{x₀} ∫_{B_R(x₀)} ½Σ|f_c|²`.
    pub energy: f64,
    /// `sup_{x₀} ∫₀^{R²}∫_{B_R(x₀)} Σ|∇f_c|²`.
    pub enstrophy: f64,
    /// `∫₀^{R²}∫_{B_R(x₀)} Σ|f_c|²` at `|x₀| = 4R, 8R, 16R`.
    pub decay: Vec<f64>,
    pub decay_monotone: bool,
    /// `energy / (2R(sup_dyad g² + λ‖v₀‖²_uloc))`.
    pub split_constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalEnergyReport {
    pub rows: Vec<LocalEnergyRow>,
    /// Time samples per `s`-period and the number of periods summed.
    pub slices_per_period: usize,
    pub periods: usize,
    /// Sup over one dyad of `g²`.
    pub dyad_distance_sq: f64,
    /// Sup over sample centres of `∫_{B₁(x₀)} Σ|f_c(0)|²`.
    pub uloc_data: f64,
    pub all_finite: bool,
}

impl<'a> SolutionCandidate<'a> {
    /// Physical gradient `∇_x f_c = (2t)^{-1} ∇_y u_c` from profile gradients
    /// (finite differences on the grid, analytic outside).
    fn profile_gradient_sq(&self, c: usize, y: [f64; 3], s: f64, grads: &[[Vec3Field; 3]]) -> f64 {
        let grid = self.grid();
        match stencil(&grid, y) {
            Some(st) => {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let g: f64 = st.iter().map(|&(i, w)| w * grads[c][a][b][i]).sum();
                        acc += g * g;
                    }
                }
                acc
            }
            None => {
                let j = self.heat[c].eval(y, s).jacobian;
                j.iter().flatten().map(|v| v * v).sum()
            }
        }
    }

    /// Energy, enstrophy and decay tables over radii and centres. Time
    /// integrals use `dt = 2t ds` on `slices` samples per period summed over
    /// `periods` periods below `t = R²`.
    pub fn local_energy_report(&self, radii: &[f64], centres: &[[f64; 3]], slices: usize, periods: usize) -> Result<LocalEnergyReport> {
        if radii.is_empty() || centres.is_empty() || slices == 0 || periods == 0 || radii.iter().any(|r| !(*r > 0.0)) {
            return argument("local energy report needs radii, centres and samples");
        }
        let grid = self.grid();
        let period = if self.map.period > 0.0 { self.map.period } else { 1.0 };
        let ball = BallRule::new(6, 6, 12);
        let ds = period / slices as f64;
        // gradient grids at the reduced sample phases
        let mut phase_grads = Vec::with_capacity(slices);
        for j in 0..slices {
            let s = j as f64 * ds;
            let (pert, back) = self.slice(s);
            let grads: Vec<[Vec3Field; 3]> = (0..self.fields())
                .map(|c| {
                    let u: Vec3Field = std::array::from_fn(|a| pert[c][a].iter().zip(&back[c][a]).map(|(x, y)| x + y).collect());
                    fd_gradient(&grid, &u)
                })
                .collect();
            phase_grads.push(grads);
        }
        let heat_grids: Vec<PeriodicField> = self.heat.iter().map(|h| h.periodic()).collect();
        let lambda = if self.map.lambda > 1.0 { self.map.lambda } else { 2.0 };
        let mut dyad_distance_sq: f64 = 0.0;
        for i in 0..slices {
            let t = 0.5 * lambda.powf(2.0 * i as f64 / slices as f64);
            dyad_distance_sq = dyad_distance_sq.max(self.distance_to_heat_flow_at(t, &heat_grids)?.powi(2));
        }
        let mut uloc_data: f64 = 0.0;
        for c0 in centres {
            let mut e = 0.0;
            for h in &self.heat {
                e += ball.integrate(*c0, 1.0, |x| {
                    let v = h.data.eval(x);
                    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
                });
            }
            uloc_data = uloc_data.max(e);
        }
        let mut rows = Vec::with_capacity(radii.len());
        for &r in radii {
            // s samples: s_top − m·ds, m = 0 .. periods·slices, with the phase
            // index of each sample aligned to the stored gradient grids
            let s_top = (r * 2f64.sqrt()).ln();
            let phase0 = (s_top / ds).floor();
            let mut energy: f64 = 0.0;
            let mut enstrophy: f64 = 0.0;
            for c0 in centres {
                let mut ens = 0.0;
                for m in 0..periods * slices {
                    let s = (phase0 - m as f64) * ds;
                    let t = 0.5 * (2.0 * s).exp();
                    let j = ((phase0 as i64 - m as i64).rem_euclid(slices as i64)) as usize;
                    let sq = (2.0 * t).sqrt();
                    let coeffs = self.trajectory.coeffs_at(s);
                    let mut e = 0.0;
                    let mut g = 0.0;
                    for c in 0..self.fields() {
                        e += ball.integrate(*c0, r, |x| {
                            let y = [x[0] / sq, x[1] / sq, x[2] / sq];
                            let v = self.profile_value_with(c, y, s, &coeffs);
                            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / (2.0 * t)
                        });
                        g += ball.integrate(*c0, r, |x| {
                            let y = [x[0] / sq, x[1] / sq, x[2] / sq];
                            self.profile_gradient_sq(c, y, s, &phase_grads[j]) / (4.0 * t * t)
                        });
                    }
                    energy = energy.max(0.5 * e);
                    ens += g * 2.0 * t * ds;
                }
                enstrophy = enstrophy.max(ens);
            }
            let mut decay = Vec::new();
            for mult in [4.0, 8.0, 16.0] {
                let c0 = [mult * r, 0.0, 0.0];
                let mut acc = 0.0;
                for m in 0..periods * slices {
                    let s = (phase0 - m as f64) * ds;
                    let t = 0.5 * (2.0 * s).exp();
                    let sq = (2.0 * t).sqrt();
                    let coeffs = self.trajectory.coeffs_at(s);
                    for c in 0..self.fields() {
                        acc += 2.0 * t * ds
                            * ball.integrate(c0, r, |x| {
                                let y = [x[0] / sq, x[1] / sq, x[2] / sq];
                                let v = self.profile_value_with(c, y, s, &coeffs);
                                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / (2.0 * t)
                            });
                    }
                }
                decay.push(acc);
            }
            let decay_monotone = decay.windows(2).all(|w| w[1] < w[0]) || decay.iter().all(|d| *d == 0.0);
            let split = 2.0 * r * (dyad_distance_sq + lambda * uloc_data);
            let split_constant = if split > 0.0 { energy / split } else { 0.0 };
            rows.push(LocalEnergyRow { radius: r, energy, enstrophy, decay, decay_monotone, split_constant });
        }
        let all_finite = rows.iter().all(|r| r.energy.is_finite() && r.enstrophy.is_finite() && r.decay.iter().all(|d| d.is_finite()));
        Ok(LocalEnergyReport { rows, slices_per_period: slices, periods, dyad_distance_sq, uloc_data, all_finite })
    }
}

/// Nonnegative test function `Π_a bell((y_a − c_a)/r) · bell((s − s_c)/τ)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BumpSpec {
    pub centre: [f64; 3],
    pub radius: f64,
    pub s_centre: f64,
    pub s_half_width: f64,
}

impl BumpSpec {
    /// Value, `∂_s`, gradient and Laplacian.
    fn eval(&self, y: [f64; 3], s: f64) -> (f64, f64, [f64; 3], f64) {
        let mut f = [(0.0, 0.0, 0.0); 3];
        for a in 0..3 {
            let (v, d1, d2) = bell((y[a] - self.centre[a]) / self.radius);
            f[a] = (v, d1 / self.radius, d2 / (self.radius * self.radius));
        }
        let (ts, ts1, _) = bell((s - self.s_centre) / self.s_half_width);
        let ts1 = ts1 / self.s_half_width;
        let space = f[0].0 * f[1].0 * f[2].0;
        let grad = [f[0].1 * f[1].0 * f[2].0, f[0].0 * f[1].1 * f[2].0, f[0].0 * f[1].0 * f[2].1];
        let lap = f[0].2 * f[1].0 * f[2].0 + f[0].0 * f[1].2 * f[2].0 + f[0].0 * f[1].0 * f[2].2;
        (space * ts, space * ts1, [grad[0] * ts, grad[1] * ts, grad[2] * ts], lap * ts)
    }

    /// Five deterministic bumps inside `[−reach, reach]³` and the time window `[0, span]`.
    pub fn default_family(reach: f64, span: f64, seed: u64) -> Vec<BumpSpec> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..5)
            .map(|_| {
                let radius = rng.gen_range(0.5..0.8) * reach;
                let room = reach - radius;
                BumpSpec {
                    centre: std::array::from_fn(|_| rng.gen_range(-0.5..0.5) * room),
                    radius,
                    s_centre: 0.5 * span,
                    s_half_width: 0.5 * span,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeiTerms {
    /// `∫ (½Σ|f|² + Σ|∇f|²) ψ`.
    pub lhs: f64,
    /// `∫ ½Σ|f|² (∂_sψ + Δψ)`.
    pub heat: f64,
    /// `∫ (½Σ|f|² (u − y) + p u)·∇ψ`.
    pub flux: f64,
    /// `−Σ_n ∫ (u·f_n)(f_n·∇ψ)`.
    pub coupling: f64,
    pub residual: f64,
    /// Sum of absolute term values.
    pub scale: f64,
}

impl<'a> SolutionCandidate<'a> {
    /// Residual `RHS − LHS` of the local energy inequality in similarity
    /// variables for each bump, with `slices` trapezoid samples over the
    /// stored trajectory (or one slice for a stationary profile).
    pub fn local_energy_inequality(&self, bumps: &[BumpSpec], slices: usize, padding: usize) -> Result<Vec<LeiTerms>> {
        if bumps.is_empty() {
            return argument("no test functions");
        }
        let grid = self.grid();
        let stationary = self.trajectory.is_stationary();
        let span = if stationary { 1.0 } else { self.trajectory.span() };
        let samples: Vec<(f64, f64)> = if stationary {
            // ∂_s of the profile vanishes: integrate the bump's time factor exactly
            vec![(0.0, span)]
        } else {
            if slices < 2 {
                return argument("need at least two time samples");
            }
            (0..=slices)
                .map(|i| {
                    let s = span * i as f64 / slices as f64;
                    let w = if i == 0 || i == slices { 0.5 } else { 1.0 } * span / slices as f64;
                    (s, w)
                })
                .collect()
        };
        let mut out: Vec<LeiTerms> = bumps.iter().map(|_| LeiTerms { lhs: 0.0, heat: 0.0, flux: 0.0, coupling: 0.0, residual: 0.0, scale: 0.0 }).collect();
        let sp = Spectral::new(grid);
        let vol = grid.cell_volume();
        for &(s, ws) in &samples {
            let (pert, back) = self.slice(s);
            let p = riesz_pressure(grid, &pert, &back, &self.mollifier, self.kind, padding)?.values;
            let full: Vec<Vec3Field> =
                (0..self.fields()).map(|c| std::array::from_fn(|a| pert[c][a].iter().zip(&back[c][a]).map(|(x, y)| x + y).collect())).collect();
            // U is smooth and compact: spectral; W through finite differences
            let grads: Vec<[Vec3Field; 3]> = (0..self.fields())
                .map(|c| {
                    let gw = fd_gradient(&grid, &back[c]);
                    std::array::from_fn(|a| {
                        let gu = sp.gradient(&pert[c][a]);
                        std::array::from_fn(|b| gu[b].iter().zip(&gw[a][b]).map(|(x, y)| x + y).collect())
                    })
                })
                .collect();
            for (bi, bspec) in bumps.iter().enumerate() {
                let acc = &mut out[bi];
                let (mut lhs, mut heat, mut flux, mut coup) = (0.0, 0.0, 0.0, 0.0);
                for idx in 0..grid.len() {
                    let y = grid.point(idx);
                    let (psi, mut psi_s, dpsi, lap) = if stationary {
                        // time factor integrated over its support: ∫bell = s_half·∫bell(τ)dτ
                        let (v, _, g, l) = bspec.eval(y, bspec.s_centre);
                        (v, 0.0, g, l)
                    } else {
                        bspec.eval(y, s)
                    };
                    if psi == 0.0 && dpsi == [0.0; 3] && lap == 0.0 {
                        continue;
                    }
                    if stationary {
                        psi_s = 0.0;
                    }
                    let mut e = 0.0;
                    let mut d = 0.0;
                    for c in 0..self.fields() {
                        for a in 0..3 {
                            e += 0.5 * full[c][a][idx] * full[c][a][idx];
                            for b in 0..3 {
                                d += grads[c][a][b][idx] * grads[c][a][b][idx];
                            }
                        }
                    }
                    let u = [full[0][0][idx], full[0][1][idx], full[0][2][idx]];
                    lhs += (e + d) * psi;
                    heat += e * (psi_s + lap);
                    for a in 0..3 {
                        flux += (e * (u[a] - y[a]) + p[idx] * u[a]) * dpsi[a];
                    }
                    for c in 1..self.fields() {
                        let f = [full[c][0][idx], full[c][1][idx], full[c][2][idx]];
                        let uf = u[0] * f[0] + u[1] * f[1] + u[2] * f[2];
                        let fg = f[0] * dpsi[0] + f[1] * dpsi[1] + f[2] * dpsi[2];
                        coup -= uf * fg;
                    }
                }
                let w = ws * vol;
                acc.lhs += w * lhs;
                acc.heat += w * heat;
                acc.flux += w * flux;
                acc.coupling += w * coup;
            }
        }
        if stationary {
            // time factor: ∫ bell((s − s_c)/τ) ds over its support
            let rule = Rule::composite(-1.0, 1.0, 8, 8);
            let mass = rule.integrate(|x| bell(x).0);
            for (acc, b) in out.iter_mut().zip(bumps) {
                let m = mass * b.s_half_width;
                acc.lhs *= m / span;
                acc.heat *= m / span;
                acc.flux *= m / span;
                acc.coupling *= m / span;
            }
        }
        for acc in &mut out {
            acc.residual = acc.heat + acc.flux + acc.coupling - acc.lhs;
            acc.scale = acc.lhs.abs() + acc.heat.abs() + acc.flux.abs() + acc.coupling.abs();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialDataReport {
    pub times: Vec<f64>,
    /// `‖v(t) − e^{tΔ}v₀‖_{L²(K)}` (all fields).
    pub candidate_part: Vec<f64>,
    /// `‖e^{tΔ}v₀ − v₀‖_{L²(K)}`.
    pub heat_part: Vec<f64>,
    pub heat_part_decreasing: bool,
    pub candidate_part_decreasing: bool,
}

impl<'a> SolutionCandidate<'a> {
    /// Both parts of `‖v(t) − v₀‖_{L²(K)}` on the annulus `K = {r₁ ≤ |x| ≤ r₂}`.
    pub fn initial_data_convergence(&self, r1: f64, r2: f64, times: &[f64]) -> Result<InitialDataReport> {
        if !(0.0 < r1 && r1 < r2) || times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
            return argument("annulus radii must satisfy 0 < r1 < r2 and times must be positive");
        }
        if times.windows(2).any(|w| w[1] >= w[0]) {
            return argument("times must decrease");
        }
        let radial = Rule::gauss(8, r1, r2);
        let sph = SphereRule::new(8, 16);
        let mut candidate_part = Vec::with_capacity(times.len());
        let mut heat_part = Vec::with_capacity(times.len());
        for &t in times {
            let (mut a, mut b) = (0.0, 0.0);
            for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                for (d, &wd) in sph.directions.iter().zip(&sph.weights) {
                    let x = [r * d[0], r * d[1], r * d[2]];
                    let w = wr * wd * r * r;
                    for c in 0..self.fields() {
                        let v = self.eval(c, x, t)?;
                        let h = self.heat_flow(c, x, t)?;
                        let v0 = self.heat[c].data.eval(x);
                        for k in 0..3 {
                            a += w * (v[k] - h[k]).powi(2);
                            b += w * (h[k] - v0[k]).powi(2);
                        }
                    }
                }
            }
            candidate_part.push(a.sqrt());
            heat_part.push(b.sqrt());
        }
        let dec = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14);
        Ok(InitialDataReport {
            times: times.to_vec(),
            heat_part_decreasing: dec(&heat_part),
            candidate_part_decreasing: dec(&candidate_part),
            candidate_part,
            heat_part,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AnalyticData;
    use crate::galerkin::{build_basis, BasisSettings};

    struct Fixture {
        basis: GalerkinBasis,
        backs: Vec<PeriodicField>,
        heat: Vec<HeatBackground>,
        map: SimilarityMap,
    }

    /// Divergence-free Gaussian swirl `∇×(ψ e_axis)` centred at `c`.
    fn swirl(grid: Grid, c: [f64; 3], amp: f64, axis: usize) -> Vec3Field {
        let sp = Spectral::new(grid);
        let psi = grid.sample(|y| {
            let r2 = (0..3).map(|a| (y[a] - c[a]).powi(2)).sum::<f64>();
            amp * (-r2 / 1.2).exp()
        });
        let g = sp.gradient(&psi);
        let (b, d) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut out: Vec3Field = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
        out[d] = g[b].clone();
        out[b] = g[d].iter().map(|v| -v).collect();
        out
    }

    fn fixture(amp: f64) -> Fixture {
        let grid = Grid::new(4.0, 32).unwrap();
        let basis = build_basis(grid, &BasisSettings { k: 4, ..Default::default() }).unwrap();
        let map = SimilarityMap::new(2.0).unwrap();
        let mut backs = Vec::new();
        for (c, centre) in [[0.2, -0.1, 0.0], [-0.3, 0.2, 0.1]].iter().enumerate() {
            let mut w = PeriodicField::zeros(grid, map.period, vec![]);
            w.coeffs[0] = swirl(grid, *centre, amp * (1.0 - 0.4 * c as f64), c + 1);
            backs.push(w);
        }
        let heat = (0..2).map(|_| HeatBackground::new(&AnalyticData::zero(), map, grid, 1).unwrap()).collect();
        Fixture { basis, backs, heat, map }
    }

    fn candidate(f: &Fixture, trajectory: ProfileTrajectory) -> SolutionCandidate<'_> {
        reconstruct(SystemKind::Mhd, f.map, &f.basis, f.backs.iter().collect(), f.heat.iter().collect(), trajectory, Mollifier::identity()).unwrap()
    }

    #[test]
    fn zero_candidate_gives_zero_reports() {
        let f = fixture(0.0);
        let cand = candidate(&f, ProfileTrajectory::stationary(4, vec![0.0; 8]));
        let d = cand.distance_to_heat_flow(0.5, 2, 3).unwrap();
        assert!(d.distance.iter().all(|g| *g == 0.0) && d.scaling_defect == 0.0);
        let le = cand.local_energy_report(&[0.5], &[[0.0; 3]], 2, 1).unwrap();
        assert!(le.rows[0].energy == 0.0 && le.rows[0].enstrophy == 0.0 && le.rows[0].decay_monotone);
        let lei = cand.local_energy_inequality(&BumpSpec::default_family(2.0, 1.0, 1), 2, 2).unwrap();
        assert!(lei.iter().all(|t| t.residual == 0.0 && t.scale == 0.0));
        let init = cand.initial_data_convergence(0.5, 1.0, &[0.5, 0.1]).unwrap();
        assert!(init.candidate_part.iter().chain(&init.heat_part).all(|v| *v == 0.0));
    }

    #[test]
    fn evaluation_is_the_scaled_profile() {
        let f = fixture(0.3);
        let states: Vec<Vec<f64>> = (0..=16).map(|i| (0..8).map(|j| (0.4 * i as f64 + j as f64).sin() * 0.1).collect()).collect();
        let times = (0..=16).map(|i| f.map.period * i as f64 / 16.0).collect();
        let cand = candidate(&f, ProfileTrajectory { k: 4, times, states });
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let t: f64 = rng.gen_range(0.3..5.0);
            let c = rng.gen_range(0..2);
            let r = (2.0 * t).sqrt();
            let v = cand.profile_value(c, [x[0] / r, x[1] / r, x[2] / r], r.ln());
            let e = cand.eval(c, x, t).unwrap();
            for a in 0..3 {
                assert!((e[a] - v[a] / r).abs() <= 1e-14 * (1.0 + v[a].abs()));
            }
        }
        assert!(cand.eval(0, [1.0; 3], 0.0).is_err());
        assert!(cand.eval(0, [1.0; 3], -1.0).is_err());
        assert!(cand.pressure_slice(0.0, 2).is_err());
    }

    #[test]
    fn periodic_trajectory_is_dss_and_scales_dyadically() {
        let f = fixture(0.3);
        let steps = 32;
        let period = f.map.period;
        let times: Vec<f64> = (0..=steps).map(|i| period * i as f64 / steps as f64).collect();
        let states = times.iter().map(|s| (0..8).map(|j| 0.2 * (2.0 * std::f64::consts::PI * s / period + j as f64).cos()).collect()).collect();
        let cand = candidate(&f, ProfileTrajectory { k: 4, times, states });
        let probes = crate::similarity::default_probes(2.0, 4, 3, 6);
        let defect = crate::similarity::dss_defect(|x, t| cand.eval(0, x, t).unwrap(), 2.0, &probes).unwrap();
        assert!(defect <= 1e-12, "{defect}");
        let d = cand.distance_to_heat_flow(0.5, 3, 4).unwrap();
        assert!(d.scaling_defect <= 1e-10, "{}", d.scaling_defect);
        assert!(d.envelope_spread <= 1e-10);
    }

    /// Strong residual of the stationary MHD profile equations, with
    /// spectral derivatives and the supplied pressure.
    fn strong_residual(grid: Grid, fields: &[Vec3Field], p: &[f64]) -> Vec<Vec3Field> {
        let sp = Spectral::new(grid);
        let n = grid.len();
        let ys = grid.sample_vector(|y| y);
        let grads: Vec<Vec<Vec3Field>> = fields.iter().map(|f| (0..3).map(|a| sp.gradient(&f[a])).collect()).collect();
        let conv = |v: &Vec3Field, g: &[Vec3Field], a: usize, i: usize| v[0][i] * g[a][0][i] + v[1][i] * g[a][1][i] + v[2][i] * g[a][2][i];
        let pf: Vec3Field = [p.to_vec(), vec![0.0; n], vec![0.0; n]];
        let gp = fd_gradient(&grid, &pf);
        let mut out = Vec::new();
        for (c, f) in fields.iter().enumerate() {
            let mut r: Vec3Field = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for a in 0..3 {
                let lap = sp.laplacian(&f[a]);
                for i in 0..n {
                    let mut v = -lap[i] - f[a][i] - conv(&ys, &grads[c], a, i) + conv(&fields[0], &grads[c], a, i);
                    if c == 0 {
                        v += gp[0][a][i] - conv(&fields[1], &grads[1], a, i);
                    } else {
                        v -= conv(f, &grads[0], a, i);
                    }
                    r[a][i] = v;
                }
            }
            out.push(r);
        }
        out
    }

    /// `−∫ Σ_c R_c·f_c ψ` for a stationary candidate: the inequality
    /// residual after integrating by parts back onto the fields.
    fn paired_residual(cand: &SolutionCandidate, bumps: &[BumpSpec]) -> Vec<f64> {
        let grid = cand.grid();
        let (pert, back) = cand.slice(0.0);
        let full: Vec<Vec3Field> = (0..2).map(|c| std::array::from_fn(|a| pert[c][a].iter().zip(&back[c][a]).map(|(x, y)| x + y).collect())).collect();
        let p = riesz_pressure(grid, &pert, &back, &Mollifier::identity(), SystemKind::Mhd, 2).unwrap().values;
        let r = strong_residual(grid, &full, &p);
        // time mass of the bell by a fine midpoint rule
        let m = 4000;
        let mass: f64 = (0..m).map(|i| bell(-1.0 + (i as f64 + 0.5) * 2.0 / m as f64).0).sum::<f64>() * 2.0 / m as f64;
        bumps
            .iter()
            .map(|b| {
                let mut acc = 0.0;
                for idx in 0..grid.len() {
                    let psi = b.eval(grid.point(idx), b.s_centre).0;
                    for c in 0..2 {
                        for a in 0..3 {
                            acc += r[c][a][idx] * full[c][a][idx] * psi;
                        }
                    }
                }
                -acc * grid.cell_volume() * mass * b.s_half_width
            })
            .collect()
    }

    #[test]
    fn inequality_residual_equals_the_paired_strong_residual() {
        let bumps = BumpSpec::default_family(3.0, 1.0, 9);
        // spectral path: compact perturbations, no background
        let f = fixture(0.0);
        let coeffs = vec![0.6, -0.4, 0.3, 0.5, -0.3, 0.2, 0.4, -0.5];
        let cand = candidate(&f, ProfileTrajectory::stationary(4, coeffs));
        let lei = cand.local_energy_inequality(&bumps, 2, 2).unwrap();
        for (terms, expect) in lei.iter().zip(paired_residual(&cand, &bumps)) {
            assert!(terms.scale > 0.0);
            assert!((terms.residual - expect).abs() <= 1e-4 * terms.scale, "{} vs {expect} (scale {})", terms.residual, terms.scale);
        }
        // background path: fourth-order differences limit the agreement
        let f = fixture(0.8);
        let cand = candidate(&f, ProfileTrajectory::stationary(4, vec![0.0; 8]));
        let lei = cand.local_energy_inequality(&bumps, 2, 2).unwrap();
        for (terms, expect) in lei.iter().zip(paired_residual(&cand, &bumps)) {
            assert!((terms.residual - expect).abs() <= 1e-2 * terms.scale, "{} vs {expect} (scale {})", terms.residual, terms.scale);
        }
    }
}
