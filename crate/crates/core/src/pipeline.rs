//! End-to-end run: data → backgrounds → tables → orbit or stationary
//! profile → pressure → reconstruction → audits, and the artifacts on disk.

use std::cell::{Cell, RefCell};
use std::path::Path;

use rand::{Rng, SeedableRng};

use crate::background::{build_cutoff, CutoffBackground, CutoffSettings, HeatBackground};
use crate::config::{hex_digest, Mode, RunConfig};
use crate::data::{dss_data, homogeneous_data, AnalyticData};
use crate::error::{LabError, Result};
use crate::galerkin::system::quadratic_part;
use crate::galerkin::{build_basis, forcing_constant, BasisSettings, CoeffState, ForcingNorms, GalerkinBasis, GalerkinSystem, Mollifier};
use crate::grid::Grid;
use crate::orbit::{energy_audit, integrate_period, poincare_fixed_point, trap_experiment, EnergyBudget, FixedPointSettings, OrbitResult};
use crate::physical::{reconstruct, BumpSpec, ProfileTrajectory, SolutionCandidate};
use crate::pressure::{
    background_time_bound, interpolation_audit, pressure_bound_audit, riesz_identity_defect, riesz_pressure, zero_pressure_checks, PressureBoundAudit,
    PressureSlice,
};
use crate::report::{
    evaluate, BackgroundAudit, BasisAudit, EnergyTrace, OrbitAudit, PhysicalAudit, PressureAudit, Report, StageRecord, StationaryAudit,
    SystemAudit, REPORT_VERSION,
};
use crate::similarity::{default_probes, dss_defect, SimilarityMap};
use crate::spectral::Vec3Field;
use crate::stationary::{weak_form_residual, AlgebraicSystem, StationarySettings};

/// Random states used for the cubic-cancellation check.
pub const CUBIC_SAMPLES: usize = 100;
/// Periods in the stored DSS trajectory.
pub const TRAJECTORY_PERIODS: usize = 3;
/// Pressure slices per period.
pub const PRESSURE_SLICES: usize = 8;

/// Everything built before the profile is solved for.
pub struct Prepared {
    pub config: RunConfig,
    pub grid: Grid,
    pub map: SimilarityMap,
    pub heat: Vec<HeatBackground>,
    pub cutoff: CutoffBackground,
    pub basis: GalerkinBasis,
    pub mollifier: Mollifier,
    pub system: GalerkinSystem,
    pub c2: f64,
    pub budget: EnergyBudget,
}

/// The solved profile.
pub struct Solution {
    pub orbit: OrbitResult,
    pub stationary: Option<StationaryAudit>,
    pub trajectory: ProfileTrajectory,
}

fn stage_error(stage: &str, e: LabError) -> LabError {
    match e {
        LabError::NonConvergence { .. } | LabError::Config(_) => e,
        other => LabError::NonConvergence { stage: stage.into(), detail: other.to_string() },
    }
}

/// Scale factor of the similarity map. Self-similar runs accept any
/// `λ > 0` but need a discrete map for the dyadic audits.
fn map_lambda(cfg: &RunConfig) -> f64 {
    if cfg.lambda > 1.0 {
        cfg.lambda
    } else {
        2.0
    }
}

/// Initial data of every field: velocity with the configured seed, column
/// `n` with seed `seed + n` scaled by its relative amplitude.
pub fn field_data(cfg: &RunConfig) -> Result<Vec<AnalyticData>> {
    let mut out = Vec::with_capacity(1 + cfg.system.columns());
    for c in 0..=cfg.system.columns() {
        let amp = if c == 0 { cfg.amplitude } else { cfg.amplitude * cfg.column_amplitudes[c - 1] };
        let seed = cfg.seeds.data + c as u64;
        out.push(match cfg.mode {
            Mode::Dss => dss_data(seed, amp, cfg.lambda, cfg.depth)?,
            Mode::Ss => homogeneous_data(seed, amp),
        });
    }
    Ok(out)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let grid = Grid::new(cfg.half_width, cfg.n).map_err(|e| LabError::Config(e.to_string()))?;
    let map = SimilarityMap::new(map_lambda(cfg))?;
    let data = field_data(cfg)?;
    let heat = data.iter().map(|d| HeatBackground::new(d, map, grid, cfg.slices)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&HeatBackground> = heat.iter().collect();
    let cutoff = build_cutoff(&refs, cfg.delta(), &CutoffSettings::default()).map_err(|e| stage_error("cutoff background", e))?;
    let basis = build_basis(grid, &BasisSettings { k: cfg.k, layout: cfg.layout, ..Default::default() })?;
    // the stationary algebraic system is the unmollified one
    let mollifier = match cfg.mode {
        Mode::Dss => Mollifier::new(cfg.epsilon())?,
        Mode::Ss => Mollifier::identity(),
    };
    let fields: Vec<_> = cutoff.fields.iter().map(|f| &f.field).collect();
    let system = GalerkinSystem::assemble(&basis, &mollifier, &fields, cfg.system)?;
    let c2 = forcing_constant(cfg.system, &ForcingNorms::from_cutoff(&cutoff));
    let budget = EnergyBudget::new(cfg.system, c2, map.period)?;
    Ok(Prepared { config: cfg.clone(), grid, map, heat, cutoff, basis, mollifier, system, c2, budget })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `|x·Q(x)| / ‖x‖³` over random states and phases.
pub fn cubic_defect(system: &GalerkinSystem, period: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut x: Vec<f64> = (0..system.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = 10f64.powf(rng.gen_range(-1.0..1.0)) / norm(&x);
        x.iter_mut().for_each(|v| *v *= scale);
        let s = rng.gen_range(0.0..period.max(1e-300));
        let q = quadratic_part(&system.tables_at(s), &x);
        let pairing: f64 = x.iter().zip(&q).map(|(a, b)| a * b).sum();
        worst = worst.max(pairing.abs() / norm(&x).powi(3));
    }
    worst
}

pub fn solve(prep: &Prepared) -> Result<Solution> {
    let cfg = &prep.config;
    let k = prep.basis.k();
    match cfg.mode {
        Mode::Dss => {
            let st = FixedPointSettings { tol: cfg.tolerances.fixed_point, steps: cfg.steps, ..Default::default() };
            let orbit = poincare_fixed_point(&prep.system, &prep.budget, &st)?;
            let mut orbits = vec![orbit.clone()];
            for _ in 1..TRAJECTORY_PERIODS {
                let prev = orbits.last().unwrap().end().flat();
                orbits.push(integrate_period(&prep.system, &CoeffState::from_flat(0.0, k, &prev), &prep.budget, cfg.steps)?);
            }
            let trajectory = ProfileTrajectory::from_orbits(&orbits)?;
            Ok(Solution { orbit, stationary: None, trajectory })
        }
        Mode::Ss => {
            let alg = AlgebraicSystem::new(&prep.system, prep.c2)?;
            let report = alg.solve(&StationarySettings { tol: cfg.tolerances.stationary, max_iters: 60 })?;
            let certificate = alg.sphere_certificate(cfg.certificate_samples, None, cfg.seeds.certificate)?;
            let backs: Vec<Vec3Field> = prep.cutoff.fields.iter().map(|f| f.field.at(0.0)).collect();
            let weak = weak_form_residual(&prep.basis, &backs, &report.solution)?;
            let p0 = norm(&alg.residual(&vec![0.0; alg.dimension()])?);
            let weak_residual = if p0 > 0.0 { norm(&weak) / p0 } else { norm(&weak) };
            // the stationary profile lifted to a (trivially) periodic orbit
            let mut orbit = integrate_period(&prep.system, &CoeffState::from_flat(0.0, k, &report.solution), &prep.budget, cfg.steps)?;
            orbit.converged = report.converged;
            let trajectory = ProfileTrajectory::stationary(k, report.solution.clone());
            Ok(Solution { orbit, stationary: Some(StationaryAudit { report, certificate, weak_residual }), trajectory })
        }
    }
}

pub fn candidate<'a>(prep: &'a Prepared, sol: &Solution) -> Result<SolutionCandidate<'a>> {
    reconstruct(
        prep.config.system,
        prep.map,
        &prep.basis,
        prep.cutoff.fields.iter().map(|f| &f.field).collect(),
        prep.heat.iter().collect(),
        sol.trajectory.clone(),
        prep.mollifier,
    )
}

/// Keeps every other node of a field on `fine` (same box, half the points).
fn subsample(fine: &Grid, coarse: &Grid, f: &[f64]) -> Vec<f64> {
    (0..coarse.len())
        .map(|idx| {
            let (i, j, k) = coarse.unravel(idx);
            f[fine.index(2 * i, 2 * j, 2 * k)]
        })
        .collect()
}

struct PressureData {
    pressures: Vec<Vec<f64>>,
    perts: Vec<Vec<Vec3Field>>,
    backs: Vec<Vec<Vec3Field>>,
}

fn bound_on(grid: Grid, period: f64, d: &PressureData) -> Result<PressureBoundAudit> {
    let slices: Vec<PressureSlice> = (0..d.pressures.len())
        .map(|i| PressureSlice { pressure: &d.pressures[i], perturbations: &d.perts[i], backgrounds: &d.backs[i] })
        .collect();
    pressure_bound_audit(grid, period, &slices)
}

pub fn pressure_audit(prep: &Prepared, cand: &SolutionCandidate) -> Result<PressureAudit> {
    let cfg = &prep.config;
    let grid = prep.grid;
    let period = prep.map.period;
    let slices = if cand.trajectory.is_stationary() { 2 } else { PRESSURE_SLICES };
    let mut fine = PressureData { pressures: Vec::new(), perts: Vec::new(), backs: Vec::new() };
    let mut poisson: f64 = 0.0;
    let mut gauge: f64 = 0.0;
    for j in 0..slices {
        let s = period * j as f64 / slices as f64;
        let (pert, back) = cand.slice(s);
        let p = riesz_pressure(grid, &pert, &back, &prep.mollifier, cfg.system, cfg.padding)?;
        poisson = poisson.max(p.poisson_residual);
        gauge = gauge.max(p.mean().abs());
        fine.pressures.push(p.values);
        fine.perts.push(pert);
        fine.backs.push(back);
    }
    let bound = bound_on(grid, period, &fine)?;
    let coarse_grid = Grid::new(grid.half_width, grid.n / 2)?;
    let sub = |f: &Vec3Field| -> Vec3Field { std::array::from_fn(|a| subsample(&grid, &coarse_grid, &f[a])) };
    let mut coarse = PressureData { pressures: Vec::new(), perts: Vec::new(), backs: Vec::new() };
    for j in 0..slices {
        let pert: Vec<Vec3Field> = fine.perts[j].iter().map(sub).collect();
        let back: Vec<Vec3Field> = fine.backs[j].iter().map(sub).collect();
        coarse.pressures.push(riesz_pressure(coarse_grid, &pert, &back, &prep.mollifier, cfg.system, cfg.padding)?.values);
        coarse.perts.push(pert);
        coarse.backs.push(back);
    }
    let bound_coarse = bound_on(coarse_grid, period, &coarse)?;
    let refinement_change = if bound_coarse.ratio > 0.0 {
        (bound.ratio / bound_coarse.ratio - 1.0).abs()
    } else if bound.ratio > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let background_time = bound.background_norms.iter().map(|n| background_time_bound(*n, prep.cutoff.delta, period)).collect();
    let velocity: Vec<Vec3Field> = fine.perts.iter().map(|p| p[0].clone()).collect();
    let interpolation = interpolation_audit(grid, period, &velocity)?;
    let identity_defect = riesz_identity_defect(grid, cfg.seeds.data);
    let zero_checks = zero_pressure_checks(grid, &fine.perts[0][0], &fine.backs[0][0], &prep.mollifier, cfg.padding)?;
    Ok(PressureAudit {
        slices,
        padding: cfg.padding,
        poisson_residual: poisson,
        gauge_mean: gauge,
        identity_defect,
        bound,
        bound_coarse,
        refinement_change,
        background_time,
        interpolation,
        zero_checks,
    })
}

pub fn physical_audit(prep: &Prepared, cand: &SolutionCandidate) -> Result<PhysicalAudit> {
    let cfg = &prep.config;
    let lambda = prep.map.lambda;
    let probes = default_probes(lambda, 4, 3, 6);
    let dss_scale = Cell::new(0.0f64);
    let failure = RefCell::new(None);
    let dss = dss_defect(
        |x, t| match cand.eval(0, x, t) {
            Ok(v) => {
                dss_scale.set(dss_scale.get().max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()));
                v
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                [f64::NAN; 3]
            }
        },
        lambda,
        &probes,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let dss_scale = dss_scale.get();
    let dyadic = cand.distance_to_heat_flow(0.5, 3, 8)?;
    let centres = [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.5, 0.5]];
    let local_energy = cand.local_energy_report(&[0.5, 1.0], &centres, 8, 4)?;
    let span = if cand.trajectory.is_stationary() { 1.0 } else { cand.trajectory.span() };
    let bumps = BumpSpec::default_family(0.5 * cfg.half_width, span, cfg.seeds.bumps);
    let lei_slices = if cand.trajectory.is_stationary() { 2 } else { 8 * TRAJECTORY_PERIODS };
    let lei = cand.local_energy_inequality(&bumps, lei_slices, cfg.padding)?;
    let times: Vec<f64> = (0..6).map(|j| 0.5 * lambda.powi(-2 * j)).collect();
    let initial = cand.initial_data_convergence(0.5, 1.0, &times)?;
    Ok(PhysicalAudit { dss_defect: dss, dss_scale, dyadic, local_energy, lei, initial })
}

fn stage_records(prep: &Prepared) -> Vec<StageRecord> {
    let cfg = &prep.config;
    let rec = |stage: &str, t: &[(&str, f64)]| StageRecord { stage: stage.into(), tolerances: t.iter().map(|(n, v)| (n.to_string(), *v)).collect() };
    vec![
        rec("background", &[("delta", prep.cutoff.delta), ("q", prep.cutoff.q)]),
        rec("galerkin", &[("epsilon", prep.mollifier.epsilon), ("k", prep.basis.k() as f64)]),
        rec(
            "orbit",
            &[("fixed_point_tol", cfg.tolerances.fixed_point), ("steps", cfg.steps as f64), ("ball_radius", prep.budget.ball_radius)],
        ),
        rec("stationary", &[("tol", cfg.tolerances.stationary)]),
        rec("pressure", &[("padding", cfg.padding as f64)]),
    ]
}

fn artifact_hash(prep: &Prepared, sol: &Solution) -> String {
    let mut bytes = Vec::new();
    for m in &prep.basis.modes {
        for c in m {
            c.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
        }
    }
    for x in &sol.trajectory.states {
        x.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
    }
    hex_digest(&bytes)
}

/// Full run with the intermediate objects kept for further inspection.
pub fn run_with(cfg: &RunConfig) -> Result<(Report, Prepared, Solution)> {
    let prep = prepare(cfg)?;
    let sol = solve(&prep)?;
    let report = assemble_report(&prep, &sol)?;
    Ok((report, prep, sol))
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<Report> {
    Ok(run_with(cfg)?.0)
}

pub fn assemble_report(prep: &Prepared, sol: &Solution) -> Result<Report> {
    let cfg = &prep.config;
    let b = &prep.basis;
    let basis = BasisAudit { k: b.k(), dropped: b.dropped, sigma: b.sigma(), gram_residual: b.gram_residual, divergence: b.divergence, edge_ratio: b.edge_ratio };
    let fields = &prep.cutoff.fields;
    let background = BackgroundAudit {
        r0: prep.cutoff.r0,
        delta: prep.cutoff.delta,
        divergence_defect: fields.iter().map(|f| f.divergence_defect).collect(),
        lq_sup: fields.iter().map(|f| f.lq_sup).collect(),
        l4_sup: fields.iter().map(|f| f.l4_sup).collect(),
        forcing_h_minus1_sup: fields.iter().map(|f| f.forcing_h_minus1_sup).collect(),
        theta_r0: prep.cutoff.theta_r0.clone(),
    };
    let system = SystemAudit {
        dimension: prep.system.dimension(),
        epsilon: prep.mollifier.epsilon,
        budget: prep.budget,
        cubic_defect: cubic_defect(&prep.system, prep.map.period, CUBIC_SAMPLES, cfg.seeds.certificate),
        cubic_samples: CUBIC_SAMPLES,
    };
    let orbit = &sol.orbit;
    let again = integrate_period(&prep.system, &orbit.start(), &prep.budget, cfg.steps)?;
    let trap = trap_experiment(&prep.system, &prep.budget, cfg.trap_starts, cfg.steps, cfg.seeds.trap)?;
    let orbit_audit = OrbitAudit {
        converged: orbit.converged,
        iterations: orbit.iterations,
        newton_steps: orbit.newton_steps,
        projections: orbit.projections,
        fixed_point_residual: orbit.fixed_point_residual,
        reintegration_residual: again.fixed_point_residual,
        reintegration_distance: orbit.distance(&again),
        step_error: orbit.step_error,
        start: orbit.states[0].clone(),
        energy: energy_audit(orbit, &prep.budget)?,
        trace: EnergyTrace::from_orbit(orbit),
        trap,
    };
    let cand = candidate(prep, sol)?;
    let pressure = pressure_audit(prep, &cand)?;
    let physical = if cfg.skip_physical { None } else { Some(physical_audit(prep, &cand)?) };
    let mut report = Report {
        version: REPORT_VERSION,
        config: cfg.clone(),
        config_hash: cfg.content_hash(),
        artifact_hash: artifact_hash(prep, sol),
        stages: stage_records(prep),
        basis,
        background,
        system,
        orbit: orbit_audit,
        stationary: sol.stationary.clone(),
        pressure,
        physical,
        criteria: Vec::new(),
    };
    report.criteria = evaluate(&report);
    Ok(report)
}

fn io(path: &Path, e: std::io::Error) -> LabError {
    LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io(path, e))
}

/// Writes the report, plot-ready CSV traces, the trajectory and the `s = 0`
/// pressure (binary, whole grid) and mid-plane slice (CSV) into `dir`.
pub fn write_artifacts(dir: &Path, prep: &Prepared, report: &Report, sol: &Solution) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    write(&dir.join("report.json"), &report.to_json())?;
    write(&dir.join("energy.csv"), &report.orbit.trace.to_csv())?;
    write(&dir.join("trajectory.json"), &serde_json::to_string(&sol.trajectory).expect("trajectory serializes"))?;
    let cand = candidate(prep, sol)?;
    let (pert, back) = cand.slice(0.0);
    let grid = prep.grid;
    let p = riesz_pressure(grid, &pert, &back, &prep.mollifier, prep.config.system, prep.config.padding)?;
    let path = dir.join("pressure_s0.bin");
    let file = std::fs::File::create(&path).map_err(|e| io(&path, e))?;
    p.to_scalar().write_binary(std::io::BufWriter::new(file))?;
    let mut plane = String::from("y1,y2,u1,u2,u3,p\n");
    let k = grid.n / 2;
    for i in 0..grid.n {
        for j in 0..grid.n {
            let idx = grid.index(i, j, k);
            let u: Vec<f64> = (0..3).map(|a| pert[0][a][idx] + back[0][a][idx]).collect();
            plane.push_str(&format!("{},{},{:e},{:e},{:e},{:e}\n", grid.coord(i), grid.coord(j), u[0], u[1], u[2], p.values[idx]));
        }
    }
    write(&dir.join("profile_plane_s0.csv"), &plane)?;
    for (name, text) in export_tables(report) {
        write(&dir.join(name), &text)?;
    }
    Ok(())
}

/// CSV tables derived from a report: `(file name, contents)`.
pub fn export_tables(report: &Report) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut crit = String::from("id,name,passed\n");
    for c in &report.criteria {
        crit.push_str(&format!("{},{},{}\n", c.id, c.name, c.passed));
    }
    out.push(("criteria.csv".into(), crit));
    if let Some(ph) = &report.physical {
        let mut d = String::from("t,distance\n");
        for (t, g) in ph.dyadic.times.iter().zip(&ph.dyadic.distance) {
            d.push_str(&format!("{t:e},{g:e}\n"));
        }
        out.push(("dyadic.csv".into(), d));
        let mut l = String::from("bump,lhs,heat,flux,coupling,residual,scale\n");
        for (i, t) in ph.lei.iter().enumerate() {
            l.push_str(&format!("{i},{:e},{:e},{:e},{:e},{:e},{:e}\n", t.lhs, t.heat, t.flux, t.coupling, t.residual, t.scale));
        }
        out.push(("lei.csv".into(), l));
        let mut e = String::from("radius,energy,enstrophy,decay_4r,decay_8r,decay_16r\n");
        for r in &ph.local_energy.rows {
            e.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", r.radius, r.energy, r.enstrophy, r.decay[0], r.decay[1], r.decay[2]));
        }
        out.push(("local_energy.csv".into(), e));
    }
    out
}
