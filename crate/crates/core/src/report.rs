//! Master report of one run and the pass/fail evaluation of its thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::error::{LabError, Result};
use crate::orbit::{energy_audit, EnergyAudit, EnergyBudget, OrbitResult, TrapReport};
use crate::physical::{DyadicReport, InitialDataReport, LeiTerms, LocalEnergyReport};
use crate::pressure::{BackgroundTimeBound, InterpolationAudit, PressureBoundAudit, ZeroPressureChecks};
use crate::stationary::{SphereCertificate, StationaryReport};

/// Bumped whenever the report layout or an audit definition changes.
pub const REPORT_VERSION: u32 = 1;

/// Pinned acceptance thresholds.
pub mod thresholds {
    pub const GRAM: f64 = 1e-10;
    /// Coarse and halved-step energy traces must agree to this relative
    /// level before their difference is trusted as an error estimate.
    pub const STEP_HALVING: f64 = 1e-8;
    pub const DIVERGENCE: f64 = 1e-8;
    pub const CUBIC: f64 = 1e-10;
    pub const PERIODICITY: f64 = 1e-6;
    pub const REINTEGRATION: f64 = 2e-6;
    /// Absolute floor for periodicity when the trap radius vanishes.
    pub const PERIODICITY_FLOOR: f64 = 1e-14;
    pub const CERTIFICATE: f64 = 1e-6;
    pub const NEWTON_RESIDUAL: f64 = 1e-8;
    pub const POISSON: f64 = 1e-8;
    pub const RIESZ_IDENTITY: f64 = 1e-10;
    pub const REFINEMENT: f64 = 0.1;
    pub const ZERO_PRESSURE: f64 = 1e-10;
    pub const SCALING: f64 = 0.01;
    pub const LEI: f64 = 1e-6;
}

/// Per-stage tolerances, recorded verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub tolerances: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisAudit {
    pub k: usize,
    pub dropped: usize,
    pub sigma: f64,
    pub gram_residual: f64,
    pub divergence: f64,
    pub edge_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundAudit {
    pub r0: f64,
    pub delta: f64,
    /// Per field, velocity first.
    pub divergence_defect: Vec<f64>,
    pub lq_sup: Vec<f64>,
    pub l4_sup: Vec<f64>,
    pub forcing_h_minus1_sup: Vec<f64>,
    pub theta_r0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemAudit {
    pub dimension: usize,
    pub epsilon: f64,
    pub budget: EnergyBudget,
    /// Largest `|x·Q(x)| / ‖x‖³` over random states.
    pub cubic_defect: f64,
    pub cubic_samples: usize,
}

/// Energy trace of the periodic (or lifted stationary) orbit, enough to
/// recompute the energy identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub rate: Vec<f64>,
    pub fine_energy: Vec<f64>,
}

impl EnergyTrace {
    pub fn from_orbit(o: &OrbitResult) -> Self {
        Self {
            times: o.times.clone(),
            energy: o.energy.clone(),
            dissipation: o.dissipation.clone(),
            rate: o.rate.clone(),
            fine_energy: o.fine_energy.clone(),
        }
    }

    fn as_orbit(&self, budget: &EnergyBudget) -> OrbitResult {
        OrbitResult {
            kind: budget.kind,
            k: 0,
            times: self.times.clone(),
            states: Vec::new(),
            energy: self.energy.clone(),
            dissipation: self.dissipation.clone(),
            rate: self.rate.clone(),
            fine_energy: self.fine_energy.clone(),
            step_error: 0.0,
            fixed_point_residual: 0.0,
            converged: true,
            iterations: 0,
            projections: 0,
            newton_steps: 0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,energy,fine_energy,dissipation,rate\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                self.times[i], self.energy[i], self.fine_energy[i], self.dissipation[i], self.rate[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitAudit {
    pub converged: bool,
    pub iterations: usize,
    pub newton_steps: usize,
    pub projections: usize,
    pub fixed_point_residual: f64,
    /// `‖c(T) − c(0)‖` of an independent re-integration from the stored start.
    pub reintegration_residual: f64,
    /// Largest distance between the original and re-integrated orbits.
    pub reintegration_distance: f64,
    pub step_error: f64,
    pub start: Vec<f64>,
    pub energy: EnergyAudit,
    pub trace: EnergyTrace,
    pub trap: TrapReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryAudit {
    pub report: StationaryReport,
    pub certificate: SphereCertificate,
    /// `‖weak-form residual‖ / ‖P(0)‖` of the Newton solution.
    pub weak_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureAudit {
    pub slices: usize,
    pub padding: usize,
    pub poisson_residual: f64,
    pub gauge_mean: f64,
    pub identity_defect: f64,
    pub bound: PressureBoundAudit,
    /// Same bound on the grid with every other node.
    pub bound_coarse: PressureBoundAudit,
    /// `|ratio / coarse ratio − 1|`.
    pub refinement_change: f64,
    pub background_time: Vec<BackgroundTimeBound>,
    pub interpolation: InterpolationAudit,
    pub zero_checks: ZeroPressureChecks,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalAudit {
    pub dss_defect: f64,
    /// Scale of the sampled values entering the DSS defect.
    pub dss_scale: f64,
    pub dyadic: DyadicReport,
    pub local_energy: LocalEnergyReport,
    pub lei: Vec<LeiTerms>,
    pub initial: InitialDataReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// Measured value against its threshold, in words.
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub config: RunConfig,
    pub config_hash: String,
    /// Hash of the basis modes and the solution coefficients.
    pub artifact_hash: String,
    pub stages: Vec<StageRecord>,
    pub basis: BasisAudit,
    pub background: BackgroundAudit,
    pub system: SystemAudit,
    pub orbit: OrbitAudit,
    pub stationary: Option<StationaryAudit>,
    pub pressure: PressureAudit,
    pub physical: Option<PhysicalAudit>,
    pub criteria: Vec<CriterionOutcome>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Format(format!("corrupt report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

fn outcome(id: u32, name: &str, passed: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome { id, name: name.into(), passed, detail }
}

/// Evaluates every threshold that a single run can decide. The energy
/// identity is recomputed from the stored trace rather than read back.
pub fn evaluate(r: &Report) -> Vec<CriterionOutcome> {
    use thresholds::*;
    let mut out = Vec::new();
    let wdiv = r.background.divergence_defect.iter().cloned().fold(0.0, f64::max);
    out.push(outcome(
        1,
        "orthonormality and divergence",
        r.basis.gram_residual <= GRAM && r.basis.divergence <= DIVERGENCE && wdiv <= DIVERGENCE,
        format!("gram {:.2e} (<= {GRAM:e}), mode div {:.2e}, background div {:.2e} (<= {DIVERGENCE:e})", r.basis.gram_residual, r.basis.divergence, wdiv),
    ));
    out.push(outcome(
        2,
        "cubic cancellation",
        r.system.cubic_defect <= CUBIC,
        format!("max |x.Q(x)|/|x|^3 = {:.2e} over {} states (<= {CUBIC:e})", r.system.cubic_defect, r.system.cubic_samples),
    ));
    let budget = &r.system.budget;
    match energy_audit(&r.orbit.trace.as_orbit(budget), budget) {
        Ok(a) => {
            let t = &r.orbit.trace;
            let emax = t.energy.iter().cloned().fold(0.0, f64::max);
            let gap = t.energy.iter().zip(&t.fine_energy).map(|(c, f)| (c - f).abs()).fold(0.0, f64::max);
            let resolution = if emax > 0.0 { gap / emax } else { gap };
            out.push(outcome(
                3,
                "energy identity",
                a.identity_ok && resolution <= STEP_HALVING,
                format!(
                    "|dE/ds - rate| = {:.2e}, step-halving estimate {:.2e}, coarse/fine energy gap {resolution:.2e} (<= {STEP_HALVING:e})",
                    a.identity_error, a.identity_estimate
                ),
            ))
        }
        Err(e) => out.push(outcome(3, "energy identity", false, format!("trace unusable: {e}"))),
    }
    let projections_ok = !r.orbit.converged || r.orbit.projections == 0;
    out.push(outcome(
        4,
        "gronwall trap",
        r.orbit.trap.ok && projections_ok,
        format!(
            "{} starts, worst excess {:.2e} (slack {:.2e}), {} projections",
            r.orbit.trap.starts, r.orbit.trap.worst_excess, r.orbit.trap.slack, r.orbit.projections
        ),
    ));
    let per = (PERIODICITY * budget.rho).max(PERIODICITY_FLOOR);
    let re = (REINTEGRATION * budget.rho).max(PERIODICITY_FLOOR);
    out.push(outcome(
        5,
        "periodicity",
        r.orbit.converged && r.orbit.fixed_point_residual <= per && r.orbit.reintegration_residual <= re,
        format!(
            "|c(T)-c(0)| = {:.2e} (<= {per:.2e}), re-integrated {:.2e} (<= {re:.2e})",
            r.orbit.fixed_point_residual, r.orbit.reintegration_residual
        ),
    ));
    if r.config.mode == Mode::Ss {
        match &r.stationary {
            Some(st) => {
                let c = &st.certificate;
                let ok = c.worst_slack <= CERTIFICATE * (1.0 + budget.c2)
                    && st.report.residual <= NEWTON_RESIDUAL
                    && st.report.norm <= st.report.sphere_radius;
                out.push(outcome(
                    6,
                    "stationary certificate",
                    ok,
                    format!(
                        "sphere slack {:.2e} (<= {:.2e}), |P(x*)| = {:.2e} (<= {NEWTON_RESIDUAL:e}), |x*| = {:.3e} vs {:.3e}",
                        c.worst_slack,
                        CERTIFICATE * (1.0 + budget.c2),
                        st.report.residual,
                        st.report.norm,
                        st.report.sphere_radius
                    ),
                ));
            }
            None => out.push(outcome(6, "stationary certificate", false, "missing stationary section".into())),
        }
    }
    let p = &r.pressure;
    let ok = p.poisson_residual <= POISSON
        && p.identity_defect <= RIESZ_IDENTITY
        && p.bound.ratio.is_finite()
        && p.refinement_change <= REFINEMENT
        && p.zero_checks.shear <= ZERO_PRESSURE
        && p.zero_checks.elsasser <= ZERO_PRESSURE;
    out.push(outcome(
        8,
        "pressure",
        ok,
        format!(
            "poisson {:.2e}, identity {:.2e}, bound ratio {:.3e} (refinement change {:.2e}), shear {:.1e}, u=a {:.1e}",
            p.poisson_residual, p.identity_defect, p.bound.ratio, p.refinement_change, p.zero_checks.shear, p.zero_checks.elsasser
        ),
    ));
    if let Some(ph) = &r.physical {
        out.push(outcome(
            9,
            "reconstruction scaling",
            ph.dyadic.scaling_defect <= SCALING,
            format!("max |g(l^2 t)/(sqrt(l) g(t)) - 1| = {:.2e} (<= {SCALING})", ph.dyadic.scaling_defect),
        ));
        let worst = ph.lei.iter().map(|t| if t.scale > 0.0 { t.residual / t.scale } else { 0.0 }).fold(f64::INFINITY, f64::min);
        out.push(outcome(
            10,
            "local energy inequality",
            worst >= -LEI,
            format!("min residual/scale = {worst:.3e} over {} bumps (>= -{LEI:e})", ph.lei.len()),
        ));
    }
    out
}

/// Outcome of re-checking a stored report.
#[derive(Debug, Clone)]
pub struct Verification {
    pub criteria: Vec<CriterionOutcome>,
    pub warnings: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        for c in &self.criteria {
            s.push_str(&format!("[{}] {:>2} {:<30} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail));
        }
        s
    }
}

/// Re-evaluates the thresholds of `report`, optionally against the
/// configuration it claims to come from.
pub fn verify(report: &Report, config: Option<&RunConfig>) -> Verification {
    let mut warnings = Vec::new();
    if report.version != REPORT_VERSION {
        warnings.push(format!("report version {} differs from current version {REPORT_VERSION}", report.version));
    }
    if report.config.content_hash() != report.config_hash {
        warnings.push("stored configuration does not match its hash".into());
    }
    if let Some(c) = config {
        if c.content_hash() != report.config_hash {
            warnings.push("report was produced by a different configuration".into());
        }
    }
    let criteria = evaluate(report);
    for (fresh, stored) in criteria.iter().zip(&report.criteria) {
        if fresh.id == stored.id && fresh.passed != stored.passed {
            warnings.push(format!("criterion {} disagrees with the stored verdict", fresh.id));
        }
    }
    Verification { criteria, warnings }
}
