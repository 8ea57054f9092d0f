//! Command-line front end: `solve`, `verify`, `sweep` and `export`.
//!
//! Exit codes: 0 pass, 1 criterion failure, 2 configuration error,
//! 3 numerical non-convergence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Mode, RunConfig};
use crate::error::LabError;
use crate::galerkin::SystemKind;
use crate::pipeline::{export_tables, run_with, write_artifacts};
use crate::report::{verify, Report, REPORT_VERSION};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CRITERION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "leray-lab", about = "Self-similar Leray profiles: solve, verify, sweep, export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write the report and traces.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Recompute even if a report for this configuration exists.
        #[arg(long)]
        force: bool,
    },
    /// Re-evaluate the thresholds of a stored report.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a grid over λ, k and ε and tabulate the outcomes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
    },
    /// Write plot-ready CSV tables from a stored report.
    Export {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Configuration file plus flag overrides (flags win).
#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_system)]
    system: Option<SystemKind>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trap_starts: Option<usize>,
    #[arg(long)]
    skip_physical: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_system(s: &str) -> Result<SystemKind, String> {
    match s {
        "mhd" => Ok(SystemKind::Mhd),
        "vnsed" => Ok(SystemKind::Viscoelastic),
        "ns" | "navier_stokes" => Ok(SystemKind::NavierStokes),
        _ => Err(format!("unknown system '{s}' (mhd, vnsed, ns)")),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "dss" => Ok(Mode::Dss),
        "ss" => Ok(Mode::Ss),
        _ => Err(format!("unknown mode '{s}' (dss, ss)")),
    }
}

impl RunArgs {
    fn resolve(&self) -> crate::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.system {
            c.system = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.half_width {
            c.half_width = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if self.epsilon.is_some() {
            c.epsilon = self.epsilon;
        }
        if self.delta.is_some() {
            c.delta = self.delta;
        }
        if let Some(v) = self.amplitude {
            c.amplitude = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = self.trap_starts {
            c.trap_starts = v;
        }
        if self.skip_physical {
            c.skip_physical = true;
        }
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// Exit code for a failed stage.
pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_) | LabError::Io(_) | LabError::Format(_) => EXIT_CONFIG,
        LabError::NonConvergence { .. } | LabError::Domain(_) | LabError::Argument(_) => EXIT_NONCONVERGENCE,
    }
}

fn verdict(report: &Report) -> i32 {
    if !report.orbit.converged {
        EXIT_NONCONVERGENCE
    } else if report.all_passed() {
        EXIT_PASS
    } else {
        EXIT_CRITERION
    }
}

fn print_criteria(report: &Report) {
    for c in &report.criteria {
        println!("[{}] {:>2} {:<30} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    }
}

fn cached(dir: &Path, cfg: &RunConfig) -> Option<Report> {
    let r = Report::load(&dir.join("report.json")).ok()?;
    (r.version == REPORT_VERSION && r.config_hash == cfg.content_hash()).then_some(r)
}

fn solve(run: &RunArgs, force: bool) -> crate::Result<i32> {
    let cfg = run.resolve()?;
    if !force {
        if let Some(r) = cached(&cfg.output, &cfg) {
            println!("cached report {} (config {})", cfg.output.join("report.json").display(), &r.config_hash[..12]);
            print_criteria(&r);
            return Ok(verdict(&r));
        }
    }
    let (report, prep, sol) = run_with(&cfg)?;
    write_artifacts(&cfg.output, &prep, &report, &sol)?;
    println!("report written to {}", cfg.output.join("report.json").display());
    print_criteria(&report);
    Ok(verdict(&report))
}

fn verify_cmd(config: Option<&Path>, report: &Path) -> crate::Result<i32> {
    let cfg = config.map(RunConfig::load).transpose()?;
    let r = Report::load(report)?;
    let v = verify(&r, cfg.as_ref());
    print!("{}", v.table());
    Ok(if v.passed() { EXIT_PASS } else { EXIT_CRITERION })
}

fn sweep(run: &RunArgs, lambdas: &[f64], ks: &[usize], epsilons: &[f64]) -> crate::Result<i32> {
    let base = run.resolve()?;
    let lambdas = if lambdas.is_empty() { vec![base.lambda] } else { lambdas.to_vec() };
    let ks = if ks.is_empty() { vec![base.k] } else { ks.to_vec() };
    let epsilons: Vec<Option<f64>> = if epsilons.is_empty() { vec![base.epsilon] } else { epsilons.iter().map(|e| Some(*e)).collect() };
    let mut table = String::from("lambda,k,epsilon,c2,rho,fixed_point_residual,converged,passed,failed_criteria\n");
    let mut code = EXIT_PASS;
    for &lambda in &lambdas {
        for &k in &ks {
            for &eps in &epsilons {
                let mut cfg = RunConfig { lambda, k, epsilon: eps, ..base.clone() };
                cfg.output = base.output.join(format!("lambda{lambda}_k{k}_eps{}", eps.map_or("auto".into(), |e| e.to_string())));
                cfg.validate()?;
                match run_with(&cfg) {
                    Ok((r, prep, sol)) => {
                        write_artifacts(&cfg.output, &prep, &r, &sol)?;
                        let failed: Vec<String> = r.criteria.iter().filter(|c| !c.passed).map(|c| c.id.to_string()).collect();
                        table.push_str(&format!(
                            "{lambda},{k},{},{:e},{:e},{:e},{},{},{}\n",
                            r.system.epsilon,
                            r.system.budget.c2,
                            r.system.budget.rho,
                            r.orbit.fixed_point_residual,
                            r.orbit.converged,
                            r.all_passed(),
                            failed.join(" ")
                        ));
                        code = code.max(verdict(&r));
                    }
                    Err(e) => {
                        table.push_str(&format!("{lambda},{k},{eps:?},,,,false,false,error: {e}\n"));
                        code = code.max(exit_code(&e));
                    }
                }
            }
        }
    }
    std::fs::create_dir_all(&base.output)?;
    std::fs::write(base.output.join("sweep.csv"), &table)?;
    print!("{table}");
    Ok(code)
}

fn export(report: &Path, output: &Path) -> crate::Result<i32> {
    let r = Report::load(report)?;
    std::fs::create_dir_all(output)?;
    std::fs::write(output.join("energy.csv"), r.orbit.trace.to_csv())?;
    for (name, text) in export_tables(&r) {
        std::fs::write(output.join(&name), text)?;
    }
    println!("tables written to {}", output.display());
    Ok(EXIT_PASS)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let result = match &cli.command {
        Command::Solve { run, force } => solve(run, *force),
        Command::Verify { config, report } => verify_cmd(config.as_deref(), report),
        Command::Sweep { run, lambdas, ks, epsilons } => sweep(run, lambdas, ks, epsilons),
        Command::Export { report, output } => export(report, output),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
