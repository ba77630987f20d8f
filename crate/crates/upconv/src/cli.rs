//! Command-line front end.
//!
//! Exit codes: 0 success, 1 run error, 2 bad configuration or arguments,
//! 3 partial results (failed grid points, optimizer budget exhausted,
//! ill-conditioned solve).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use upconv_core::atom::{build_damping, steady_state_with_diagnostics, AtomModel, DampingRates};
use upconv_core::dressed::{
    find_degenerate_detunings, guess_small_microwave, guess_small_pump, DegeneracyQuery,
    SearchWindow,
};
use upconv_core::nonlinear::cavity_update;
use upconv_core::optimizer::{
    optimize, scan_detunings, sweep, OptimizationProblem, OptimizationResult, OptimizerError,
    SweepVariable, Variable,
};
use upconv_core::params::{BareFrequencyUnits, ModelConfig, OutputConvention};
use upconv_core::{AtomDetunings, EnsembleSums, FieldState};

use crate::config::{self, ConfigError, LoadedConfig};
use crate::manifest::{seconds, RunManifest, Stage};
use crate::output::{Cell, Table};
use crate::validate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "upconv",
    version,
    about = "Microwave-to-optical conversion in a rare-earth ion ensemble"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model configuration; the built-in device parameters are used without one.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output-field convention, overriding the config.
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionArg {
    Paper,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Steady state of one ion at given atomic detunings.
    Steady(SteadyArgs),
    /// Coherence or efficiency maps over a detuning grid.
    Scan(ScanArgs),
    /// Optimize the conversion efficiency.
    Optimize(OptimizeArgs),
    /// Optimize at each value of a swept parameter.
    Sweep(SweepArgs),
    /// Run the built-in analytic checks.
    Validate,
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

/// Intracavity amplitudes overriding the empty-cavity response to the
/// configured inputs.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FieldArgs {
    /// Intracavity microwave amplitude, complex (e.g. `3e2+1e1i`).
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Intracavity optical amplitude, complex.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SteadyArgs {
    /// Microwave transition minus microwave cavity frequency.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub delta_a_mu: String,
    /// Optical transition minus optical cavity frequency.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub delta_a_o: String,
    #[command(flatten)]
    pub fields: FieldArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Single-ion coherences over atom–cavity detunings.
    Coherence,
    /// Ensemble conversion efficiency over atom–drive detunings.
    Efficiency,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScanArgs {
    #[arg(long, value_enum, default_value_t = ScanKind::Coherence)]
    pub kind: ScanKind,
    /// Microwave axis as `lo:hi:n` [default: 3 widths either side, 41 points].
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// Optical axis as `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub o: Option<String>,
    /// Add dressed-state degeneracy columns.
    #[arg(long)]
    pub locus: bool,
    #[command(flatten)]
    pub fields: FieldArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableArg {
    #[value(name = "atom_drive_mu")]
    AtomDriveMu,
    #[value(name = "atom_drive_o")]
    AtomDriveO,
    #[value(name = "delta_mu")]
    DeltaMu,
    #[value(name = "delta_o")]
    DeltaO,
    #[value(name = "gamma_mu_c")]
    GammaMuC,
    #[value(name = "gamma_o_c")]
    #[serde(rename = "gamma_o_c")]
    GammaOC,
}

impl From<VariableArg> for Variable {
    fn from(v: VariableArg) -> Self {
        match v {
            VariableArg::AtomDriveMu => Variable::AtomDriveMu,
            VariableArg::AtomDriveO => Variable::AtomDriveO,
            VariableArg::DeltaMu => Variable::DriveCavityMu,
            VariableArg::DeltaO => Variable::DriveCavityO,
            VariableArg::GammaMuC => Variable::CouplingMu,
            VariableArg::GammaOC => Variable::CouplingO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Free variables, comma separated [default: all].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub free: Vec<VariableArg>,
    /// Budget of the outer search, in ensemble integrals.
    #[arg(long)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepArg {
    Temperature,
    #[value(name = "pump_power")]
    PumpPower,
    #[value(name = "optical_q")]
    OpticalQ,
}

impl From<SweepArg> for SweepVariable {
    fn from(v: SweepArg) -> Self {
        match v {
            SweepArg::Temperature => SweepVariable::Temperature,
            SweepArg::PumpPower => SweepVariable::PumpPower,
            SweepArg::OpticalQ => SweepVariable::OpticalQ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub variable: SweepArg,
    /// Comma-separated values, with units (e.g. `100 mK,1 K` or `25 mW,50 mW`).
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Start every point from a fresh seed scan; points then run in parallel.
    #[arg(long)]
    pub cold: bool,
    #[command(flatten)]
    pub optimize: OptimizeArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_ERROR,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Run(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

/// State of one run: the resolved configuration and what has been written.
struct Run {
    config: ModelConfig,
    bare: BareFrequencyUnits,
    out: PathBuf,
    stages: Vec<Stage>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Run {
    fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: seconds(t.elapsed()),
        });
        v
    }

    fn write(&mut self, file: &str, table: &Table) -> Result<(), CliError> {
        let path = self.out.join(file);
        table.write(&path).map_err(|e| io_error(&path, e))?;
        self.outputs.push(file.to_string());
        Ok(())
    }

    fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }

    fn frequency(&self, name: &str, text: &str) -> Result<f64, CliError> {
        Ok(config::parse_frequency(name, text, self.bare)?)
    }
}

fn bare_name(b: BareFrequencyUnits) -> &'static str {
    match b {
        BareFrequencyUnits::Angular => "angular",
        BareFrequencyUnits::Cyclic => "cyclic",
    }
}

/// Parses `lo:hi:n` into `n` evenly spaced values.
fn axis(run: &Run, name: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || {
        CliError::Config(ConfigError::BadValue {
            key: name.to_string(),
            value: text.to_string(),
        })
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = run.frequency(name, parts[0])?;
    let hi = run.frequency(name, parts[1])?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(linspace(lo, hi, n))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn fields(run: &Run, args: &FieldArgs) -> Result<FieldState, CliError> {
    let c = &run.config;
    let empty = cavity_update(&EnsembleSums::default(), &c.cavity, &c.drive);
    Ok(FieldState {
        beta: match &args.beta {
            Some(t) => config::parse_complex("beta", t)?,
            None => empty.beta,
        },
        alpha: match &args.alpha {
            Some(t) => config::parse_complex("alpha", t)?,
            None => empty.alpha,
        },
    })
}

fn atom_model(c: &ModelConfig, f: FieldState) -> Result<AtomModel, CliError> {
    let rates = DampingRates::from_atom(&c.atom).map_err(|e| CliError::Run(e.to_string()))?;
    let damping = build_damping(&rates, c.n12());
    Ok(AtomModel::new(
        &c.atom,
        &damping,
        f,
        c.drive.omega,
        c.drive.delta_mu,
        c.drive.delta_o,
    ))
}

fn cmd_steady(run: &mut Run, args: &SteadyArgs) -> Result<bool, CliError> {
    let det = AtomDetunings {
        delta_a_mu: run.frequency("delta_a_mu", &args.delta_a_mu)?,
        delta_a_o: run.frequency("delta_a_o", &args.delta_a_o)?,
    };
    let f = fields(run, &args.fields)?;
    let model = atom_model(&run.config, f)?;
    let ss = run
        .timed("steady_state", || {
            steady_state_with_diagnostics(&model.liouvillian(det))
        })
        .map_err(|e| CliError::Run(e.to_string()))?;
    let rho = ss.rho;
    let mut t = Table::new("steady", &["row", "col", "re", "im"]);
    println!("rho =");
    for i in 0..3 {
        let mut line = String::from(" ");
        for j in 0..3 {
            let z = rho.element(i, j);
            t.push(vec![i.into(), j.into(), z.re.into(), z.im.into()]);
            line.push_str(&format!("  {:+.9e}{:+.9e}i", z.re, z.im));
        }
        println!("{line}");
    }
    let p = rho.populations();
    println!("populations = {:.12} {:.12} {:.12}", p[0], p[1], p[2]);
    println!("|rho12| = {:.9e}", rho.coherence_12().norm());
    println!("|rho13| = {:.9e}", rho.coherence_13().norm());
    run.write("steady.csv", &t)?;
    if ss.ill_conditioned {
        run.warn(format!(
            "ill-conditioned solve, pivot ratio {:e}",
            ss.pivot_ratio
        ));
        return Ok(false);
    }
    Ok(true)
}

const COHERENCE_COLUMNS: &[&str] = &[
    "delta_a_mu",
    "delta_a_o",
    "rho11",
    "rho22",
    "rho33",
    "re_rho12",
    "im_rho12",
    "abs_rho12",
    "re_rho13",
    "im_rho13",
    "abs_rho13",
    "status",
];

const LOCUS_COLUMNS: &[&str] = &[
    "locus_small_pump",
    "locus_small_microwave",
    "locus_degenerate",
];

fn or_nan<E>(r: Result<f64, E>) -> f64 {
    r.unwrap_or(f64::NAN)
}

fn cmd_scan_coherence(run: &mut Run, args: &ScanArgs) -> Result<bool, CliError> {
    let c = run.config;
    let (center_mu, center_o) = c.atom_cavity_detunings();
    let mu = match &args.mu {
        Some(t) => axis(run, "mu", t)?,
        None => linspace(
            center_mu - 3.0 * c.ensemble.sigma_mu,
            center_mu + 3.0 * c.ensemble.sigma_mu,
            41,
        ),
    };
    let o = match &args.o {
        Some(t) => axis(run, "o", t)?,
        None => linspace(
            center_o - 3.0 * c.ensemble.sigma_o,
            center_o + 3.0 * c.ensemble.sigma_o,
            41,
        ),
    };
    let f = fields(run, &args.fields)?;
    let model = atom_model(&c, f)?;
    let peaks = c.numerics.peaks;
    let window = match (mu.first(), mu.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => SearchWindow {
            lo,
            hi,
            tol: peaks.tol_sigmas * c.ensemble.sigma_mu,
        },
        _ => SearchWindow::around(center_mu, c.ensemble.sigma_mu, &peaks),
    };
    let locus = args.locus;
    let rows: Vec<Vec<(Vec<Cell>, Option<String>)>> = run.timed("scan", || {
        o.par_iter()
            .map(|&a_o| {
                let q = DegeneracyQuery {
                    delta_a_o: a_o,
                    fields: f,
                    omega: c.drive.omega,
                    delta_mu: c.drive.delta_mu,
                    delta_o: c.drive.delta_o,
                    g_mu: c.atom.g_mu,
                    g_o: c.atom.g_o,
                };
                let (small_pump, small_mw, roots) = if locus {
                    (
                        or_nan(guess_small_pump(&q)),
                        or_nan(guess_small_microwave(&q)),
                        find_degenerate_detunings(&q, &window, &peaks),
                    )
                } else {
                    (f64::NAN, f64::NAN, Vec::new())
                };
                mu.iter()
                    .map(|&a_mu| {
                        let det = AtomDetunings {
                            delta_a_mu: a_mu,
                            delta_a_o: a_o,
                        };
                        let mut row: Vec<Cell> = vec![a_mu.into(), a_o.into()];
                        let err = match steady_state_with_diagnostics(&model.liouvillian(det)) {
                            Ok(ss) => {
                                let p = ss.rho.populations();
                                let r12 = ss.rho.coherence_12();
                                let r13 = ss.rho.coherence_13();
                                for x in [
                                    p[0],
                                    p[1],
                                    p[2],
                                    r12.re,
                                    r12.im,
                                    r12.norm(),
                                    r13.re,
                                    r13.im,
                                    r13.norm(),
                                ] {
                                    row.push(x.into());
                                }
                                if ss.ill_conditioned {
                                    row.push("ill_conditioned".into());
                                    Some(format!("ill-conditioned solve at ({a_mu:e}, {a_o:e})"))
                                } else {
                                    row.push("ok".into());
                                    None
                                }
                            }
                            Err(e) => {
                                row.extend((0..9).map(|_| Cell::Real(f64::NAN)));
                                row.push("failed".into());
                                Some(format!("steady state at ({a_mu:e}, {a_o:e}): {e}"))
                            }
                        };
                        if locus {
                            let nearest = roots
                                .iter()
                                .copied()
                                .min_by(|x, y| (x - a_mu).abs().total_cmp(&(y - a_mu).abs()))
                                .unwrap_or(f64::NAN);
                            row.extend([small_pump.into(), small_mw.into(), nearest.into()]);
                        }
                        (row, err)
                    })
                    .collect()
            })
            .collect()
    });
    let mut columns = COHERENCE_COLUMNS.to_vec();
    if locus {
        columns.extend_from_slice(LOCUS_COLUMNS);
    }
    let mut t = Table::new("scan-coherence", &columns);
    let mut ok = true;
    for (row, err) in rows.into_iter().flatten() {
        if let Some(e) = err {
            run.warn(e);
            ok = false;
        }
        t.push(row);
    }
    println!("{} grid points", t.rows.len());
    run.write("scan.csv", &t)?;
    Ok(ok)
}

fn cmd_scan_efficiency(run: &mut Run, args: &ScanArgs) -> Result<bool, CliError> {
    let c = run.config;
    let (s_mu, s_o) = (c.ensemble.sigma_mu, c.ensemble.sigma_o);
    let mu = match &args.mu {
        Some(t) => axis(run, "mu", t)?,
        None => linspace(-3.0 * s_mu, 3.0 * s_mu, 21),
    };
    let o = match &args.o {
        Some(t) => axis(run, "o", t)?,
        None => linspace(-3.0 * s_o, 3.0 * s_o, 21),
    };
    let points: Vec<_> = run.timed("scan", || {
        o.par_iter()
            .map(|&a_o| scan_detunings(&c, &mu, &[a_o]))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let mut columns = vec![
        "atom_drive_mu",
        "atom_drive_o",
        "delta_mu",
        "delta_o",
        "efficiency",
        "microwave_transmission",
        "optical_transmission",
        "status",
    ];
    if args.locus {
        columns.push("locus_small_microwave");
    }
    let w2 = c.drive.omega.norm_sqr();
    let mut t = Table::new("scan-efficiency", &columns);
    let mut ok = true;
    let mut best = f64::NEG_INFINITY;
    for p in points {
        let mut row: Vec<Cell> = vec![
            p.atom_drive_mu.into(),
            p.atom_drive_o.into(),
            p.delta_mu.into(),
            p.delta_o.into(),
            p.efficiency.into(),
            p.microwave_transmission.into(),
            p.optical_transmission.into(),
        ];
        match &p.error {
            Some(e) => {
                run.warn(format!(
                    "point ({:e}, {:e}): {e}",
                    p.atom_drive_mu, p.atom_drive_o
                ));
                ok = false;
                row.push("failed".into());
            }
            None => {
                best = best.max(p.efficiency);
                row.push("ok".into());
            }
        }
        if args.locus {
            let x = if p.atom_drive_o != 0.0 {
                w2 / p.atom_drive_o
            } else {
                f64::NAN
            };
            row.push(x.into());
        }
        t.push(row);
    }
    println!("{} grid points, best efficiency {best:.6}", t.rows.len());
    run.write("scan.csv", &t)?;
    Ok(ok)
}

fn problem(run: &Run, args: &OptimizeArgs) -> OptimizationProblem {
    let mut p = OptimizationProblem::new(&run.config);
    if !args.free.is_empty() {
        let vars: Vec<Variable> = args.free.iter().map(|&v| v.into()).collect();
        p = p.with_free(&vars);
    }
    if let Some(n) = args.max_evals {
        p.settings.outer.max_evals = n;
    }
    p
}

const RESULT_COLUMNS: &[&str] = &[
    "efficiency",
    "atom_drive_mu",
    "atom_drive_o",
    "delta_mu",
    "delta_o",
    "gamma_mu_c",
    "gamma_o_c",
    "evaluations",
    "seed_efficiency",
    "flag",
];

fn result_cells(r: &Result<OptimizationResult, OptimizerError>) -> Vec<Cell> {
    match r {
        Ok(r) => {
            let mut row: Vec<Cell> = vec![r.efficiency.into()];
            row.extend(Variable::ALL.iter().map(|&v| Cell::Real(r.value(v))));
            row.push(r.evaluations.into());
            row.push(r.seed_efficiency.into());
            row.push(if r.converged { "converged" } else { "budget" }.into());
            row
        }
        Err(_) => {
            let mut row: Vec<Cell> = (0..7).map(|_| Cell::Real(f64::NAN)).collect();
            row.push(0usize.into());
            row.push(f64::NAN.into());
            row.push("error".into());
            row
        }
    }
}

fn cmd_optimize(run: &mut Run, args: &OptimizeArgs) -> Result<bool, CliError> {
    let p = problem(run, args);
    let r = run.timed("optimize", || optimize(&p));
    let mut t = Table::new("optimize", RESULT_COLUMNS);
    t.push(result_cells(&r));
    run.write("optimize.csv", &t)?;
    let r = r.map_err(|e| CliError::Run(e.to_string()))?;
    println!(
        "best efficiency {:.6} after {} ensemble evaluations",
        r.efficiency, r.evaluations
    );
    for v in Variable::ALL {
        println!("  {} = {:e}", v.name(), r.value(v));
    }
    if !r.converged {
        run.warn("optimizer budget exhausted before convergence".to_string());
    }
    Ok(r.converged)
}

fn cmd_sweep(run: &mut Run, args: &SweepArgs) -> Result<bool, CliError> {
    let variable: SweepVariable = args.variable.into();
    let values = args
        .values
        .iter()
        .map(|s| config::parse_sweep_value(variable, s.trim()))
        .collect::<Result<Vec<f64>, _>>()?;
    let p = problem(run, &args.optimize);
    let rows = run.timed("sweep", || {
        if args.cold {
            values
                .par_iter()
                .map(|&v| sweep(&p, variable, &[v], false).remove(0))
                .collect()
        } else {
            sweep(&p, variable, &values, true)
        }
    });
    let mut columns = vec![variable.name()];
    columns.extend_from_slice(RESULT_COLUMNS);
    let mut t = Table::new("sweep", &columns);
    let mut ok = true;
    let mut best: Option<(f64, f64)> = None;
    for row in &rows {
        let mut cells: Vec<Cell> = vec![row.value.into()];
        cells.extend(result_cells(&row.result));
        t.push(cells);
        match &row.result {
            Ok(r) => {
                if !r.converged {
                    run.warn(format!(
                        "{} = {:e}: budget exhausted",
                        variable.name(),
                        row.value
                    ));
                    ok = false;
                }
                if best.is_none_or(|(e, _)| r.efficiency > e) {
                    best = Some((r.efficiency, row.value));
                }
            }
            Err(e) => {
                run.warn(format!("{} = {:e}: {e}", variable.name(), row.value));
                ok = false;
            }
        }
    }
    run.write("sweep.csv", &t)?;
    for row in &rows {
        if let Ok(r) = &row.result {
            println!(
                "{} = {:e}: efficiency {:.6}",
                variable.name(),
                row.value,
                r.efficiency
            );
        }
    }
    match best {
        Some((e, v)) => println!("best efficiency {e:.6} at {} = {v:e}", variable.name()),
        None => println!("no point could be optimized"),
    }
    Ok(ok)
}

fn cmd_validate(run: &mut Run) -> Result<bool, CliError> {
    let checks = run.timed("validate", validate::run_all);
    let mut t = Table::new("validate", &["check", "passed", "detail"]);
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.passed {
            failed += 1;
        }
        t.push(vec![
            c.name.into(),
            c.passed.to_string().into(),
            c.detail.clone().into(),
        ]);
    }
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    run.write("validate.csv", &t)?;
    if failed > 0 {
        return Err(CliError::Run(format!("{failed} validation checks failed")));
    }
    Ok(true)
}

fn dispatch(run: &mut Run, command: &Command) -> Result<bool, CliError> {
    match command {
        Command::Steady(a) => cmd_steady(run, a),
        Command::Scan(a) => match a.kind {
            ScanKind::Coherence => cmd_scan_coherence(run, a),
            ScanKind::Efficiency => cmd_scan_efficiency(run, a),
        },
        Command::Optimize(a) => cmd_optimize(run, a),
        Command::Sweep(a) => cmd_sweep(run, a),
        Command::Validate => cmd_validate(run),
        Command::Replay(_) => Err(CliError::Run("a manifest cannot record a replay".into())),
    }
}

struct Invocation {
    command: Command,
    loaded: LoadedConfig,
    config_source: Option<String>,
    out: PathBuf,
    workers: Option<usize>,
}

fn resolve(cli: &Cli) -> Result<Invocation, CliError> {
    let common = &cli.common;
    let (command, mut loaded, source, out, workers) = match &cli.command {
        Command::Replay(r) => {
            let m = RunManifest::read(&r.manifest).map_err(CliError::Run)?;
            let mut loaded = config::parse_config(&m.config)?;
            loaded.bare_frequency = match m.bare_frequency.as_str() {
                "cyclic" => BareFrequencyUnits::Cyclic,
                _ => BareFrequencyUnits::Angular,
            };
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            (
                m.command,
                loaded,
                m.config_source,
                out,
                common.workers.or(Some(m.workers)),
            )
        }
        c => {
            let loaded = match &common.config {
                Some(path) => config::load_config(path)?,
                None => config::parse_config("")?,
            };
            let source = common.config.as_ref().map(|p| p.display().to_string());
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            (c.clone(), loaded, source, out, common.workers)
        }
    };
    if let Some(conv) = common.convention {
        loaded.model.convention = match conv {
            ConventionArg::Paper => OutputConvention::Paper,
            ConventionArg::Standard => OutputConvention::Standard,
        };
    }
    Ok(Invocation {
        command,
        loaded,
        config_source: source,
        out,
        workers,
    })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let inv = match resolve(&cli) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    if let Some(n) = inv.workers {
        // fails only if a pool already exists, e.g. in-process reuse
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    if let Err(e) = std::fs::create_dir_all(&inv.out) {
        eprintln!("{}", io_error(&inv.out, e));
        return EXIT_ERROR;
    }
    let mut run = Run {
        config: inv.loaded.model,
        bare: inv.loaded.bare_frequency,
        out: inv.out.clone(),
        stages: Vec::new(),
        outputs: Vec::new(),
        warnings: Vec::new(),
    };
    let (code, error) = match dispatch(&mut run, &inv.command) {
        Ok(true) => (EXIT_OK, None),
        Ok(false) => (EXIT_PARTIAL, None),
        Err(e) => {
            eprintln!("{e}");
            (e.exit_code(), Some(e))
        }
    };
    if matches!(error, Some(CliError::Config(_))) {
        return code;
    }
    let manifest = RunManifest {
        tool: "upconv".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: inv.command,
        argv: argv
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        config_source: inv.config_source,
        bare_frequency: bare_name(run.bare).into(),
        config: config::render_config(&run.config),
        workers: rayon::current_num_threads(),
        outputs: run.outputs,
        warnings: run.warnings,
        exit_code: code,
        wall_time_s: seconds(started.elapsed()),
        stages: run.stages,
    };
    let path = inv.out.join("manifest.json");
    if let Err(e) = manifest.write(&path) {
        eprintln!("{}", io_error(&path, e));
        return EXIT_ERROR;
    }
    code
}
