//! Maximization of the linear-model conversion efficiency.
//!
//! The ensemble terms depend on the detunings only through the atom–drive
//! detunings `Δ_μ = c_μ − δ_μ` and `Δ_o = c_o − δ_o`, where `c` are the mean
//! atom–cavity detunings and `δ` the drive–cavity detunings. The search is
//! therefore nested: an outer simplex over the atom–drive detunings, each
//! point needing one ensemble integral, and for every outer point an inner
//! simplex over the drive–cavity detunings and the coupling rates, which only
//! enter the closed-form scattering coefficients.
//!
//! The pump Rabi frequency is held at the value in the configuration while
//! the optical coupling rate is varied.

pub mod nelder_mead;

use alloc::vec::Vec;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linear::{conversion_efficiency, linear_sterms, scattering, LinearError, STerms};
use crate::math::{abs, sqrt};
use crate::params::{AtomParams, EnsembleSpec, ModelConfig, OutputConvention, ParamError};
use crate::units::effective_microwave_atom_number;

pub use nelder_mead::{minimize, NelderMeadResult, NelderMeadSettings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("pulling guess is singular for a zero atomic detuning")]
    ZeroDetuning,
    #[error("no grid point of the seed scan could be evaluated")]
    NoValidSeed,
    #[error("invalid bounds for {0:?}")]
    InvalidBounds(Variable),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Optimization variables. The declaration order is the canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    /// Mean microwave atomic detuning from the microwave drive.
    AtomDriveMu,
    /// Mean optical atomic detuning from the optical drive.
    AtomDriveO,
    /// Microwave drive minus microwave cavity resonance, `δ_μ`.
    DriveCavityMu,
    /// Optical drive minus optical cavity resonance, `δ_o`.
    DriveCavityO,
    CouplingMu,
    CouplingO,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::AtomDriveMu,
        Variable::AtomDriveO,
        Variable::DriveCavityMu,
        Variable::DriveCavityO,
        Variable::CouplingMu,
        Variable::CouplingO,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::AtomDriveMu => "atom_drive_mu",
            Variable::AtomDriveO => "atom_drive_o",
            Variable::DriveCavityMu => "delta_mu",
            Variable::DriveCavityO => "delta_o",
            Variable::CouplingMu => "gamma_mu_c",
            Variable::CouplingO => "gamma_o_c",
        }
    }

    fn is_outer(self) -> bool {
        matches!(self, Variable::AtomDriveMu | Variable::AtomDriveO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// Full set of values the optimizer can change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub atom_drive_mu: f64,
    pub atom_drive_o: f64,
    pub delta_mu: f64,
    pub delta_o: f64,
    pub gamma_mu_c: f64,
    pub gamma_o_c: f64,
}

impl OperatingPoint {
    pub fn from_config(config: &ModelConfig) -> Self {
        let (c_mu, c_o) = config.atom_cavity_detunings();
        OperatingPoint {
            atom_drive_mu: c_mu - config.drive.delta_mu,
            atom_drive_o: c_o - config.drive.delta_o,
            delta_mu: config.drive.delta_mu,
            delta_o: config.drive.delta_o,
            gamma_mu_c: config.cavity.gamma_mu_c,
            gamma_o_c: config.cavity.gamma_o_c,
        }
    }

    pub fn get(&self, v: Variable) -> f64 {
        match v {
            Variable::AtomDriveMu => self.atom_drive_mu,
            Variable::AtomDriveO => self.atom_drive_o,
            Variable::DriveCavityMu => self.delta_mu,
            Variable::DriveCavityO => self.delta_o,
            Variable::CouplingMu => self.gamma_mu_c,
            Variable::CouplingO => self.gamma_o_c,
        }
    }

    pub fn set(&mut self, v: Variable, x: f64) {
        match v {
            Variable::AtomDriveMu => self.atom_drive_mu = x,
            Variable::AtomDriveO => self.atom_drive_o = x,
            Variable::DriveCavityMu => self.delta_mu = x,
            Variable::DriveCavityO => self.delta_o = x,
            Variable::CouplingMu => self.gamma_mu_c = x,
            Variable::CouplingO => self.gamma_o_c = x,
        }
    }

    /// Writes the point into a configuration. The cavities move so that the
    /// atom–cavity detunings equal atom–drive plus drive–cavity.
    pub fn apply(&self, config: &ModelConfig) -> ModelConfig {
        let mut c = *config;
        c.drive.delta_mu = self.delta_mu;
        c.drive.delta_o = self.delta_o;
        c.cavity.gamma_mu_c = self.gamma_mu_c;
        c.cavity.gamma_o_c = self.gamma_o_c;
        c.set_atom_cavity_detunings(
            self.atom_drive_mu + self.delta_mu,
            self.atom_drive_o + self.delta_o,
        );
        c
    }
}

/// `|C_ab|²` of the linear model at `point`, computed from scratch.
pub fn efficiency_at(config: &ModelConfig, point: &OperatingPoint) -> Result<f64, LinearError> {
    conversion_efficiency(&point.apply(config))
}

/// Drive–cavity detunings that put each drive on the cavity resonance pulled
/// by the dispersive atoms, `δ_μ = −N_μ g_μ² / Δ_μ` and `δ_o = −N_o g_o² / Δ_o`,
/// for atom–drive detunings `Δ`.
pub fn pulling_guess(
    atom_drive_mu: f64,
    atom_drive_o: f64,
    spec: &EnsembleSpec,
    atom: &AtomParams,
) -> Result<(f64, f64), OptimizerError> {
    if atom_drive_mu == 0.0 || atom_drive_o == 0.0 {
        return Err(OptimizerError::ZeroDetuning);
    }
    let n_mu = effective_microwave_atom_number(spec, atom.omega_12);
    Ok((
        -n_mu * atom.g_mu * atom.g_mu / atom_drive_mu,
        -spec.n_o * atom.g_o * atom.g_o / atom_drive_o,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Seed-scan grid size per outer variable.
    pub scan_points: usize,
    /// Outer bounds, in units of the inhomogeneous widths.
    pub detuning_sigmas: f64,
    /// Coupling bounds as multiples of the intrinsic loss.
    pub coupling_min: f64,
    pub coupling_max: f64,
    pub outer: NelderMeadSettings,
    pub inner: NelderMeadSettings,
    /// First compass-probe step, as a fraction of each box width.
    pub stencil_step: f64,
    /// Improvements below this are not worth another probe round.
    pub stencil_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            scan_points: 6,
            detuning_sigmas: 10.0,
            coupling_min: 0.1,
            coupling_max: 100.0,
            outer: NelderMeadSettings {
                max_evals: 150,
                f_tol: 1e-9,
                x_tol: 1e-5,
                initial_step: 0.05,
                restart_shrink: 0.25,
            },
            inner: NelderMeadSettings {
                max_evals: 3000,
                f_tol: 1e-15,
                x_tol: 1e-11,
                initial_step: 0.02,
                restart_shrink: 0.25,
            },
            stencil_step: 1e-3,
            stencil_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub config: ModelConfig,
    /// Free variables with their boxes; all others stay at the values in
    /// `config`.
    pub free: Vec<(Variable, Bounds)>,
    pub settings: OptimizerSettings,
    /// Starting point; a grid scan over the outer variables is used if absent.
    pub seed: Option<OperatingPoint>,
}

impl OptimizationProblem {
    /// All six variables free with the default boxes. The optical atom number
    /// is set to the total.
    pub fn new(config: &ModelConfig) -> Self {
        let mut c = *config;
        c.ensemble.n_o = c.ensemble.n_total;
        let settings = OptimizerSettings::default();
        let free = Variable::ALL
            .iter()
            .map(|&v| (v, default_bounds(&c, &settings, v)))
            .collect();
        OptimizationProblem {
            config: c,
            free,
            settings,
            seed: None,
        }
    }

    /// Keeps only the listed variables free.
    pub fn with_free(mut self, vars: &[Variable]) -> Self {
        self.free.retain(|(v, _)| vars.contains(v));
        self
    }

    fn sorted(&self) -> Vec<(Variable, Bounds)> {
        let mut f = self.free.clone();
        f.sort_by_key(|(v, _)| *v);
        f.dedup_by_key(|(v, _)| *v);
        f
    }

    fn validate(&self) -> Result<(), OptimizerError> {
        for (v, b) in &self.free {
            let ok = b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi;
            let coupling = matches!(v, Variable::CouplingMu | Variable::CouplingO);
            if !ok || (coupling && b.lo < 0.0) {
                return Err(OptimizerError::InvalidBounds(*v));
            }
        }
        Ok(())
    }
}

/// Default box of one variable. Drive–cavity boxes are not fixed in advance:
/// they follow the ensemble terms of each outer point (see [`optimize`]), and
/// the box returned here is only used for stencil probes.
pub fn default_bounds(config: &ModelConfig, settings: &OptimizerSettings, v: Variable) -> Bounds {
    let e = &config.ensemble;
    let c = &config.cavity;
    match v {
        Variable::AtomDriveMu => {
            let w = settings.detuning_sigmas * e.sigma_mu;
            Bounds::new(-w, w)
        }
        Variable::AtomDriveO => {
            let w = settings.detuning_sigmas * e.sigma_o;
            Bounds::new(-w, w)
        }
        Variable::DriveCavityMu => {
            let w = settings.detuning_sigmas * e.sigma_mu;
            Bounds::new(-w, w)
        }
        Variable::DriveCavityO => {
            let w = settings.detuning_sigmas * e.sigma_o;
            Bounds::new(-w, w)
        }
        Variable::CouplingMu => Bounds::new(
            settings.coupling_min * c.gamma_mu_i,
            settings.coupling_max * c.gamma_mu_i,
        ),
        Variable::CouplingO => Bounds::new(
            settings.coupling_min * c.gamma_o_i,
            settings.coupling_max * c.gamma_o_i,
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub efficiency: f64,
    pub point: OperatingPoint,
    /// Ensemble integrals performed.
    pub evaluations: usize,
    pub converged: bool,
    pub seed_efficiency: f64,
}

impl OptimizationResult {
    pub fn value(&self, v: Variable) -> f64 {
        self.point.get(v)
    }
}

/// Ensemble terms for atom–drive detunings, with the drives on the cavity
/// resonances. They do not depend on the drive–cavity detunings.
fn sterms_at(config: &ModelConfig, a_mu: f64, a_o: f64) -> Result<STerms, LinearError> {
    let mut c = *config;
    c.drive.delta_mu = 0.0;
    c.drive.delta_o = 0.0;
    c.set_atom_cavity_detunings(a_mu, a_o);
    linear_sterms(&c)
}

fn closed_form_efficiency(
    s: &STerms,
    config: &ModelConfig,
    delta_mu: f64,
    delta_o: f64,
    gamma_mu_c: f64,
    gamma_o_c: f64,
) -> f64 {
    let mut cav = config.cavity;
    cav.gamma_mu_c = gamma_mu_c;
    cav.gamma_o_c = gamma_o_c;
    let mut drive = config.drive;
    drive.delta_mu = delta_mu;
    drive.delta_o = delta_o;
    scattering(s, &cav, &drive, OutputConvention::Paper)
        .map(|c| c.efficiency())
        .unwrap_or(0.0)
}

/// Best inner variables for fixed ensemble terms.
fn inner_optimum(
    s: &STerms,
    problem: &OptimizationProblem,
    free: &[(Variable, Bounds)],
    base: &OperatingPoint,
) -> (OperatingPoint, f64) {
    let config = &problem.config;
    let inner: Vec<(Variable, Bounds)> = free
        .iter()
        .filter(|(v, _)| !v.is_outer())
        .map(|&(v, b)| (v, inner_bounds(s, config, &problem.settings, v, b, free)))
        .collect();
    let eval = |p: &OperatingPoint| {
        closed_form_efficiency(s, config, p.delta_mu, p.delta_o, p.gamma_mu_c, p.gamma_o_c)
    };
    if inner.is_empty() {
        return (*base, eval(base));
    }
    let lower: Vec<f64> = inner.iter().map(|(_, b)| b.lo).collect();
    let upper: Vec<f64> = inner.iter().map(|(_, b)| b.hi).collect();
    let objective = |x: &[f64]| {
        let mut p = *base;
        for ((v, _), &xi) in inner.iter().zip(x) {
            p.set(*v, xi);
        }
        -eval(&p)
    };

    // Start on the dispersively shifted resonances, and on the two normal
    // modes split by the cross coupling.
    let split = sqrt((s.s_alpha_12 * s.s_beta_13).norm());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for shift in [0.0, split, -split] {
        let x0: Vec<f64> = inner
            .iter()
            .map(|&(v, b)| {
                let x = match v {
                    Variable::DriveCavityMu => s.s_beta_12.re + shift,
                    Variable::DriveCavityO => s.s_alpha_13.re + shift,
                    other => base.get(other),
                };
                b.clamp(x)
            })
            .collect();
        let r = minimize(objective, &x0, &lower, &upper, &problem.settings.inner);
        if best.as_ref().is_none_or(|(_, f)| r.f < *f) {
            best = Some((r.x, r.f));
        }
        if split == 0.0 {
            break;
        }
    }
    let (x, _) = best.unwrap();
    let mut p = *base;
    for ((v, _), &xi) in inner.iter().zip(&x) {
        p.set(*v, xi);
    }
    (p, eval(&p))
}

/// Box of an inner variable. Drive–cavity detunings get a window around the
/// dispersively shifted resonance wide enough for any coupling in its box.
fn inner_bounds(
    s: &STerms,
    config: &ModelConfig,
    settings: &OptimizerSettings,
    v: Variable,
    given: Bounds,
    free: &[(Variable, Bounds)],
) -> Bounds {
    let coupling_hi = |var: Variable, fallback: f64| {
        free.iter()
            .find(|(w, _)| *w == var)
            .map_or(fallback, |(_, b)| b.hi)
    };
    let cross = sqrt((s.s_alpha_12 * s.s_beta_13).norm());
    match v {
        Variable::DriveCavityMu => {
            let g = 0.5
                * (coupling_hi(Variable::CouplingMu, config.cavity.gamma_mu_c)
                    + config.cavity.gamma_mu_i);
            let w = 20.0 * g.max(abs(s.s_beta_12.im)).max(cross);
            Bounds::new(s.s_beta_12.re - w, s.s_beta_12.re + w)
        }
        Variable::DriveCavityO => {
            let g = 0.5
                * (coupling_hi(Variable::CouplingO, config.cavity.gamma_o_c)
                    + config.cavity.gamma_o_i);
            let w = 20.0 * g.max(abs(s.s_alpha_13.im)).max(cross);
            Bounds::new(s.s_alpha_13.re - w, s.s_alpha_13.re + w)
        }
        _ => {
            let _ = settings;
            given
        }
    }
}

/// Outer objective: the best inner efficiency at given atom–drive detunings.
struct Outer<'a> {
    problem: &'a OptimizationProblem,
    free: Vec<(Variable, Bounds)>,
    outer: Vec<(Variable, Bounds)>,
    base: OperatingPoint,
    evaluations: usize,
}

impl Outer<'_> {
    fn point_from(&self, x: &[f64]) -> OperatingPoint {
        let mut p = self.base;
        for ((v, _), &xi) in self.outer.iter().zip(x) {
            p.set(*v, xi);
        }
        p
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<(OperatingPoint, f64), LinearError> {
        let p = self.point_from(x);
        self.evaluations += 1;
        let s = sterms_at(&self.problem.config, p.atom_drive_mu, p.atom_drive_o)?;
        Ok(inner_optimum(&s, self.problem, &self.free, &p))
    }
}

/// Grid of the outer variables used as the seed scan.
fn seed_grid(outer: &[(Variable, Bounds)], n: usize) -> Vec<Vec<f64>> {
    let n = n.max(1);
    let axis = |b: &Bounds| -> Vec<f64> {
        if n == 1 {
            return alloc::vec![0.5 * (b.lo + b.hi)];
        }
        // interior points only: the box faces are poor seeds
        (0..n)
            .map(|k| b.lo + (b.hi - b.lo) * (k as f64 + 0.5) / n as f64)
            .collect()
    };
    let mut pts: Vec<Vec<f64>> = alloc::vec![Vec::new()];
    for (_, b) in outer {
        let ax = axis(b);
        let mut next = Vec::with_capacity(pts.len() * ax.len());
        for p in &pts {
            for &a in &ax {
                let mut q = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Maximizes `|C_ab|²` over the free variables.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult, OptimizerError> {
    problem.validate()?;
    problem.config.validate()?;
    let free = problem.sorted();
    let outer_vars: Vec<(Variable, Bounds)> =
        free.iter().filter(|(v, _)| v.is_outer()).copied().collect();
    let mut base = problem
        .seed
        .unwrap_or_else(|| OperatingPoint::from_config(&problem.config));
    for (v, b) in &free {
        base.set(*v, b.clamp(base.get(*v)));
    }
    let mut obj = Outer {
        problem,
        free: free.clone(),
        outer: outer_vars.clone(),
        base,
        evaluations: 0,
    };

    // seed
    let mut x0: Vec<f64> = outer_vars.iter().map(|(v, _)| base.get(*v)).collect();
    let mut seed_eff = f64::NEG_INFINITY;
    if problem.seed.is_some() || outer_vars.is_empty() {
        if let Ok((_, e)) = obj.evaluate(&x0) {
            seed_eff = e;
        }
    } else {
        for g in seed_grid(&outer_vars, problem.settings.scan_points) {
            if let Ok((_, e)) = obj.evaluate(&g) {
                if e > seed_eff {
                    seed_eff = e;
                    x0 = g;
                }
            }
        }
    }
    if !seed_eff.is_finite() {
        return Err(OptimizerError::NoValidSeed);
    }

    let lower: Vec<f64> = outer_vars.iter().map(|(_, b)| b.lo).collect();
    let upper: Vec<f64> = outer_vars.iter().map(|(_, b)| b.hi).collect();
    let mut converged = true;
    let mut x = x0.clone();
    if !outer_vars.is_empty() {
        let r = minimize(
            |x| match obj.evaluate(x) {
                Ok((_, e)) => -e,
                Err(_) => f64::INFINITY,
            },
            &x0,
            &lower,
            &upper,
            &problem.settings.outer,
        );
        converged = r.converged;
        x = r.x;
    }
    let (mut point, mut eff) = obj.evaluate(&x)?;

    // compass polish over the outer variables
    let mut step = problem.settings.stencil_step;
    for _ in 0..40 {
        if outer_vars.is_empty() {
            break;
        }
        let mut improved = false;
        for k in 0..outer_vars.len() {
            for sign in [1.0, -1.0] {
                let mut y: Vec<f64> = outer_vars.iter().map(|(v, _)| point.get(*v)).collect();
                y[k] = (y[k] + sign * step * (upper[k] - lower[k])).clamp(lower[k], upper[k]);
                if let Ok((p, e)) = obj.evaluate(&y) {
                    if e > eff + problem.settings.stencil_tol {
                        point = p;
                        eff = e;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            if step <= 0.1 * problem.settings.stencil_step {
                break;
            }
            step *= 0.1;
        }
    }

    // report the from-scratch value so re-evaluation reproduces it exactly
    let efficiency = efficiency_at(&problem.config, &point)?;
    Ok(OptimizationResult {
        efficiency,
        point,
        evaluations: obj.evaluations + 1,
        converged,
        seed_efficiency: seed_eff,
    })
}

/// Largest efficiency gain found by moving each free variable by
/// `±rel_step` of its box width, everything else fixed.
pub fn stencil_probe(
    problem: &OptimizationProblem,
    result: &OptimizationResult,
    rel_step: f64,
) -> Result<f64, OptimizerError> {
    let mut best = f64::NEG_INFINITY;
    for (v, b) in problem.sorted() {
        let bounds = if v.is_outer() || matches!(v, Variable::CouplingMu | Variable::CouplingO) {
            b
        } else {
            // drive–cavity detunings: probe on the scale of the cavity linewidth
            let g = match v {
                Variable::DriveCavityMu => problem.config.cavity.gamma_mu_i,
                _ => problem.config.cavity.gamma_o_i,
            };
            let x = result.point.get(v);
            Bounds::new(x - 10.0 * g, x + 10.0 * g)
        };
        for sign in [1.0, -1.0] {
            let mut p = result.point;
            let x = (p.get(v) + sign * rel_step * (bounds.hi - bounds.lo))
                .clamp(b.lo.min(bounds.lo), b.hi.max(bounds.hi));
            p.set(v, x);
            let e = efficiency_at(&problem.config, &p)?;
            best = best.max(e - result.efficiency);
        }
    }
    Ok(best)
}

/// One grid point of a detuning scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub atom_drive_mu: f64,
    pub atom_drive_o: f64,
    pub delta_mu: f64,
    pub delta_o: f64,
    pub efficiency: f64,
    pub microwave_transmission: f64,
    pub optical_transmission: f64,
    pub error: Option<LinearError>,
}

/// Efficiency and transmission maps over atom–drive detunings, with the
/// drives on the pulled cavity resonances.
pub fn scan_detunings(config: &ModelConfig, mu: &[f64], o: &[f64]) -> Vec<ScanPoint> {
    let mut out = Vec::with_capacity(mu.len() * o.len());
    for &a_o in o {
        for &a_mu in mu {
            let (d_mu, d_o) =
                pulling_guess(a_mu, a_o, &config.ensemble, &config.atom).unwrap_or((0.0, 0.0));
            let point = OperatingPoint {
                atom_drive_mu: a_mu,
                atom_drive_o: a_o,
                delta_mu: d_mu,
                delta_o: d_o,
                gamma_mu_c: config.cavity.gamma_mu_c,
                gamma_o_c: config.cavity.gamma_o_c,
            };
            let c = point.apply(config);
            let res = sterms_at(config, a_mu, a_o)
                .and_then(|s| scattering(&s, &c.cavity, &c.drive, c.convention));
            let (e, tb, ta, err) = match res {
                Ok(sc) => (
                    sc.efficiency(),
                    sc.microwave_transmission(),
                    sc.optical_transmission(),
                    None,
                ),
                Err(e) => (f64::NAN, f64::NAN, f64::NAN, Some(e)),
            };
            out.push(ScanPoint {
                atom_drive_mu: a_mu,
                atom_drive_o: a_o,
                delta_mu: d_mu,
                delta_o: d_o,
                efficiency: e,
                microwave_transmission: tb,
                optical_transmission: ta,
                error: err,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Temperature,
    PumpPower,
    OpticalQ,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Temperature => "temperature",
            SweepVariable::PumpPower => "pump_power",
            SweepVariable::OpticalQ => "optical_q",
        }
    }

    pub fn apply(self, config: &mut ModelConfig, value: f64) -> Result<(), ParamError> {
        match self {
            SweepVariable::Temperature => config.set_temperature(value),
            SweepVariable::PumpPower => config.set_pump_power(value),
            SweepVariable::OpticalQ => config.set_optical_q(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: Result<OptimizationResult, OptimizerError>,
}

/// Optimizes at every value in turn. With `warm_start` each point starts from
/// the previous optimum instead of a fresh seed scan.
pub fn sweep(
    problem: &OptimizationProblem,
    variable: SweepVariable,
    values: &[f64],
    warm_start: bool,
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(values.len());
    let mut previous: Option<OperatingPoint> = None;
    for &value in values {
        let mut p = problem.clone();
        let result = variable
            .apply(&mut p.config, value)
            .map_err(OptimizerError::from)
            .and_then(|_| {
                rebound(&mut p, problem);
                if warm_start {
                    if let Some(prev) = previous {
                        p.seed = Some(prev);
                    }
                }
                optimize(&p)
            });
        if let Ok(r) = &result {
            previous = Some(r.point);
        }
        rows.push(SweepRow { value, result });
    }
    rows
}

/// Coupling boxes follow the intrinsic losses, which a Q sweep changes.
fn rebound(p: &mut OptimizationProblem, original: &OptimizationProblem) {
    let defaults_then = |v| default_bounds(&original.config, &original.settings, v);
    for (v, b) in p.free.iter_mut() {
        if matches!(v, Variable::CouplingMu | Variable::CouplingO) && *b == defaults_then(*v) {
            *b = default_bounds(&p.config, &p.settings, *v);
        }
    }
}

/// Phase-free summary of a complex number, used by tests and reports.
pub fn magnitude(z: C64) -> f64 {
    z.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::BareFrequencyUnits;
    use crate::units::TWO_PI;

    #[test]
    fn pulling_formula() {
        let c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        let (d_mu, d_o) = pulling_guess(TWO_PI * 10e6, TWO_PI * 1e9, &c.ensemble, &c.atom).unwrap();
        let n_mu = effective_microwave_atom_number(&c.ensemble, c.atom.omega_12);
        assert!((n_mu / 0.8337e16 - 1.0).abs() < 1e-3);
        assert!((d_mu + n_mu * c.atom.g_mu * c.atom.g_mu / (TWO_PI * 10e6)).abs() < 1e-3);
        assert!((d_o + 1e16 * 51.9 * 51.9 / (TWO_PI * 1e9)).abs() < 1e-3);
        let (far, _) = pulling_guess(1e30, 1.0, &c.ensemble, &c.atom).unwrap();
        assert!(far.abs() < 1e-10);
        let mut e = c.ensemble;
        e.n_total *= 2.0;
        let (d2, _) = pulling_guess(TWO_PI * 10e6, TWO_PI * 1e9, &e, &c.atom).unwrap();
        assert!((d2 / d_mu - 2.0).abs() < 1e-14);
        assert_eq!(
            pulling_guess(0.0, 1.0, &c.ensemble, &c.atom),
            Err(OptimizerError::ZeroDetuning)
        );
    }

    #[test]
    fn operating_point_roundtrip() {
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        c.drive.delta_mu = 1e5;
        c.set_atom_cavity_detunings(3e7, -2e9);
        let p = OperatingPoint::from_config(&c);
        assert!((p.atom_drive_mu - (3e7 - 1e5)).abs() < 1e-6);
        let back = p.apply(&c);
        let (m, o) = back.atom_cavity_detunings();
        assert!((m - 3e7).abs() < 1e-6 && (o + 2e9).abs() < 1e-3);
    }

    #[test]
    fn seed_grid_shape() {
        let b = [
            (Variable::AtomDriveMu, Bounds::new(0.0, 1.0)),
            (Variable::AtomDriveO, Bounds::new(-1.0, 1.0)),
        ];
        let g = seed_grid(&b, 3);
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|p| p[0] > 0.0 && p[0] < 1.0));
        assert!(seed_grid(&[], 3) == alloc::vec![Vec::<f64>::new()]);
    }

    #[test]
    fn inner_recovers_closed_form_optimum_for_one_variable() {
        // with only δ_μ free and no cross coupling the optimum sits on the
        // shifted resonance
        let c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        let s = STerms {
            s_alpha_12: C64::new(0.0, 0.0),
            s_beta_12: C64::new(2e6, 5e5),
            s_alpha_13: C64::new(-1e6, 3e5),
            s_beta_13: C64::new(4e5, 1e5),
        };
        let problem = OptimizationProblem::new(&c).with_free(&[Variable::DriveCavityMu]);
        let free = problem.sorted();
        let base = OperatingPoint::from_config(&problem.config);
        let (p, e) = inner_optimum(&s, &problem, &free, &base);
        assert!((p.delta_mu - 2e6).abs() < 1e-8 * 2e6);
        let direct = closed_form_efficiency(
            &s,
            &problem.config,
            2e6,
            base.delta_o,
            base.gamma_mu_c,
            base.gamma_o_c,
        );
        assert!((e - direct).abs() < 1e-12);
    }

    #[test]
    fn invalid_bounds_rejected() {
        let c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        let mut p = OptimizationProblem::new(&c);
        p.free = alloc::vec![(Variable::CouplingMu, Bounds::new(-1.0, 1.0))];
        assert_eq!(
            optimize(&p),
            Err(OptimizerError::InvalidBounds(Variable::CouplingMu))
        );
    }
}
