//! Self-consistent solution of the frequency-domain cavity equations
//!
//! ```text
//! β = (−i S12(β, α) + sqrt(γ_μc) β_in) / ((γ_μc + γ_μi)/2 − iδ_μ)
//! α = (−i S13(β, α) + sqrt(γ_oc) α_in) / ((γ_oc + γ_oi)/2 − iδ_o)
//! ```
//!
//! with the ensemble sums evaluated from the full single-atom steady state.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::atom::FieldState;
use crate::ensemble::{integrate_nonlinear_sums, EnsembleError, EnsembleSums};
use crate::linalg::{Lu, Matrix};
use crate::math::sqrt;
use crate::params::{CavityParams, DriveSettings, ModelConfig, OutputConvention};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldSolveError {
    #[error("field iteration did not converge after {iterations} evaluations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("field iteration oscillates (relative residual {residual:e})")]
    Oscillating { residual: f64 },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on ensemble evaluations.
    pub max_iter: usize,
    pub min_damping: f64,
    /// Damped iterations without halving the residual before switching to
    /// the quasi-Newton solver.
    pub stall_window: usize,
}

impl Default for FieldSolverSettings {
    fn default() -> Self {
        FieldSolverSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_iter: 500,
            min_damping: 1.0 / 64.0,
            stall_window: 20,
        }
    }
}

/// Right-hand side of the cavity equations for the given ensemble sums.
pub fn cavity_update(
    sums: &EnsembleSums,
    cavity: &CavityParams,
    drive: &DriveSettings,
) -> FieldState {
    let i = C64::new(0.0, 1.0);
    let dm = cavity.half_width_mu() - i * drive.delta_mu;
    let d_o = cavity.half_width_o() - i * drive.delta_o;
    FieldState {
        beta: (-i * sums.s12 + drive.beta_in * sqrt(cavity.gamma_mu_c)) / dm,
        alpha: (-i * sums.s13 + drive.alpha_in * sqrt(cavity.gamma_o_c)) / d_o,
    }
}

/// Output fields from the intracavity fields.
pub fn output_fields(
    fields: FieldState,
    cavity: &CavityParams,
    drive: &DriveSettings,
    convention: OutputConvention,
) -> (C64, C64) {
    let mut b = fields.beta * sqrt(cavity.gamma_mu_c);
    let mut a = fields.alpha * sqrt(cavity.gamma_o_c);
    if convention == OutputConvention::Standard {
        b -= drive.beta_in;
        a -= drive.alpha_in;
    }
    (b, a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSolution {
    pub fields: FieldState,
    pub sums: EnsembleSums,
    /// `‖x − F(x)‖ / ‖x‖` at the solution.
    pub residual: f64,
    pub evaluations: usize,
    pub used_fallback: bool,
}

fn to_real(f: FieldState) -> [f64; 4] {
    [f.beta.re, f.beta.im, f.alpha.re, f.alpha.im]
}

fn from_real(v: &[f64; 4]) -> FieldState {
    FieldState::new(C64::new(v[0], v[1]), C64::new(v[2], v[3]))
}

fn diff(a: FieldState, b: FieldState) -> FieldState {
    FieldState::new(a.beta - b.beta, a.alpha - b.alpha)
}

struct Tracker<'a, F> {
    sums: F,
    cavity: &'a CavityParams,
    drive: &'a DriveSettings,
    evaluations: usize,
    max: usize,
}

impl<F> Tracker<'_, F>
where
    F: FnMut(FieldState) -> Result<EnsembleSums, EnsembleError>,
{
    /// `(F(x), sums(x))`.
    fn map(&mut self, x: FieldState) -> Result<(FieldState, EnsembleSums), FieldSolveError> {
        self.evaluations += 1;
        let s = (self.sums)(x)?;
        Ok((cavity_update(&s, self.cavity, self.drive), s))
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.max
    }
}

struct Point {
    x: FieldState,
    r: FieldState,
    sums: EnsembleSums,
    norm: f64,
}

fn converged(p: &Point, s: &FieldSolverSettings) -> bool {
    let xn = p.x.norm();
    p.norm <= s.rel_tol * xn || p.norm <= s.abs_tol
}

fn relative(p: &Point) -> f64 {
    let xn = p.x.norm();
    if xn > 0.0 {
        p.norm / xn
    } else {
        p.norm
    }
}

/// Solves the cavity equations with ensemble sums supplied by `sums`,
/// starting from the empty-cavity fields.
pub fn solve_fields_with<F>(
    cavity: &CavityParams,
    drive: &DriveSettings,
    settings: &FieldSolverSettings,
    sums: F,
) -> Result<FieldSolution, FieldSolveError>
where
    F: FnMut(FieldState) -> Result<EnsembleSums, EnsembleError>,
{
    solve_fields_from(cavity, drive, settings, None, sums)
}

/// As [`solve_fields_with`], from `initial` when given.
pub fn solve_fields_from<F>(
    cavity: &CavityParams,
    drive: &DriveSettings,
    settings: &FieldSolverSettings,
    initial: Option<FieldState>,
    sums: F,
) -> Result<FieldSolution, FieldSolveError>
where
    F: FnMut(FieldState) -> Result<EnsembleSums, EnsembleError>,
{
    let mut t = Tracker {
        sums,
        cavity,
        drive,
        evaluations: 0,
        max: settings.max_iter.max(2),
    };
    let eval = |t: &mut Tracker<'_, F>, x: FieldState| -> Result<Point, FieldSolveError> {
        let (fx, sums) = t.map(x)?;
        let r = diff(x, fx);
        Ok(Point {
            x,
            r,
            sums,
            norm: r.norm(),
        })
    };
    let finish = |p: Point, t: &Tracker<'_, F>, fallback: bool| FieldSolution {
        fields: p.x,
        sums: p.sums,
        residual: relative(&p),
        evaluations: t.evaluations,
        used_fallback: fallback,
    };

    // empty-cavity solution as the default first iterate
    let x0 = initial.unwrap_or_else(|| cavity_update(&EnsembleSums::default(), cavity, drive));
    let mut cur = eval(&mut t, x0)?;
    if converged(&cur, settings) {
        return Ok(finish(cur, &t, false));
    }

    let mut damping = 1.0;
    let mut best_recent = cur.norm;
    let mut since_progress = 0usize;
    let mut stalled = false;
    while !t.exhausted() {
        let trial_x = FieldState::new(
            cur.x.beta - cur.r.beta * damping,
            cur.x.alpha - cur.r.alpha * damping,
        );
        let trial = eval(&mut t, trial_x)?;
        if converged(&trial, settings) {
            return Ok(finish(trial, &t, false));
        }
        if trial.norm < cur.norm {
            cur = trial;
            damping = (damping * 1.5).min(1.0);
        } else if damping > settings.min_damping {
            damping = (damping * 0.5).max(settings.min_damping);
        } else {
            stalled = true;
            break;
        }
        if cur.norm < 0.5 * best_recent {
            best_recent = cur.norm;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress >= settings.stall_window {
                stalled = true;
                break;
            }
        }
    }
    if !stalled {
        return Err(FieldSolveError::NotConverged {
            iterations: t.evaluations,
            residual: relative(&cur),
        });
    }

    // Broyden on the residual in R^4, starting from a finite-difference Jacobian
    let mut jac = [[0.0f64; 4]; 4];
    let x_r = to_real(cur.x);
    let r_r = to_real(cur.r);
    let scale = cur.x.norm().max(x0.norm()).max(1e-300);
    for k in 0..4 {
        let h = 1e-7 * scale;
        let mut xp = x_r;
        xp[k] += h;
        let p = eval(&mut t, from_real(&xp))?;
        let rp = to_real(p.r);
        for i in 0..4 {
            jac[i][k] = (rp[i] - r_r[i]) / h;
        }
    }
    let mut oscillations = 0usize;
    while !t.exhausted() {
        let step = match solve4(&jac, &to_real(cur.r)) {
            Some(s) => s,
            None => {
                return Err(FieldSolveError::NotConverged {
                    iterations: t.evaluations,
                    residual: relative(&cur),
                })
            }
        };
        let xc = to_real(cur.x);
        let mut lambda = 1.0;
        let mut accepted: Option<(Point, [f64; 4])> = None;
        for _ in 0..8 {
            let mut xn = xc;
            let mut dx = [0.0; 4];
            for i in 0..4 {
                dx[i] = -lambda * step[i];
                xn[i] += dx[i];
            }
            let p = eval(&mut t, from_real(&xn))?;
            if converged(&p, settings) {
                return Ok(finish(p, &t, true));
            }
            let better = p.norm < cur.norm;
            if better || t.exhausted() {
                accepted = Some((p, dx));
                break;
            }
            // keep the secant information even from rejected steps
            broyden_update(&mut jac, &dx, &to_real(cur.r), &to_real(p.r));
            lambda *= 0.5;
        }
        match accepted {
            Some((p, dx)) => {
                broyden_update(&mut jac, &dx, &to_real(cur.r), &to_real(p.r));
                if p.norm >= cur.norm {
                    oscillations += 1;
                } else {
                    oscillations = 0;
                }
                cur = p;
            }
            None => oscillations += 1,
        }
        if oscillations >= 3 {
            return Err(FieldSolveError::Oscillating {
                residual: relative(&cur),
            });
        }
    }
    Err(FieldSolveError::NotConverged {
        iterations: t.evaluations,
        residual: relative(&cur),
    })
}

fn broyden_update(jac: &mut [[f64; 4]; 4], dx: &[f64; 4], r_old: &[f64; 4], r_new: &[f64; 4]) {
    let dd: f64 = dx.iter().map(|v| v * v).sum();
    if dd == 0.0 {
        return;
    }
    for i in 0..4 {
        let jdx: f64 = (0..4).map(|k| jac[i][k] * dx[k]).sum();
        let u = (r_new[i] - r_old[i]) - jdx;
        for k in 0..4 {
            jac[i][k] += u * dx[k] / dd;
        }
    }
}

fn solve4(a: &[[f64; 4]; 4], b: &[f64; 4]) -> Option<[f64; 4]> {
    let mut m = Matrix::<4>::zeros();
    let mut rhs = [C64::new(0.0, 0.0); 4];
    for i in 0..4 {
        for k in 0..4 {
            m.0[i][k] = C64::new(a[i][k], 0.0);
        }
        rhs[i] = C64::new(b[i], 0.0);
    }
    let x = Lu::factor(&m)?.solve(&rhs);
    let out = [x[0].re, x[1].re, x[2].re, x[3].re];
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Solves the cavity equations for the inputs in `config.drive`, with the
/// ensemble sums integrated at every iterate.
pub fn solve_fields(config: &ModelConfig) -> Result<FieldSolution, FieldSolveError> {
    solve_fields_with(
        &config.cavity,
        &config.drive,
        &config.numerics.fields,
        |f| integrate_nonlinear_sums(config, f),
    )
}

/// Residual `‖x − F(x)‖ / ‖x‖` of the cavity equations at `fields`,
/// evaluated from scratch.
pub fn field_residual(config: &ModelConfig, fields: FieldState) -> Result<f64, FieldSolveError> {
    let s = integrate_nonlinear_sums(config, fields)?;
    let r = diff(fields, cavity_update(&s, &config.cavity, &config.drive)).norm();
    let n = fields.norm();
    Ok(if n > 0.0 { r / n } else { r })
}
