//! Degeneracies of the rotating-frame Hamiltonian as a function of the
//! microwave atomic detuning. The single-atom coherences are sharply peaked
//! near these points, so they serve as panel boundaries for the ensemble
//! integrals.
//!
//! For a Hermitian matrix the discriminant of the characteristic polynomial
//! is non-negative and vanishes exactly at an eigenvalue crossing. Crossings
//! therefore show up as double roots, which are located as sign changes of
//! the derivative with respect to `δ_aμ`.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::atom::{self, FieldState};
use crate::linalg::{eigen_gap_and_range, Mat3};
use crate::math::abs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DressedError {
    #[error("closed-form guess is singular at δ_ao = δ_o")]
    ZeroOpticalDetuning,
}

/// Everything except `δ_aμ` that enters the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyQuery {
    pub delta_a_o: f64,
    pub fields: FieldState,
    pub omega: C64,
    pub delta_mu: f64,
    pub delta_o: f64,
    pub g_mu: f64,
    pub g_o: f64,
}

impl DegeneracyQuery {
    pub fn hamiltonian(&self, delta_a_mu: f64) -> Mat3 {
        atom::hamiltonian(
            self.fields,
            self.omega,
            delta_a_mu - self.delta_mu,
            self.delta_a_o - self.delta_o,
            self.g_mu,
            self.g_o,
        )
    }

    fn level3(&self) -> f64 {
        self.delta_a_o - self.delta_o
    }

    fn invariants(&self) -> Invariants {
        let b = self.fields.beta * self.g_mu;
        let a = self.fields.alpha * self.g_o;
        Invariants {
            y: self.level3(),
            b2: b.norm_sqr(),
            a2: a.norm_sqr(),
            w2: self.omega.norm_sqr(),
            re: (a.conj() * b * self.omega).re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSearchSettings {
    /// Half width of the search window in units of `σ_μ`.
    pub window_sigmas: f64,
    /// Points of the coarse sign-change scan.
    pub scan_points: usize,
    /// Root tolerance in units of `σ_μ`.
    pub tol_sigmas: f64,
    /// A minimum of the discriminant counts as a degeneracy when the smallest
    /// eigenvalue gap is below this fraction of the spectral range.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for PeakSearchSettings {
    fn default() -> Self {
        PeakSearchSettings {
            window_sigmas: 6.0,
            scan_points: 256,
            tol_sigmas: 1e-6,
            gap_tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Interval of `δ_aμ` to search, with the absolute root tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl SearchWindow {
    pub fn around(center: f64, sigma: f64, settings: &PeakSearchSettings) -> Self {
        SearchWindow {
            lo: center - settings.window_sigmas * sigma,
            hi: center + settings.window_sigmas * sigma,
            tol: settings.tol_sigmas * sigma,
        }
    }
}

/// A local minimum of the discriminant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedPeak {
    pub delta_a_mu: f64,
    /// Smallest eigenvalue spacing of the Hamiltonian there.
    pub gap: f64,
    pub range: f64,
}

impl DressedPeak {
    pub fn is_degenerate(&self, gap_tol: f64) -> bool {
        self.gap <= gap_tol * self.range
    }
}

/// Field-dependent parts of the characteristic polynomial. With
/// `x = δ_aμ − δ_μ` and `y = δ_ao − δ_o` the monic polynomial
/// `λ³ + bλ² + cλ + d` has
/// `b = −(x + y)`, `c = xy − |Ω|² − |g_μβ|² − |g_oα|²`,
/// `d = |g_μβ|² y + |g_oα|² x − 2 Re(conj(g_oα) g_μβ Ω)`.
#[derive(Debug, Clone, Copy)]
struct Invariants {
    y: f64,
    b2: f64,
    a2: f64,
    w2: f64,
    re: f64,
}

impl Invariants {
    fn scaled(&self, s: f64) -> Invariants {
        let s2 = s * s;
        Invariants {
            y: self.y / s,
            b2: self.b2 / s2,
            a2: self.a2 / s2,
            w2: self.w2 / s2,
            re: self.re / (s2 * s),
        }
    }

    fn scale(&self) -> f64 {
        abs(self.y)
            .max(libm::sqrt(self.b2))
            .max(libm::sqrt(self.a2))
            .max(libm::sqrt(self.w2))
            .max(libm::cbrt(abs(self.re)))
    }

    fn coefficients(&self, x: f64) -> (f64, f64, f64) {
        let b = -(x + self.y);
        let c = x * self.y - self.w2 - self.b2 - self.a2;
        let d = self.b2 * self.y + self.a2 * x - 2.0 * self.re;
        (b, c, d)
    }

    fn discriminant(&self, x: f64) -> f64 {
        let (b, c, d) = self.coefficients(x);
        cubic_discriminant(b, c, d)
    }

    /// First and second derivative of the discriminant in `x`.
    fn derivatives(&self, x: f64) -> (f64, f64) {
        let (b, c, d) = self.coefficients(x);
        let (db, dc, dd) = (-1.0, self.y, self.a2);
        let d_b = 18.0 * c * d - 12.0 * b * b * d + 2.0 * b * c * c;
        let d_c = 18.0 * b * d + 2.0 * b * b * c - 12.0 * c * c;
        let d_d = 18.0 * b * c - 4.0 * b * b * b - 54.0 * d;
        let first = d_b * db + d_c * dc + d_d * dd;
        let d_bb = -24.0 * b * d + 2.0 * c * c;
        let d_bc = 18.0 * d + 4.0 * b * c;
        let d_bd = 18.0 * c - 12.0 * b * b;
        let d_cc = 2.0 * b * b - 24.0 * c;
        let d_cd = 18.0 * b;
        let d_dd = -54.0;
        let second = d_bb * db * db
            + d_cc * dc * dc
            + d_dd * dd * dd
            + 2.0 * (d_bc * db * dc + d_bd * db * dd + d_cd * dc * dd);
        (first, second)
    }
}

/// `18bcd − 4b³d + b²c² − 4c³ − 27d²` for the monic cubic `λ³ + bλ² + cλ + d`.
pub fn cubic_discriminant(b: f64, c: f64, d: f64) -> f64 {
    18.0 * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * c * c * c - 27.0 * d * d
}

/// Discriminant of `det(H − λ)` at `δ_aμ`, from the polynomial coefficients.
pub fn char_poly_discriminant(q: &DegeneracyQuery, delta_a_mu: f64) -> f64 {
    q.invariants().discriminant(delta_a_mu - q.delta_mu)
}

/// Degeneracy of `|1⟩` dressed by the microwave field with the bare level
/// `|3⟩`, valid for a weak pump:
/// `δ_aμ = −|g_μβ|² / (δ_ao − δ_o) + δ_ao − δ_o + δ_μ`.
pub fn guess_small_pump(q: &DegeneracyQuery) -> Result<f64, DressedError> {
    let y = q.level3();
    if y == 0.0 {
        return Err(DressedError::ZeroOpticalDetuning);
    }
    let b2 = (q.fields.beta * q.g_mu).norm_sqr();
    Ok(-b2 / y + y + q.delta_mu)
}

/// Degeneracy of `|1⟩` with a pump-dressed `|2⟩`, valid for a weak microwave
/// field: `δ_aμ = |Ω|² / (δ_ao − δ_o) + δ_μ`.
pub fn guess_small_microwave(q: &DegeneracyQuery) -> Result<f64, DressedError> {
    let y = q.level3();
    if y == 0.0 {
        return Err(DressedError::ZeroOpticalDetuning);
    }
    Ok(q.omega.norm_sqr() / y + q.delta_mu)
}

/// All local minima of the discriminant inside the window, ascending, with
/// the eigenvalue gap at each.
pub fn dressed_peaks(
    q: &DegeneracyQuery,
    window: &SearchWindow,
    settings: &PeakSearchSettings,
) -> Vec<DressedPeak> {
    let mut out = Vec::new();
    if !(window.hi > window.lo) {
        return out;
    }
    let inv = q.invariants();
    // Work in units where the matrix entries are O(1) to keep the
    // sixth-degree discriminant well inside the floating-point range.
    let s = inv
        .scale()
        .max(abs(window.lo - q.delta_mu))
        .max(abs(window.hi - q.delta_mu))
        .max(window.hi - window.lo);
    let inv = inv.scaled(s);
    let to_x = |d: f64| (d - q.delta_mu) / s;
    let from_x = |x: f64| x * s + q.delta_mu;
    let (x_lo, x_hi) = (to_x(window.lo), to_x(window.hi));
    let tol = (window.tol / s).max(4.0 * f64::EPSILON * abs(x_lo).max(abs(x_hi)));

    let n = settings.scan_points.max(2);
    let cell = (x_hi - x_lo) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|k| x_lo + cell * k as f64).collect();
    for g in [guess_small_pump(q), guess_small_microwave(q)]
        .into_iter()
        .flatten()
    {
        let x = to_x(g);
        for off in [0.0, 1e-1, 1e-3, 1e-6, -1e-1, -1e-3, -1e-6] {
            let p = x + off * cell;
            if p > x_lo && p < x_hi {
                grid.push(p);
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    grid.dedup();

    let mut roots: Vec<f64> = Vec::new();
    let mut prev_x = grid[0];
    let mut prev_f = inv.derivatives(prev_x).0;
    for &x in &grid[1..] {
        let f = inv.derivatives(x).0;
        if prev_f < 0.0 && f >= 0.0 {
            let r = if f == 0.0 {
                x
            } else {
                safeguarded_newton(&inv, prev_x, x, tol, settings.max_iter)
            };
            roots.push(r);
        }
        prev_x = x;
        prev_f = f;
    }

    let mut last: Option<f64> = None;
    for x in roots {
        if let Some(l) = last {
            if x - l <= tol {
                continue;
            }
        }
        last = Some(x);
        let d = from_x(x);
        let (gap, range) = eigen_gap_and_range(&q.hamiltonian(d));
        out.push(DressedPeak {
            delta_a_mu: d,
            gap,
            range,
        });
    }
    out
}

/// Detunings inside the window where two dressed states are degenerate,
/// ascending. Minima of the discriminant that are only avoided crossings are
/// dropped.
pub fn find_degenerate_detunings(
    q: &DegeneracyQuery,
    window: &SearchWindow,
    settings: &PeakSearchSettings,
) -> Vec<f64> {
    dressed_peaks(q, window, settings)
        .into_iter()
        .filter(|p| p.is_degenerate(settings.gap_tol))
        .map(|p| p.delta_a_mu)
        .collect()
}

/// Root of the derivative on `[lo, hi]`, where it goes from negative to
/// non-negative. Newton steps are taken only while they stay in the bracket.
fn safeguarded_newton(
    inv: &Invariants,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    let mut last_step = hi - lo;
    for _ in 0..max_iter {
        let (f, fp) = inv.derivatives(x);
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if fp != 0.0 { x - f / fp } else { f64::NAN };
        let step;
        if newton > lo && newton < hi && abs(newton - x) < 0.5 * last_step {
            step = abs(newton - x);
            x = newton;
        } else {
            step = 0.5 * (hi - lo);
            x = 0.5 * (lo + hi);
        }
        last_step = step;
        if step <= tol || hi - lo <= tol {
            break;
        }
    }
    x
}
