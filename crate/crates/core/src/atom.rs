//! Single three-level atom in the frame rotating with the drives: Hamiltonian,
//! Lindblad damping, Liouvillian, steady state and a time-propagation oracle.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{hermitian_eigenvalues3, kron3, unvectorize, vectorize, Lu, Mat3, Mat9, Vec9};
use crate::math::{abs, sqrt};
use crate::params::{AtomParams, DriveSettings, ParamError};
use crate::units::decay_rates_from_lifetimes;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Row-major indices of the populations in a vectorized density matrix.
pub const POPULATION_INDICES: [usize; 3] = [0, 4, 8];

/// Pivot ratio above which a steady-state solve is flagged as ill-conditioned.
pub const ILL_CONDITIONED_PIVOT_RATIO: f64 = 1e14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtomError {
    #[error("constrained steady-state system is singular (steady state not unique)")]
    Singular,
    #[error("step size underflow at t = {t} s")]
    StepSizeUnderflow { t: f64 },
    #[error("negative propagation time {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Classical amplitudes of the intracavity microwave (`beta`) and optical
/// signal (`alpha`) fields, in sqrt(photons).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldState {
    pub beta: C64,
    pub alpha: C64,
}

impl FieldState {
    pub const ZERO: FieldState = FieldState {
        beta: ZERO,
        alpha: ZERO,
    };

    pub fn new(beta: C64, alpha: C64) -> Self {
        FieldState { beta, alpha }
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.beta.norm_sqr() + self.alpha.norm_sqr())
    }
}

/// Detuning of one atom's transitions from the cavity resonances,
/// `δ_aμ = ω12 − ω_cμ` and `δ_ao = ω13 − ω_co`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtomDetunings {
    pub delta_a_mu: f64,
    pub delta_a_o: f64,
}

/// Damping rates entering the Lindblad terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DampingRates {
    pub gamma_12: f64,
    pub gamma_13: f64,
    pub gamma_23: f64,
    pub gamma_2d: f64,
    pub gamma_3d: f64,
}

impl DampingRates {
    pub fn from_atom(atom: &AtomParams) -> Result<Self, ParamError> {
        let (gamma_12, gamma_13, gamma_23) = decay_rates_from_lifetimes(atom)?;
        Ok(DampingRates {
            gamma_12,
            gamma_13,
            gamma_23,
            gamma_2d: atom.gamma_2d,
            gamma_3d: atom.gamma_3d,
        })
    }

    /// Decay rates of the `⟨σ12⟩` and `⟨σ13⟩` coherences in the absence of
    /// drives, for thermal occupation `n12` of the microwave transition.
    pub fn coherence_widths(&self, n12: f64) -> (f64, f64) {
        let w12 = 0.5 * (self.gamma_12 * (2.0 * n12 + 1.0) + self.gamma_2d);
        let w13 = 0.5 * (self.gamma_13 + self.gamma_23 + self.gamma_3d + self.gamma_12 * n12);
        (w12, w13)
    }
}

/// 3×3 density matrix `rho[i][j] = ⟨i|ρ|j⟩` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Mat3);

impl DensityMatrix {
    pub fn ground() -> Self {
        DensityMatrix(Mat3::unit(0, 0))
    }

    pub fn from_vector(v: &Vec9) -> Self {
        DensityMatrix(unvectorize(v))
    }

    pub fn to_vector(&self) -> Vec9 {
        vectorize(&self.0)
    }

    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.0 .0[i][j]
    }

    /// `⟨σ_nm⟩ = Tr(ρ |n⟩⟨m|) = ρ[m][n]`, 1-based level labels.
    pub fn expectation(&self, n: usize, m: usize) -> C64 {
        self.0 .0[m - 1][n - 1]
    }

    /// `⟨σ12⟩`, the coherence driving the microwave cavity.
    pub fn coherence_12(&self) -> C64 {
        self.expectation(1, 2)
    }

    /// `⟨σ13⟩`, the coherence driving the optical cavity.
    pub fn coherence_13(&self) -> C64 {
        self.expectation(1, 3)
    }

    pub fn coherence_23(&self) -> C64 {
        self.expectation(2, 3)
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0 .0[0][0].re, self.0 .0[1][1].re, self.0 .0[2][2].re]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.0.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues3(&self.0)[0]
    }

    /// Checks Hermiticity and unit trace to `tol`, and positivity to
    /// `-positivity_tol`.
    pub fn check(&self, tol: f64, positivity_tol: f64) -> Result<(), InvariantViolation> {
        let h = self.hermiticity_error();
        if !(h <= tol) {
            return Err(InvariantViolation::NotHermitian(h));
        }
        let t = (self.trace() - ONE).norm();
        if !(t <= tol) {
            return Err(InvariantViolation::Trace(t));
        }
        let e = self.min_eigenvalue();
        if !(e >= -positivity_tol) {
            return Err(InvariantViolation::NotPositive(e));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum InvariantViolation {
    #[error("density matrix not Hermitian (error {0:e})")]
    NotHermitian(f64),
    #[error("trace deviates from one by {0:e}")]
    Trace(f64),
    #[error("negative eigenvalue {0:e}")]
    NotPositive(f64),
}

/// 9×9 generator of `dρ/dt` acting on the row-major vectorized density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Liouvillian(pub Mat9);

impl Liouvillian {
    pub fn zero() -> Self {
        Liouvillian(Mat9::zeros())
    }

    pub fn matrix(&self) -> &Mat9 {
        &self.0
    }

    pub fn apply(&self, v: &Vec9) -> Vec9 {
        self.0.mul_vec(v)
    }
}

/// Rotating-frame Hamiltonian
///
/// ```text
/// [ 0        g_μ β̄       g_o ᾱ     ]
/// [ g_μ β    δ_aμ − δ_μ   Ω̄         ]
/// [ g_o α    Ω            δ_ao − δ_o ]
/// ```
pub fn build_hamiltonian(
    fields: FieldState,
    pump: C64,
    det: AtomDetunings,
    drive: &DriveSettings,
    atom: &AtomParams,
) -> Mat3 {
    hamiltonian(
        fields,
        pump,
        det.delta_a_mu - drive.delta_mu,
        det.delta_a_o - drive.delta_o,
        atom.g_mu,
        atom.g_o,
    )
}

/// Same matrix from the level energies `level2 = δ_aμ − δ_μ`,
/// `level3 = δ_ao − δ_o`.
pub fn hamiltonian(
    fields: FieldState,
    pump: C64,
    level2: f64,
    level3: f64,
    g_mu: f64,
    g_o: f64,
) -> Mat3 {
    let gb = fields.beta * g_mu;
    let ga = fields.alpha * g_o;
    crate::linalg::Matrix([
        [ZERO, gb.conj(), ga.conj()],
        [gb, C64::new(level2, 0.0), pump.conj()],
        [ga, pump, C64::new(level3, 0.0)],
    ])
}

/// `-i (H ⊗ I − I ⊗ Hᵀ)`, the superoperator of `ρ ↦ −i[H, ρ]`.
pub fn commutator_superoperator(h: &Mat3) -> Mat9 {
    let id = Mat3::identity();
    (kron3(h, &id) - kron3(&id, &h.transpose())).scale(-I)
}

/// `rate (L ρ L† − ½ L†L ρ − ½ ρ L†L)` as a superoperator.
pub fn lindblad_superoperator(jump: &Mat3, rate: f64) -> Mat9 {
    if rate == 0.0 {
        return Mat9::zeros();
    }
    let id = Mat3::identity();
    let ldl = jump.adjoint() * *jump;
    let conj = {
        let mut c = *jump;
        for row in c.0.iter_mut() {
            for x in row.iter_mut() {
                *x = x.conj();
            }
        }
        c
    };
    let half = C64::new(0.5, 0.0);
    (kron3(jump, &conj) - kron3(&ldl, &id).scale(half) - kron3(&id, &ldl.transpose()).scale(half))
        .scale(C64::new(rate, 0.0))
}

/// Damping superoperator `Γ = Γ12 + Γ13 + Γ23 + Γ2d + Γ3d`. The thermal
/// occupation `n12` enters only the `|1⟩ ↔ |2⟩` transition.
pub fn build_damping(rates: &DampingRates, n12: f64) -> Mat9 {
    let s = Mat3::unit;
    // σ_nm = |n⟩⟨m| lowers |m⟩ to |n⟩
    let mut d = lindblad_superoperator(&s(0, 1), rates.gamma_12 * (n12 + 1.0));
    d += lindblad_superoperator(&s(1, 0), rates.gamma_12 * n12);
    d += lindblad_superoperator(&s(0, 2), rates.gamma_13);
    d += lindblad_superoperator(&s(1, 2), rates.gamma_23);
    d += lindblad_superoperator(&s(1, 1), rates.gamma_2d);
    d += lindblad_superoperator(&s(2, 2), rates.gamma_3d);
    d
}

pub fn build_liouvillian(h: &Mat3, damping: &Mat9) -> Liouvillian {
    Liouvillian(commutator_superoperator(h) + *damping)
}

/// Prebuilt pieces for evaluating many atoms that differ only in their
/// detunings. The field and pump couplings and the damping are fixed; the
/// level energies enter as a diagonal shift.
#[derive(Debug, Clone, Copy)]
pub struct AtomModel {
    base: Mat9,
    fields: FieldState,
    pump: C64,
    g_mu: f64,
    g_o: f64,
    delta_mu: f64,
    delta_o: f64,
}

impl AtomModel {
    pub fn new(
        atom: &AtomParams,
        damping: &Mat9,
        fields: FieldState,
        pump: C64,
        delta_mu: f64,
        delta_o: f64,
    ) -> Self {
        let off = hamiltonian(fields, pump, 0.0, 0.0, atom.g_mu, atom.g_o);
        AtomModel {
            base: commutator_superoperator(&off) + *damping,
            fields,
            pump,
            g_mu: atom.g_mu,
            g_o: atom.g_o,
            delta_mu,
            delta_o,
        }
    }

    pub fn fields(&self) -> FieldState {
        self.fields
    }

    pub fn pump(&self) -> C64 {
        self.pump
    }

    pub fn couplings(&self) -> (f64, f64) {
        (self.g_mu, self.g_o)
    }

    pub fn drive_detunings(&self) -> (f64, f64) {
        (self.delta_mu, self.delta_o)
    }

    pub fn hamiltonian(&self, det: AtomDetunings) -> Mat3 {
        hamiltonian(
            self.fields,
            self.pump,
            det.delta_a_mu - self.delta_mu,
            det.delta_a_o - self.delta_o,
            self.g_mu,
            self.g_o,
        )
    }

    pub fn liouvillian(&self, det: AtomDetunings) -> Liouvillian {
        let levels = [
            0.0,
            det.delta_a_mu - self.delta_mu,
            det.delta_a_o - self.delta_o,
        ];
        let mut m = self.base;
        for i in 0..3 {
            for j in 0..3 {
                // −i (E_i − E_j) on the diagonal of the commutator
                m.0[3 * i + j][3 * i + j] += C64::new(0.0, -(levels[i] - levels[j]));
            }
        }
        Liouvillian(m)
    }
}

/// The Liouvillian with one population row replaced by the trace functional,
/// factorized once and reused for the steady state and for traceless
/// linear-response solves.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    lu: Lu<9>,
    row: usize,
}

impl ConstrainedSystem {
    pub fn new(l: &Liouvillian) -> Result<Self, AtomError> {
        let m = l.matrix();
        // The population rows of a trace-preserving generator sum to zero, so
        // any one of them is redundant. Drop the one with the smallest
        // diagonal (the slowest-emptying level).
        let mut row = POPULATION_INDICES[0];
        let mut best = f64::INFINITY;
        for &k in &POPULATION_INDICES {
            let d = m.0[k][k].norm();
            if d < best {
                best = d;
                row = k;
            }
        }
        let mut a = *m;
        for (j, x) in a.0[row].iter_mut().enumerate() {
            *x = if POPULATION_INDICES.contains(&j) {
                ONE
            } else {
                ZERO
            };
        }
        let lu = Lu::factor(&a).ok_or(AtomError::Singular)?;
        Ok(ConstrainedSystem { lu, row })
    }

    /// Index of the replaced row.
    pub fn replaced_row(&self) -> usize {
        self.row
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio()
    }

    /// Vectorized `ρ` with `L ρ = 0`, `Tr ρ = 1`.
    pub fn steady_state(&self) -> Vec9 {
        let mut b = [ZERO; 9];
        b[self.row] = ONE;
        self.lu.solve(&b)
    }

    /// Solves `L x = rhs` with `Tr x = 0`. `rhs` must be traceless, which
    /// holds for anything in the range of `L`.
    pub fn solve_traceless(&self, rhs: &Vec9) -> Vec9 {
        let mut b = *rhs;
        b[self.row] = ZERO;
        self.lu.solve(&b)
    }
}

/// Steady state together with a conditioning diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub pivot_ratio: f64,
    pub ill_conditioned: bool,
}

pub fn steady_state_with_diagnostics(l: &Liouvillian) -> Result<SteadyState, AtomError> {
    // Solved in a real basis of Hermitian matrices, which keeps the result
    // Hermitian to the last bit however poorly conditioned the system is.
    let basis = hermitian_basis();
    let mut r = Mat9::zeros();
    for (k, b) in basis.iter().enumerate() {
        let image = unvectorize(&l.apply(&vectorize(b)));
        for (row, q) in hermitian_coordinates(&image).iter().enumerate() {
            r.0[row][k] = C64::new(*q, 0.0);
        }
    }
    let mut row = 0;
    for k in 1..3 {
        if r.0[k][k].norm() < r.0[row][row].norm() {
            row = k;
        }
    }
    for (j, x) in r.0[row].iter_mut().enumerate() {
        *x = if j < 3 { ONE } else { ZERO };
    }
    let lu = Lu::factor(&r).ok_or(AtomError::Singular)?;
    let mut rhs = [ZERO; 9];
    rhs[row] = ONE;
    let p = lu.solve(&rhs);
    if p.iter().any(|z| !z.re.is_finite()) {
        return Err(AtomError::Singular);
    }
    let mut rho = Mat3::zeros();
    for (b, c) in basis.iter().zip(p.iter()) {
        rho += b.scale(C64::new(c.re, 0.0));
    }
    let ratio = lu.pivot_ratio();
    Ok(SteadyState {
        rho: DensityMatrix(rho),
        pivot_ratio: ratio,
        ill_conditioned: ratio > ILL_CONDITIONED_PIVOT_RATIO,
    })
}

const OFF_DIAGONAL: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Populations `|n⟩⟨n|`, then `|i⟩⟨j| + |j⟩⟨i|` and `−i|i⟩⟨j| + i|j⟩⟨i|`
/// for `i < j`.
fn hermitian_basis() -> [Mat3; 9] {
    let mut out = [Mat3::zeros(); 9];
    for (n, b) in out.iter_mut().take(3).enumerate() {
        b.0[n][n] = ONE;
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        out[3 + 2 * k].0[i][j] = ONE;
        out[3 + 2 * k].0[j][i] = ONE;
        out[4 + 2 * k].0[i][j] = -I;
        out[4 + 2 * k].0[j][i] = I;
    }
    out
}

/// Coordinates of the Hermitian part of `m` in [`hermitian_basis`].
fn hermitian_coordinates(m: &Mat3) -> [f64; 9] {
    let mut q = [0.0; 9];
    for (n, x) in q.iter_mut().take(3).enumerate() {
        *x = m.0[n][n].re;
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        let z = 0.5 * (m.0[i][j] + m.0[j][i].conj());
        q[3 + 2 * k] = z.re;
        q[4 + 2 * k] = -z.im;
    }
    q
}

/// Solves `L vec(ρ) = 0` with `Tr ρ = 1`.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix, AtomError> {
    steady_state_with_diagnostics(l).map(|s| s.rho)
}

/// Tolerances for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for PropagateSettings {
    fn default() -> Self {
        PropagateSettings {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes are
// not needed, and the last row of `DP_A` is the 5th-order weight vector.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dρ/dt = L ρ` from `rho0` over `t` seconds with an adaptive
/// Dormand–Prince 5(4) scheme.
pub fn propagate(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    t: f64,
    settings: &PropagateSettings,
) -> Result<DensityMatrix, AtomError> {
    if t < 0.0 {
        return Err(AtomError::NegativeTime(t));
    }
    let norm = l.matrix().norm();
    if t == 0.0 || norm == 0.0 {
        return Ok(*rho0);
    }
    let mut y = rho0.to_vector();
    let mut now = 0.0;
    let mut h = (0.5 / norm).min(t);
    let mut k = [[ZERO; 9]; 7];
    k[0] = l.apply(&y);
    let mut steps = 0usize;
    while now < t {
        if steps >= settings.max_steps {
            return Err(AtomError::StepSizeUnderflow { t: now });
        }
        steps += 1;
        if now + h > t {
            h = t - now;
        }
        let mut stage = [ZERO; 9];
        for s in 1..7 {
            for (idx, out) in stage.iter_mut().enumerate() {
                let mut acc = y[idx];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = DP_A[s][j];
                    if a != 0.0 {
                        acc += kj[idx] * (h * a);
                    }
                }
                *out = acc;
            }
            k[s] = l.apply(&stage);
        }
        // stage 6 is the 5th-order solution (FSAL)
        let y_new = stage;
        let mut err = 0.0f64;
        for idx in 0..9 {
            let mut e = ZERO;
            for (s, ks) in k.iter().enumerate() {
                if DP_E[s] != 0.0 {
                    e += ks[idx] * (h * DP_E[s]);
                }
            }
            let sc = settings.abs_tol + settings.rel_tol * y[idx].norm().max(y_new[idx].norm());
            let r = e.norm() / sc;
            err = err.max(r);
        }
        if err <= 1.0 {
            now += h;
            y = y_new;
            k[0] = k[6];
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            h *= (0.9 * libm::pow(err, -0.2)).clamp(0.1, 0.9);
        }
        if h < 1e-15 * t.max(abs(now)) || h == 0.0 {
            return Err(AtomError::StepSizeUnderflow { t: now });
        }
    }
    Ok(DensityMatrix::from_vector(&y))
}
