//! Small-signal response: the Liouvillian split into a field-free part and
//! parts linear in each field, the single-atom linear responses, and the 2×2
//! scattering matrix of the two cavities.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::atom::{
    commutator_superoperator, AtomDetunings, AtomError, AtomModel, ConstrainedSystem, DampingRates,
    DensityMatrix, FieldState, Liouvillian,
};
use crate::ensemble::{integrate_linear_sums, EnsembleError};
use crate::linalg::{vectorize, Mat3, Mat9};
use crate::math::sqrt;
use crate::params::{AtomParams, CavityParams, DriveSettings, ModelConfig, OutputConvention};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative size of the common denominator below which the linear system is
/// treated as singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error("resonance singularity: |denominator| = {magnitude:e} at δ_μ = {delta_mu:e}, δ_o = {delta_o:e} rad/s")]
    Singular {
        magnitude: f64,
        delta_mu: f64,
        delta_o: f64,
    },
    #[error(transparent)]
    Atom(#[from] AtomError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// `L = L0 + α L_α + ᾱ L_ᾱ + β L_β + β̄ L_β̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiouvillianDecomposition {
    pub l0: Mat9,
    pub l_alpha: Mat9,
    pub l_alpha_conj: Mat9,
    pub l_beta: Mat9,
    pub l_beta_conj: Mat9,
}

/// Field operators: `H = H0 + β g_μ |2⟩⟨1| + β̄ g_μ |1⟩⟨2| + α g_o |3⟩⟨1| + ᾱ g_o |1⟩⟨3|`.
fn field_hamiltonians(atom: &AtomParams) -> [Mat3; 4] {
    let g_mu = C64::new(atom.g_mu, 0.0);
    let g_o = C64::new(atom.g_o, 0.0);
    [
        Mat3::unit(2, 0).scale(g_o),
        Mat3::unit(0, 2).scale(g_o),
        Mat3::unit(1, 0).scale(g_mu),
        Mat3::unit(0, 1).scale(g_mu),
    ]
}

/// Splits the Liouvillian of one atom at the given detunings. `damping` is
/// the full damping superoperator.
pub fn decompose(
    atom: &AtomParams,
    damping: &Mat9,
    pump: C64,
    det: AtomDetunings,
    drive: &DriveSettings,
) -> LiouvillianDecomposition {
    let model = AtomModel::new(
        atom,
        damping,
        FieldState::ZERO,
        pump,
        drive.delta_mu,
        drive.delta_o,
    );
    let [a, ac, b, bc] = field_hamiltonians(atom).map(|h| commutator_superoperator(&h));
    LiouvillianDecomposition {
        l0: model.liouvillian(det).0,
        l_alpha: a,
        l_alpha_conj: ac,
        l_beta: b,
        l_beta_conj: bc,
    }
}

impl LiouvillianDecomposition {
    pub fn reconstruct(&self, fields: FieldState) -> Liouvillian {
        let (a, b) = (fields.alpha, fields.beta);
        Liouvillian(
            self.l0
                + self.l_alpha.scale(a)
                + self.l_alpha_conj.scale(a.conj())
                + self.l_beta.scale(b)
                + self.l_beta_conj.scale(b.conj()),
        )
    }
}

/// `ρ0` and the first-order responses `ρ_x = −L0⁻¹ L_x ρ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearResponse {
    pub rho0: DensityMatrix,
    pub rho_alpha: Mat3,
    pub rho_alpha_conj: Mat3,
    pub rho_beta: Mat3,
    pub rho_beta_conj: Mat3,
}

impl LinearResponse {
    /// `ρ ≈ ρ0 + αρ_α + ᾱρ_ᾱ + βρ_β + β̄ρ_β̄`.
    pub fn first_order(&self, fields: FieldState) -> Mat3 {
        let (a, b) = (fields.alpha, fields.beta);
        self.rho0.0
            + self.rho_alpha.scale(a)
            + self.rho_alpha_conj.scale(a.conj())
            + self.rho_beta.scale(b)
            + self.rho_beta_conj.scale(b.conj())
    }
}

pub fn linear_response(dec: &LiouvillianDecomposition) -> Result<LinearResponse, AtomError> {
    let sys = ConstrainedSystem::new(&Liouvillian(dec.l0))?;
    let r0 = sys.steady_state();
    let solve = |l: &Mat9| -> Mat3 {
        let mut rhs = l.mul_vec(&r0);
        for x in rhs.iter_mut() {
            *x = -*x;
        }
        crate::linalg::unvectorize(&sys.solve_traceless(&rhs))
    };
    Ok(LinearResponse {
        rho0: DensityMatrix::from_vector(&r0),
        rho_alpha: solve(&dec.l_alpha),
        rho_alpha_conj: solve(&dec.l_alpha_conj),
        rho_beta: solve(&dec.l_beta),
        rho_beta_conj: solve(&dec.l_beta_conj),
    })
}

/// Fast evaluator of the coherence responses entering the cavity equations,
/// for many atoms sharing everything but their detunings.
#[derive(Debug, Clone, Copy)]
pub struct LinearResponder {
    model: AtomModel,
    h_alpha: Mat3,
    h_beta: Mat3,
}

impl LinearResponder {
    pub fn new(atom: &AtomParams, damping: &Mat9, pump: C64, delta_mu: f64, delta_o: f64) -> Self {
        let [a, _, b, _] = field_hamiltonians(atom);
        LinearResponder {
            model: AtomModel::new(atom, damping, FieldState::ZERO, pump, delta_mu, delta_o),
            h_alpha: a,
            h_beta: b,
        }
    }

    /// `[ρ_α,12, ρ_β,12, ρ_α,13, ρ_β,13]` where `ρ_x,1n` is the `⟨σ1n⟩`
    /// element of `ρ_x`.
    pub fn respond(&self, det: AtomDetunings) -> Result<[C64; 4], AtomError> {
        let sys = ConstrainedSystem::new(&self.model.liouvillian(det))?;
        let r0 = crate::linalg::unvectorize(&sys.steady_state());
        // L_x ρ0 = −i[H_x, ρ0], so the right-hand side is i[H_x, ρ0]
        let rhs = |h: &Mat3| {
            let c = *h * r0 - r0 * *h;
            vectorize(&c.scale(C64::new(0.0, 1.0)))
        };
        let ra = sys.solve_traceless(&rhs(&self.h_alpha));
        let rb = sys.solve_traceless(&rhs(&self.h_beta));
        // ⟨σ12⟩ = ρ[1][0], ⟨σ13⟩ = ρ[2][0]
        Ok([ra[3], rb[3], ra[6], rb[6]])
    }
}

/// Linearized ensemble terms, `S12 = α S_α,12 + β S_β,12` and
/// `S13 = α S_α,13 + β S_β,13`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct STerms {
    pub s_alpha_12: C64,
    pub s_beta_12: C64,
    pub s_alpha_13: C64,
    pub s_beta_13: C64,
}

impl STerms {
    pub fn s12(&self, fields: FieldState) -> C64 {
        self.s_alpha_12 * fields.alpha + self.s_beta_12 * fields.beta
    }

    pub fn s13(&self, fields: FieldState) -> C64 {
        self.s_alpha_13 * fields.alpha + self.s_beta_13 * fields.beta
    }

    pub fn is_finite(&self) -> bool {
        [
            self.s_alpha_12,
            self.s_beta_12,
            self.s_alpha_13,
            self.s_beta_13,
        ]
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Input→output map `α_out = C_aa α_in + C_ab β_in`,
/// `β_out = C_ba α_in + C_bb β_in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficients {
    pub c_aa: C64,
    pub c_ab: C64,
    pub c_ba: C64,
    pub c_bb: C64,
}

impl ScatteringCoefficients {
    /// `|C_ab|²`, microwave-to-optical photon conversion efficiency.
    pub fn efficiency(&self) -> f64 {
        self.c_ab.norm_sqr()
    }

    pub fn optical_transmission(&self) -> f64 {
        self.c_aa.norm_sqr()
    }

    pub fn microwave_transmission(&self) -> f64 {
        self.c_bb.norm_sqr()
    }
}

/// Closed-form scattering coefficients of the linearized cavity equations,
/// with common denominator
/// `S_α,12 S_β,13 + (iS_α,13 − iδ_o + γ_o/2)(iS_β,12 − iδ_μ + γ_μ/2)`.
pub fn scattering(
    s: &STerms,
    cavity: &CavityParams,
    drive: &DriveSettings,
    convention: OutputConvention,
) -> Result<ScatteringCoefficients, LinearError> {
    let i = C64::new(0.0, 1.0);
    let bo = i * s.s_alpha_13 - i * drive.delta_o + cavity.half_width_o();
    let bm = i * s.s_beta_12 - i * drive.delta_mu + cavity.half_width_mu();
    let cross = s.s_alpha_12 * s.s_beta_13;
    let den = cross + bo * bm;
    let typical = cross.norm() + bo.norm() * bm.norm();
    if !(den.norm() > SINGULAR_DENOMINATOR * typical) {
        return Err(LinearError::Singular {
            magnitude: den.norm(),
            delta_mu: drive.delta_mu,
            delta_o: drive.delta_o,
        });
    }
    let root = sqrt(cavity.gamma_mu_c * cavity.gamma_o_c);
    let mut c = ScatteringCoefficients {
        c_aa: bm * cavity.gamma_o_c / den,
        c_ab: -i * s.s_beta_13 * root / den,
        c_ba: -i * s.s_alpha_12 * root / den,
        c_bb: bo * cavity.gamma_mu_c / den,
    };
    if convention == OutputConvention::Standard {
        c.c_aa -= 1.0;
        c.c_bb -= 1.0;
    }
    Ok(c)
}

/// Intracavity fields of the linearized equations for the given inputs.
pub fn linear_fields(
    s: &STerms,
    cavity: &CavityParams,
    drive: &DriveSettings,
) -> Result<FieldState, LinearError> {
    let i = C64::new(0.0, 1.0);
    let bo = i * s.s_alpha_13 - i * drive.delta_o + cavity.half_width_o();
    let bm = i * s.s_beta_12 - i * drive.delta_mu + cavity.half_width_mu();
    let den = s.s_alpha_12 * s.s_beta_13 + bo * bm;
    if den == ZERO {
        return Err(LinearError::Singular {
            magnitude: 0.0,
            delta_mu: drive.delta_mu,
            delta_o: drive.delta_o,
        });
    }
    let yb = drive.beta_in * sqrt(cavity.gamma_mu_c);
    let ya = drive.alpha_in * sqrt(cavity.gamma_o_c);
    Ok(FieldState {
        beta: (bo * yb - i * s.s_alpha_12 * ya) / den,
        alpha: (bm * ya - i * s.s_beta_13 * yb) / den,
    })
}

/// Linearized ensemble terms for `config` (see [`integrate_linear_sums`]).
pub fn linear_sterms(config: &ModelConfig) -> Result<STerms, LinearError> {
    Ok(integrate_linear_sums(config)?)
}

/// End-to-end conversion efficiency `|C_ab|²` of the linearized model.
pub fn conversion_efficiency(config: &ModelConfig) -> Result<f64, LinearError> {
    let s = linear_sterms(config)?;
    Ok(scattering(&s, &config.cavity, &config.drive, config.convention)?.efficiency())
}

/// Strength of the signal fields relative to the atomic linewidths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCheck {
    /// `g_μ|β| / Γ12`.
    pub microwave: f64,
    /// `g_o|α| / Γ13`.
    pub optical: f64,
    pub threshold: f64,
}

impl RegimeCheck {
    /// Both ratios below the threshold, where the dropped products of two
    /// fields are negligible.
    pub fn is_linear(&self) -> bool {
        self.microwave < self.threshold && self.optical < self.threshold
    }
}

pub fn regime_check(
    fields: FieldState,
    atom: &AtomParams,
    rates: &DampingRates,
    n12: f64,
    threshold: f64,
) -> RegimeCheck {
    let (w12, w13) = rates.coherence_widths(n12);
    RegimeCheck {
        microwave: atom.g_mu * fields.beta.norm() / w12,
        optical: atom.g_o * fields.alpha.norm() / w13,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{build_damping, build_hamiltonian, build_liouvillian};
    use crate::params::BareFrequencyUnits;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn setup() -> (AtomParams, Mat9, DriveSettings) {
        let atom = AtomParams {
            g_mu: 1.3,
            g_o: 0.8,
            ..ModelConfig::table_one(BareFrequencyUnits::Angular).atom
        };
        let rates = DampingRates {
            gamma_12: 0.5,
            gamma_13: 2.0,
            gamma_23: 1.0,
            gamma_2d: 0.4,
            gamma_3d: 0.6,
        };
        let drive = DriveSettings {
            delta_mu: 0.2,
            delta_o: -0.3,
            ..DriveSettings::default()
        };
        (atom, build_damping(&rates, 0.2), drive)
    }

    #[test]
    fn reconstruction() {
        let (atom, d, drive) = setup();
        let det = AtomDetunings {
            delta_a_mu: 1.0,
            delta_a_o: -2.0,
        };
        let pump = c(1.5, 0.5);
        let dec = decompose(&atom, &d, pump, det, &drive);
        let f = FieldState::new(c(0.0, -2.0), c(0.3, 0.1));
        let direct = build_liouvillian(&build_hamiltonian(f, pump, det, &drive, &atom), &d);
        assert!((dec.reconstruct(f).0 - direct.0).max_abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_blocks_vanish() {
        let (mut atom, d, drive) = setup();
        atom.g_mu = 0.0;
        atom.g_o = 0.0;
        let dec = decompose(&atom, &d, c(1.0, 0.0), AtomDetunings::default(), &drive);
        for m in [dec.l_alpha, dec.l_alpha_conj, dec.l_beta, dec.l_beta_conj] {
            assert_eq!(m, Mat9::zeros());
        }
        let r = linear_response(&dec).unwrap();
        assert_eq!(r.rho_alpha.max_abs(), 0.0);
        assert_eq!(r.rho_beta.max_abs(), 0.0);
    }

    #[test]
    fn responder_matches_full_response() {
        let (atom, d, drive) = setup();
        let pump = c(1.5, 0.5);
        let det = AtomDetunings {
            delta_a_mu: 0.7,
            delta_a_o: 0.4,
        };
        let dec = decompose(&atom, &d, pump, det, &drive);
        let r = linear_response(&dec).unwrap();
        let fast = LinearResponder::new(&atom, &d, pump, drive.delta_mu, drive.delta_o)
            .respond(det)
            .unwrap();
        let expect = [
            r.rho_alpha[(1, 0)],
            r.rho_beta[(1, 0)],
            r.rho_alpha[(2, 0)],
            r.rho_beta[(2, 0)],
        ];
        for k in 0..4 {
            assert!((fast[k] - expect[k]).norm() < 1e-12 * (1.0 + expect[k].norm()));
        }
        assert!(r.rho_beta.trace().norm() < 1e-14);
        assert!(r.rho_alpha.trace().norm() < 1e-14);
    }

    #[test]
    fn conjugate_channels_do_not_drive_the_cavity_coherences() {
        let (atom, d, drive) = setup();
        let dec = decompose(
            &atom,
            &d,
            c(1.5, 0.5),
            AtomDetunings {
                delta_a_mu: 0.7,
                delta_a_o: 0.4,
            },
            &drive,
        );
        let r = linear_response(&dec).unwrap();
        for m in [r.rho_alpha_conj, r.rho_beta_conj] {
            assert!(m[(1, 0)].norm() < 1e-14);
            assert!(m[(2, 0)].norm() < 1e-14);
        }
    }

    #[test]
    fn empty_cavity_limit() {
        let cav = ModelConfig::table_one(BareFrequencyUnits::Angular).cavity;
        let drive = DriveSettings::default();
        let s = STerms::default();
        let sc = scattering(&s, &cav, &drive, OutputConvention::Paper).unwrap();
        assert_eq!(sc.c_ab, ZERO);
        assert!((sc.microwave_transmission() - (3.0f64 / 2.15).powi(2)).abs() < 1e-12);
        assert!((sc.microwave_transmission() - 1.947).abs() < 1e-3);
    }

    #[test]
    fn swap_symmetry() {
        let cav = ModelConfig::table_one(BareFrequencyUnits::Angular).cavity;
        let s = STerms {
            s_alpha_12: c(1e6, 2e5),
            s_beta_12: c(-3e6, 1e5),
            s_alpha_13: c(2e6, 4e5),
            s_beta_13: c(5e5, -1e5),
        };
        let drive = DriveSettings {
            delta_mu: 1e6,
            delta_o: -2e6,
            ..DriveSettings::default()
        };
        let a = scattering(&s, &cav, &drive, OutputConvention::Paper).unwrap();
        let s2 = STerms {
            s_alpha_12: s.s_beta_13,
            s_beta_13: s.s_alpha_12,
            s_beta_12: s.s_alpha_13,
            s_alpha_13: s.s_beta_12,
        };
        let cav2 = CavityParams {
            gamma_mu_c: cav.gamma_o_c,
            gamma_mu_i: cav.gamma_o_i,
            gamma_o_c: cav.gamma_mu_c,
            gamma_o_i: cav.gamma_mu_i,
            ..cav
        };
        let drive2 = DriveSettings {
            delta_mu: drive.delta_o,
            delta_o: drive.delta_mu,
            ..drive
        };
        let b = scattering(&s2, &cav2, &drive2, OutputConvention::Paper).unwrap();
        assert!((a.c_ab - b.c_ba).norm() < 1e-15 * a.c_ab.norm().max(1.0));
        assert!((a.c_ba - b.c_ab).norm() < 1e-15 * a.c_ba.norm().max(1.0));
        assert!((a.c_aa - b.c_bb).norm() < 1e-14);
    }

    #[test]
    fn singular_denominator_is_reported() {
        let cav = CavityParams {
            gamma_mu_c: 1.0,
            gamma_mu_i: 1.0,
            gamma_o_c: 1.0,
            gamma_o_i: 1.0,
            omega_c_mu: 1.0,
            omega_c_o: 1.0,
        };
        // (1 + iS)(1) + 0 = 0 with S = i
        let s = STerms {
            s_beta_12: c(0.0, 1.0),
            ..STerms::default()
        };
        let err = scattering(&s, &cav, &DriveSettings::default(), OutputConvention::Paper);
        assert!(matches!(err, Err(LinearError::Singular { .. })));
    }

    #[test]
    fn fields_reproduce_scattering() {
        let cav = ModelConfig::table_one(BareFrequencyUnits::Angular).cavity;
        let s = STerms {
            s_alpha_12: c(1e6, 2e5),
            s_beta_12: c(-3e6, 1e5),
            s_alpha_13: c(2e6, 4e5),
            s_beta_13: c(5e5, -1e5),
        };
        let drive = DriveSettings {
            beta_in: c(2.0, 1.0),
            alpha_in: c(-0.5, 0.3),
            delta_mu: 1e6,
            delta_o: -2e6,
            ..DriveSettings::default()
        };
        let f = linear_fields(&s, &cav, &drive).unwrap();
        let sc = scattering(&s, &cav, &drive, OutputConvention::Paper).unwrap();
        let a_out = f.alpha * cav.gamma_o_c.sqrt();
        let expect = sc.c_aa * drive.alpha_in + sc.c_ab * drive.beta_in;
        assert!((a_out - expect).norm() < 1e-12 * expect.norm());
    }
}
