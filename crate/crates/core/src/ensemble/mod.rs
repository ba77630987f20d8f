//! Sums over the inhomogeneously broadened ensemble, evaluated as integrals
//! of single-atom coherences against the product of the optical and
//! microwave Gaussian detuning distributions.
//!
//! The outer integral runs over `δ_ao` and is panelized around the optical
//! drive. For every outer node the inner integral over `δ_aμ` is panelized
//! around the minima of the dressed-state discriminant, where the single-atom
//! response is sharply peaked.

pub mod quadrature;

use alloc::vec::Vec;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::atom::{
    build_damping, AtomDetunings, AtomError, AtomModel, ConstrainedSystem, DampingRates,
    DensityMatrix, FieldState,
};
use crate::dressed::{dressed_peaks, DegeneracyQuery, PeakSearchSettings, SearchWindow};
use crate::linalg::Mat9;
use crate::linear::{LinearResponder, STerms};
use crate::math::{exp, sqrt, PI};
use crate::params::{ModelConfig, ParamError};

pub use quadrature::{
    adaptive_bounds, composite_nodes, gauss_lobatto, panelize, panelize_with, subdivide,
    GaussLobatto, PanelLadder, Peak,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error(
        "single-atom solve failed at δ_ao = {delta_a_o:e}, δ_aμ = {delta_a_mu:e} rad/s: {source}"
    )]
    Atom {
        delta_a_o: f64,
        delta_a_mu: f64,
        source: AtomError,
    },
    #[error("inner panel refinement exceeded its depth cap at δ_ao = {delta_a_o:e} rad/s")]
    NotConverged { delta_a_o: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistributionKind {
    #[default]
    Gaussian,
    /// All atoms at the centre detunings.
    Delta,
}

/// Independent Gaussian distributions of the atom–cavity detunings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InhomogeneousDistribution {
    pub center_o: f64,
    pub center_mu: f64,
    pub sigma_o: f64,
    pub sigma_mu: f64,
    pub kind: DistributionKind,
}

impl InhomogeneousDistribution {
    pub fn gaussian(center_o: f64, center_mu: f64, sigma_o: f64, sigma_mu: f64) -> Self {
        InhomogeneousDistribution {
            center_o,
            center_mu,
            sigma_o,
            sigma_mu,
            kind: DistributionKind::Gaussian,
        }
    }

    pub fn delta(center_o: f64, center_mu: f64) -> Self {
        InhomogeneousDistribution {
            center_o,
            center_mu,
            sigma_o: 0.0,
            sigma_mu: 0.0,
            kind: DistributionKind::Delta,
        }
    }

    pub fn density_o(&self, delta_a_o: f64) -> f64 {
        gaussian(delta_a_o, self.center_o, self.sigma_o)
    }

    pub fn density_mu(&self, delta_a_mu: f64) -> f64 {
        gaussian(delta_a_mu, self.center_mu, self.sigma_mu)
    }
}

fn gaussian(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    exp(-0.5 * z * z) / (sigma * sqrt(2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Gauss–Lobatto points per panel.
    pub points: usize,
    /// Integration half widths in units of the standard deviations.
    pub n_sigma: f64,
    pub base_panels_o: usize,
    pub base_panels_mu: usize,
    pub ladder_ratio: f64,
    /// Every panel is split into `2^refine` equal parts.
    pub refine: u32,
    /// Adaptive subdivision of the inner panels.
    pub adaptive: bool,
    pub adaptive_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            points: 15,
            n_sigma: 6.0,
            base_panels_o: 8,
            base_panels_mu: 8,
            ladder_ratio: 4.0,
            refine: 0,
            adaptive: false,
            adaptive_tol: 1e-7,
            max_depth: 6,
        }
    }
}

impl QuadratureSettings {
    /// The same scheme with every panel halved.
    pub fn refined(&self) -> Self {
        QuadratureSettings {
            refine: self.refine + 1,
            ..*self
        }
    }
}

/// Nonlinear ensemble sums `Σ_k g_μ* ⟨σ12⟩_k` and `Σ_k g_o* ⟨σ13⟩_k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnsembleSums {
    pub s12: C64,
    pub s13: C64,
}

/// Single-atom coherences at one detuning pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandSample {
    pub delta_a_o: f64,
    pub delta_a_mu: f64,
    pub rho12: C64,
    pub rho13: C64,
}

/// Quantities shared by every single-atom evaluation of one ensemble
/// integral.
#[derive(Debug, Clone, Copy)]
struct Context {
    damping: Mat9,
    /// Smallest coherence decay rate, the innermost panel width.
    width: f64,
    dist: InhomogeneousDistribution,
}

impl Context {
    fn new(config: &ModelConfig) -> Result<Self, EnsembleError> {
        let rates = DampingRates::from_atom(&config.atom)?;
        let n12 = config.n12();
        let (w12, w13) = rates.coherence_widths(n12);
        Ok(Context {
            damping: build_damping(&rates, n12),
            width: w12.min(w13),
            dist: config.distribution(),
        })
    }
}

/// Double integral `∬ G_o G_μ f`. `inner_peaks` gives the inner-panel peaks
/// for an outer node; `eval` evaluates the integrand at `(δ_ao, δ_aμ)`.
fn integrate_2d<const K: usize, P, E>(
    dist: &InhomogeneousDistribution,
    quad: &QuadratureSettings,
    outer_peaks: &[Peak],
    inner_peaks: P,
    eval: E,
) -> Result<[C64; K], EnsembleError>
where
    P: Fn(f64) -> Vec<Peak> + Sync,
    E: Fn(f64, f64) -> Result<[C64; K], AtomError> + Sync,
{
    if dist.kind == DistributionKind::Delta {
        return eval(dist.center_o, dist.center_mu).map_err(|source| EnsembleError::Atom {
            delta_a_o: dist.center_o,
            delta_a_mu: dist.center_mu,
            source,
        });
    }
    let rule = GaussLobatto::new(quad.points.max(3));
    let (xo, wo) = outer_nodes(dist, quad, outer_peaks, &rule);
    let inner = |i: usize| -> Result<[C64; K], EnsembleError> {
        let x = xo[i];
        let weight = wo[i] * dist.density_o(x);
        let mut s = integrate_inner(dist, quad, &rule, &inner_peaks(x), |m| eval(x, m), x)?;
        for v in s.iter_mut() {
            *v *= weight;
        }
        Ok(s)
    };
    let parts = map_outer(xo.len(), inner);
    let mut total = [C64::new(0.0, 0.0); K];
    for p in parts {
        let p = p?;
        for (t, v) in total.iter_mut().zip(p.iter()) {
            *t += *v;
        }
    }
    Ok(total)
}

fn outer_nodes(
    dist: &InhomogeneousDistribution,
    quad: &QuadratureSettings,
    peaks: &[Peak],
    rule: &GaussLobatto,
) -> (Vec<f64>, Vec<f64>) {
    let half = quad.n_sigma * dist.sigma_o;
    let ladder = PanelLadder {
        ratio: quad.ladder_ratio,
        base_panels: quad.base_panels_o,
    };
    let bounds = panelize_with(dist.center_o - half, dist.center_o + half, peaks, &ladder);
    composite_nodes(&subdivide(&bounds, quad.refine), rule)
}

/// `∫ G_μ f dδ_aμ` over the inner window.
fn integrate_inner<const K: usize, F>(
    dist: &InhomogeneousDistribution,
    quad: &QuadratureSettings,
    rule: &GaussLobatto,
    peaks: &[Peak],
    f: F,
    delta_a_o: f64,
) -> Result<[C64; K], EnsembleError>
where
    F: Fn(f64) -> Result<[C64; K], AtomError>,
{
    let half = quad.n_sigma * dist.sigma_mu;
    let ladder = PanelLadder {
        ratio: quad.ladder_ratio,
        base_panels: quad.base_panels_mu,
    };
    let mut bounds = subdivide(
        &panelize_with(dist.center_mu - half, dist.center_mu + half, peaks, &ladder),
        quad.refine,
    );
    let wrap = |m: f64, e: AtomError| EnsembleError::Atom {
        delta_a_o,
        delta_a_mu: m,
        source: e,
    };
    if quad.adaptive {
        let mut failure: Option<EnsembleError> = None;
        let g = |m: f64| -> [C64; K] {
            match f(m) {
                Ok(v) => {
                    let w = dist.density_mu(m);
                    let mut out = v;
                    for x in out.iter_mut() {
                        *x *= w;
                    }
                    out
                }
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(wrap(m, e));
                    }
                    [C64::new(0.0, 0.0); K]
                }
            }
        };
        let refined = adaptive_bounds(g, &bounds, rule, quad.adaptive_tol, quad.max_depth);
        if let Some(e) = failure {
            return Err(e);
        }
        bounds = refined.ok_or(EnsembleError::NotConverged { delta_a_o })?;
    }
    let (xs, ws) = composite_nodes(&bounds, rule);
    let mut s = [C64::new(0.0, 0.0); K];
    for (&m, &w) in xs.iter().zip(&ws) {
        let v = f(m).map_err(|e| wrap(m, e))?;
        let wt = w * dist.density_mu(m);
        for (acc, x) in s.iter_mut().zip(v.iter()) {
            *acc += *x * wt;
        }
    }
    Ok(s)
}

#[cfg(feature = "parallel")]
fn map_outer<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_outer<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

fn inner_window(
    ctx: &Context,
    quad: &QuadratureSettings,
    peaks: &PeakSearchSettings,
) -> SearchWindow {
    let half = quad.n_sigma * ctx.dist.sigma_mu;
    SearchWindow {
        lo: ctx.dist.center_mu - half,
        hi: ctx.dist.center_mu + half,
        tol: peaks.tol_sigmas * ctx.dist.sigma_mu,
    }
}

fn peak_finder<'a>(
    config: &'a ModelConfig,
    ctx: &'a Context,
    fields: FieldState,
    omega: C64,
) -> impl Fn(f64) -> Vec<Peak> + Sync + 'a {
    let window = inner_window(ctx, &config.numerics.quadrature, &config.numerics.peaks);
    move |delta_a_o: f64| {
        let q = DegeneracyQuery {
            delta_a_o,
            fields,
            omega,
            delta_mu: config.drive.delta_mu,
            delta_o: config.drive.delta_o,
            g_mu: config.atom.g_mu,
            g_o: config.atom.g_o,
        };
        dressed_peaks(&q, &window, &config.numerics.peaks)
            .into_iter()
            .map(|p| Peak {
                position: p.delta_a_mu,
                width: ctx.width.max(0.25 * p.gap),
            })
            .collect()
    }
}

fn outer_peaks(config: &ModelConfig, ctx: &Context) -> [Peak; 1] {
    [Peak {
        position: config.drive.delta_o,
        width: ctx.width,
    }]
}

/// Linearized ensemble terms for the drive settings in `config`, using the
/// default distribution of the configuration.
pub fn integrate_linear_sums(config: &ModelConfig) -> Result<STerms, EnsembleError> {
    let ctx = Context::new(config)?;
    integrate_linear_sums_with(config, &ctx.dist)
}

/// Linearized ensemble terms over an explicit distribution. The microwave
/// terms are scaled by `N g_μ`, the optical terms by `N_o g_o`. Atoms outside
/// the optical mode see neither the pump nor the optical field and
/// contribute only a two-level microwave response.
pub fn integrate_linear_sums_with(
    config: &ModelConfig,
    dist: &InhomogeneousDistribution,
) -> Result<STerms, EnsembleError> {
    let spec = &config.ensemble;
    if spec.n_total == 0.0 {
        return Ok(STerms::default());
    }
    let mut ctx = Context::new(config)?;
    ctx.dist = *dist;
    let quad = &config.numerics.quadrature;
    let drive = &config.drive;
    let pumped = LinearResponder::new(
        &config.atom,
        &ctx.damping,
        drive.omega,
        drive.delta_mu,
        drive.delta_o,
    );
    let mut s = [C64::new(0.0, 0.0); 4];
    if spec.n_o > 0.0 {
        s = integrate_2d(
            &ctx.dist,
            quad,
            &outer_peaks(config, &ctx),
            peak_finder(config, &ctx, FieldState::ZERO, drive.omega),
            |o, m| {
                pumped.respond(AtomDetunings {
                    delta_a_o: o,
                    delta_a_mu: m,
                })
            },
        )?;
    }
    let g_mu = config.atom.g_mu;
    let g_o = config.atom.g_o;
    let mut terms = STerms {
        s_alpha_12: s[0] * (spec.n_o * g_mu),
        s_beta_12: s[1] * (spec.n_o * g_mu),
        s_alpha_13: s[2] * (spec.n_o * g_o),
        s_beta_13: s[3] * (spec.n_o * g_o),
    };
    let rest = spec.n_total - spec.n_o;
    if rest > 0.0 {
        let bare = LinearResponder::new(
            &config.atom,
            &ctx.damping,
            C64::new(0.0, 0.0),
            drive.delta_mu,
            drive.delta_o,
        );
        let r = integrate_mu_only(config, &ctx, FieldState::ZERO, |m| {
            bare.respond(AtomDetunings {
                delta_a_o: ctx.dist.center_o,
                delta_a_mu: m,
            })
        })?;
        terms.s_beta_12 += r[1] * (rest * g_mu);
    }
    Ok(terms)
}

/// One-dimensional microwave integral for atoms without pump or optical
/// field, whose response does not depend on `δ_ao`.
fn integrate_mu_only<const K: usize, F>(
    config: &ModelConfig,
    ctx: &Context,
    fields: FieldState,
    f: F,
) -> Result<[C64; K], EnsembleError>
where
    F: Fn(f64) -> Result<[C64; K], AtomError>,
{
    let o = ctx.dist.center_o;
    if ctx.dist.kind == DistributionKind::Delta {
        return f(ctx.dist.center_mu).map_err(|source| EnsembleError::Atom {
            delta_a_o: o,
            delta_a_mu: ctx.dist.center_mu,
            source,
        });
    }
    let quad = &config.numerics.quadrature;
    let rule = GaussLobatto::new(quad.points.max(3));
    let fields = FieldState::new(fields.beta, C64::new(0.0, 0.0));
    let peaks = peak_finder(config, ctx, fields, C64::new(0.0, 0.0))(o);
    integrate_inner(&ctx.dist, quad, &rule, &peaks, f, o)
}

/// Full (unlinearized) ensemble sums at the given intracavity fields.
pub fn integrate_nonlinear_sums(
    config: &ModelConfig,
    fields: FieldState,
) -> Result<EnsembleSums, EnsembleError> {
    let spec = &config.ensemble;
    if spec.n_total == 0.0 {
        return Ok(EnsembleSums::default());
    }
    let ctx = Context::new(config)?;
    let quad = &config.numerics.quadrature;
    let drive = &config.drive;
    let model = AtomModel::new(
        &config.atom,
        &ctx.damping,
        fields,
        drive.omega,
        drive.delta_mu,
        drive.delta_o,
    );
    let coherences = |m: &AtomModel, det: AtomDetunings| -> Result<[C64; 2], AtomError> {
        let sys = ConstrainedSystem::new(&m.liouvillian(det))?;
        let rho = DensityMatrix::from_vector(&sys.steady_state());
        Ok([rho.coherence_12(), rho.coherence_13()])
    };
    let mut s = [C64::new(0.0, 0.0); 2];
    if spec.n_o > 0.0 {
        s = integrate_2d(
            &ctx.dist,
            quad,
            &outer_peaks(config, &ctx),
            peak_finder(config, &ctx, fields, drive.omega),
            |o, m| {
                coherences(
                    &model,
                    AtomDetunings {
                        delta_a_o: o,
                        delta_a_mu: m,
                    },
                )
            },
        )?;
    }
    let mut sums = EnsembleSums {
        s12: s[0] * (spec.n_o * config.atom.g_mu),
        s13: s[1] * (spec.n_o * config.atom.g_o),
    };
    let rest = spec.n_total - spec.n_o;
    if rest > 0.0 {
        let bare = AtomModel::new(
            &config.atom,
            &ctx.damping,
            FieldState::new(fields.beta, C64::new(0.0, 0.0)),
            C64::new(0.0, 0.0),
            drive.delta_mu,
            drive.delta_o,
        );
        let r = integrate_mu_only(config, &ctx, fields, |m| {
            coherences(
                &bare,
                AtomDetunings {
                    delta_a_o: ctx.dist.center_o,
                    delta_a_mu: m,
                },
            )
        })?;
        sums.s12 += r[0] * (rest * config.atom.g_mu);
    }
    Ok(sums)
}

/// Single-atom steady-state coherences on a rectangular detuning grid, for
/// diagnostics and coherence maps. Rows run over `delta_a_o` first.
pub fn integrand_samples(
    config: &ModelConfig,
    fields: FieldState,
    delta_a_o: &[f64],
    delta_a_mu: &[f64],
) -> Result<Vec<IntegrandSample>, EnsembleError> {
    let ctx = Context::new(config)?;
    let drive = &config.drive;
    let model = AtomModel::new(
        &config.atom,
        &ctx.damping,
        fields,
        drive.omega,
        drive.delta_mu,
        drive.delta_o,
    );
    let mut out = Vec::with_capacity(delta_a_o.len() * delta_a_mu.len());
    for &o in delta_a_o {
        for &m in delta_a_mu {
            let det = AtomDetunings {
                delta_a_o: o,
                delta_a_mu: m,
            };
            let sys = ConstrainedSystem::new(&model.liouvillian(det)).map_err(|source| {
                EnsembleError::Atom {
                    delta_a_o: o,
                    delta_a_mu: m,
                    source,
                }
            })?;
            let rho = DensityMatrix::from_vector(&sys.steady_state());
            out.push(IntegrandSample {
                delta_a_o: o,
                delta_a_mu: m,
                rho12: rho.coherence_12(),
                rho13: rho.coherence_13(),
            });
        }
    }
    Ok(out)
}

/// Number of single-atom evaluations one ensemble integral takes with the
/// given settings, for the linear sums at zero field.
pub fn node_count(config: &ModelConfig) -> Result<usize, EnsembleError> {
    let ctx = Context::new(config)?;
    let quad = &config.numerics.quadrature;
    if ctx.dist.kind == DistributionKind::Delta {
        return Ok(1);
    }
    let rule = GaussLobatto::new(quad.points.max(3));
    let (xo, _) = outer_nodes(&ctx.dist, quad, &outer_peaks(config, &ctx), &rule);
    let finder = peak_finder(config, &ctx, FieldState::ZERO, config.drive.omega);
    let half = quad.n_sigma * ctx.dist.sigma_mu;
    let ladder = PanelLadder {
        ratio: quad.ladder_ratio,
        base_panels: quad.base_panels_mu,
    };
    let mut n = 0;
    for x in xo {
        let b = subdivide(
            &panelize_with(
                ctx.dist.center_mu - half,
                ctx.dist.center_mu + half,
                &finder(x),
                &ladder,
            ),
            quad.refine,
        );
        n += (b.len() - 1) * (rule.len() - 1) + 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::BareFrequencyUnits;

    fn base() -> ModelConfig {
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Cyclic);
        c.numerics.quadrature.base_panels_o = 4;
        c
    }

    #[test]
    fn gaussian_density_is_normalized() {
        let d = InhomogeneousDistribution::gaussian(1.0, -2.0, 0.5, 3.0);
        let rule = GaussLobatto::new(15);
        let b = subdivide(&[1.0 - 3.0, 1.0 + 3.0], 3);
        let (xs, ws) = composite_nodes(&b, &rule);
        let total: f64 = xs.iter().zip(&ws).map(|(x, w)| d.density_o(*x) * w).sum();
        assert!((total - 1.0).abs() < 2e-9);
    }

    #[test]
    fn empty_ensemble_gives_zero() {
        let mut c = base();
        c.ensemble.n_total = 0.0;
        c.ensemble.n_o = 0.0;
        assert_eq!(integrate_linear_sums(&c).unwrap(), STerms::default());
        let f = FieldState::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        assert_eq!(
            integrate_nonlinear_sums(&c, f).unwrap(),
            EnsembleSums::default()
        );
    }

    #[test]
    fn ground_state_has_no_coherence() {
        let mut c = base();
        c.ensemble.temperature = 0.0;
        let s = integrate_nonlinear_sums(&c, FieldState::ZERO).unwrap();
        assert!(s.s12.norm() == 0.0 && s.s13.norm() == 0.0);
    }

    #[test]
    fn delta_distribution_is_single_atom_response() {
        let mut c = base();
        c.drive.omega = C64::new(3e6, 0.0);
        let dist = InhomogeneousDistribution::delta(2e7, 1e6);
        let s = integrate_linear_sums_with(&c, &dist).unwrap();
        let ctx = Context::new(&c).unwrap();
        let r = LinearResponder::new(&c.atom, &ctx.damping, c.drive.omega, 0.0, 0.0)
            .respond(AtomDetunings {
                delta_a_o: 2e7,
                delta_a_mu: 1e6,
            })
            .unwrap();
        let n = c.ensemble.n_total;
        assert_eq!(s.s_beta_12, r[1] * (n * c.atom.g_mu));
        assert_eq!(s.s_beta_13, r[3] * (n * c.atom.g_o));
    }

    #[test]
    fn sums_scale_with_atom_number() {
        let mut c = base();
        c.drive.omega = C64::new(3e6, 0.0);
        c.numerics.quadrature.points = 7;
        let dist = InhomogeneousDistribution::delta(2e7, 1e6);
        let a = integrate_linear_sums_with(&c, &dist).unwrap();
        c.ensemble.n_total *= 2.0;
        c.ensemble.n_o *= 2.0;
        let b = integrate_linear_sums_with(&c, &dist).unwrap();
        assert_eq!(b.s_beta_13, a.s_beta_13 * 2.0);
        assert_eq!(b.s_alpha_13, a.s_alpha_13 * 2.0);
    }
}
