#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upconv_core::atom::{build_damping, build_liouvillian, hamiltonian, DampingRates};
use upconv_core::linalg::{Mat3, Mat9};
use upconv_core::{FieldState, Liouvillian, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One atom with every rate, field and detuning drawn at random. All scales
/// stay within two decades of `scale` so direct propagation stays cheap.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub rates: DampingRates,
    pub n12: f64,
    pub fields: FieldState,
    pub pump: C64,
    pub level2: f64,
    pub level3: f64,
    pub g_mu: f64,
    pub g_o: f64,
}

fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (r.gen_range(lo.ln()..hi.ln())).exp()
}

fn phasor(r: &mut ChaCha8Rng, mag: f64) -> C64 {
    C64::from_polar(mag, r.gen_range(0.0..std::f64::consts::TAU))
}

impl Draw {
    pub fn random(r: &mut ChaCha8Rng, scale: f64) -> Self {
        let rate = |r: &mut ChaCha8Rng| log_uniform(r, 0.1 * scale, 10.0 * scale);
        let rates = DampingRates {
            gamma_12: rate(r),
            gamma_13: rate(r),
            gamma_23: rate(r),
            gamma_2d: rate(r),
            gamma_3d: rate(r),
        };
        let n12 = if r.gen_bool(0.2) {
            0.0
        } else {
            log_uniform(r, 1e-3, 3.0)
        };
        let g_mu = log_uniform(r, 0.1, 10.0);
        let g_o = log_uniform(r, 0.1, 10.0);
        let b = log_uniform(r, 1e-3, 3.0) * scale / g_mu;
        let a = log_uniform(r, 1e-3, 3.0) * scale / g_o;
        let fields = FieldState::new(phasor(r, b), phasor(r, a));
        let pump = log_uniform(r, 1e-2, 5.0) * scale;
        Draw {
            rates,
            n12,
            fields,
            pump: phasor(r, pump),
            level2: r.gen_range(-5.0..5.0) * scale,
            level3: r.gen_range(-5.0..5.0) * scale,
            g_mu,
            g_o,
        }
    }

    pub fn hamiltonian(&self) -> Mat3 {
        hamiltonian(
            self.fields,
            self.pump,
            self.level2,
            self.level3,
            self.g_mu,
            self.g_o,
        )
    }

    pub fn damping(&self) -> Mat9 {
        build_damping(&self.rates, self.n12)
    }

    pub fn liouvillian(&self) -> Liouvillian {
        build_liouvillian(&self.hamiltonian(), &self.damping())
    }
}

pub fn to_nalgebra(m: &Mat9) -> nalgebra::SMatrix<nalgebra::Complex<f64>, 9, 9> {
    nalgebra::SMatrix::from_fn(|i, j| {
        let z = m.0[i][j];
        nalgebra::Complex::new(z.re, z.im)
    })
}

/// Slowest nonzero relaxation rate of the generator, from an independent
/// eigen-decomposition.
pub fn slowest_rate(l: &Liouvillian) -> f64 {
    let ev = to_nalgebra(l.matrix())
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular");
    let mut rates: Vec<f64> = ev.iter().map(|z| -z.re).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // the smallest value belongs to the steady state
    rates[1]
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    (*a - *b).max_abs()
}
