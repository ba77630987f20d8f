//! Steady-state model of coherent microwave-to-optical conversion by an
//! inhomogeneously broadened ensemble of three-level ions sitting in
//! overlapping microwave and optical cavities.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature spreads the outer ensemble integral over a
//! rayon pool; reductions always happen in a fixed order so results do not
//! depend on the number of worker threads.
//!
//! Conventions used throughout:
//!
//! * every frequency, detuning and rate is an angular frequency in rad/s;
//! * field amplitudes are photon-flux normalized, so `|beta_in|^2` is photons/s
//!   and `|beta|^2` is the intracavity photon number;
//! * density matrices are vectorized row-major, `v[3 * i + j] = rho[i][j]`,
//!   so `vec(A rho B) = (A ⊗ Bᵀ) vec(rho)`;
//! * `⟨σ_nm⟩` (with `σ_nm = |n⟩⟨m|`) is the matrix element `rho[m][n]`; this is
//!   the quantity that enters the cavity equations.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod atom;
pub mod dressed;
pub mod ensemble;
pub mod linalg;
pub mod linear;
mod math;
pub mod nonlinear;
pub mod optimizer;
pub mod params;
pub mod units;

pub use num_complex::Complex64 as C64;

pub use atom::{AtomDetunings, DensityMatrix, FieldState, Liouvillian};
pub use ensemble::{EnsembleSums, InhomogeneousDistribution};
pub use linear::{STerms, ScatteringCoefficients};
pub use params::{
    AtomParams, CavityParams, DriveSettings, EnsembleSpec, ModelConfig, NumericsSettings,
    OutputConvention,
};
