//! Physical constants and the derived quantities built from the raw
//! parameters: thermal occupations, decay branching, drive amplitudes.

use crate::math::{abs, exp, expm1, sqrt, tanh};
use crate::params::{AtomParams, CavityParams, EnsembleSpec, ParamError};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
pub const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Bose–Einstein occupation `1 / (exp(ħω / k_B T) − 1)` of a mode at angular
/// frequency `omega`. Zero at `T = 0`.
pub fn planck_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temperature);
    if x > 700.0 {
        return 0.0;
    }
    1.0 / expm1(x)
}

/// Population-difference weighted atom number `N (ρ11 − ρ22)` of a thermal
/// two-level ensemble, `N tanh(ħω / 2 k_B T)`.
pub fn effective_microwave_atom_number(spec: &EnsembleSpec, omega_12: f64) -> f64 {
    if spec.temperature <= 0.0 {
        return spec.n_total;
    }
    let x = HBAR * omega_12 / (K_B * spec.temperature);
    spec.n_total * tanh(0.5 * x)
}

/// Photon-flux amplitude `sqrt(P / ħω)` of a travelling input of power
/// `power` (W). Zero phase.
pub fn input_amplitude_from_power(power: f64, omega: f64) -> Result<f64, ParamError> {
    if !(power >= 0.0) {
        return Err(ParamError::Negative {
            name: "power",
            value: power,
        });
    }
    if !(omega > 0.0) {
        return Err(ParamError::NonPositive {
            name: "omega",
            value: omega,
        });
    }
    Ok(sqrt(power / (HBAR * omega)))
}

/// Converts dBm to W.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * exp(dbm * core::f64::consts::LN_10 / 10.0)
}

/// Splits the lifetimes into `(γ12, γ13, γ23)`: `γ12 = 1/τ2`, and the decay
/// of `|3⟩` is shared between the two optical branches in the ratio
/// `d13² : d23²`.
pub fn decay_rates_from_lifetimes(atom: &AtomParams) -> Result<(f64, f64, f64), ParamError> {
    if !(atom.tau2 > 0.0) {
        return Err(ParamError::NonPositive {
            name: "tau2",
            value: atom.tau2,
        });
    }
    if !(atom.tau3 > 0.0) {
        return Err(ParamError::NonPositive {
            name: "tau3",
            value: atom.tau3,
        });
    }
    let gamma_3 = 1.0 / atom.tau3;
    let w13 = atom.d13 * atom.d13;
    let w23 = atom.d23 * atom.d23;
    let (gamma_13, gamma_23) = if w13 + w23 > 0.0 {
        let f = w13 / (w13 + w23);
        (gamma_3 * f, gamma_3 - gamma_3 * f)
    } else {
        (0.5 * gamma_3, 0.5 * gamma_3)
    };
    Ok((1.0 / atom.tau2, gamma_13, gamma_23))
}

/// Coupling of the `|2⟩ ↔ |3⟩` transition to a single optical photon, scaled
/// from `g_o` by the dipole ratio.
pub fn pump_single_photon_coupling(atom: &AtomParams) -> f64 {
    if atom.d13 > 0.0 {
        atom.g_o * atom.d23 / atom.d13
    } else {
        0.0
    }
}

/// Intracavity photon number of a resonantly driven pump mode,
/// `4 γ_oc (P / ħω_p) / (γ_oc + γ_oi)²`.
pub fn pump_photon_number(
    power: f64,
    omega_pump: f64,
    cavity: &CavityParams,
) -> Result<f64, ParamError> {
    let flux = input_amplitude_from_power(power, omega_pump)?;
    let total = cavity.gamma_o_c + cavity.gamma_o_i;
    if !(total > 0.0) {
        return Err(ParamError::NonPositive {
            name: "gamma_o_c + gamma_o_i",
            value: total,
        });
    }
    Ok(4.0 * cavity.gamma_o_c * flux * flux / (total * total))
}

/// Pump Rabi frequency `Ω = g23 sqrt(n_p)` produced by `power` watts at
/// `omega_pump`, with the pump resonant with its cavity mode.
pub fn rabi_from_pump_power(
    power: f64,
    omega_pump: f64,
    cavity: &CavityParams,
    atom: &AtomParams,
) -> Result<f64, ParamError> {
    let n_p = pump_photon_number(power, omega_pump, cavity)?;
    Ok(pump_single_photon_coupling(atom) * sqrt(n_p))
}

/// Intrinsic loss rate `ω / Q` of a resonator with quality factor `q`.
pub fn loss_from_quality_factor(omega: f64, q: f64) -> Result<f64, ParamError> {
    if !(q > 0.0) {
        return Err(ParamError::NonPositive {
            name: "optical_q",
            value: q,
        });
    }
    Ok(abs(omega) / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelConfig;
    use approx::assert_relative_eq;

    #[test]
    fn planck_limits_and_values() {
        let w = TWO_PI * 5e9;
        assert_eq!(planck_occupation(w, 0.0), 0.0);
        // 1/(e^{ħω/kT} − 1) at 5 GHz, 100 mK
        assert_relative_eq!(
            planck_occupation(w, 0.1),
            0.099_810_307_656_775_1,
            max_relative = 1e-12
        );
        assert!((planck_occupation(w, 0.1) - 0.0998).abs() < 1e-4);
        assert!(planck_occupation(TWO_PI * 195e12, 300.0) < 1e-13);
    }

    #[test]
    fn planck_is_monotone() {
        let w = TWO_PI * 5e9;
        let mut last = 0.0;
        for k in 1..50 {
            let n = planck_occupation(w, 0.02 * k as f64);
            assert!(n > last);
            last = n;
        }
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let n = planck_occupation(TWO_PI * 1e9 * k as f64, 0.1);
            assert!(n < last);
            last = n;
        }
    }

    #[test]
    fn effective_number() {
        let mut spec = ModelConfig::table_one(crate::params::BareFrequencyUnits::Angular).ensemble;
        spec.n_total = 1e16;
        spec.temperature = 0.0;
        assert_eq!(effective_microwave_atom_number(&spec, TWO_PI * 5e9), 1e16);
        spec.temperature = 0.1;
        let n = effective_microwave_atom_number(&spec, TWO_PI * 5e9);
        assert_relative_eq!(n, 8.335_968_782_418_978e15, max_relative = 1e-12);
        spec.temperature = 1e6;
        assert!(effective_microwave_atom_number(&spec, TWO_PI * 5e9) < 1e16 * 1e-5);
    }

    #[test]
    fn amplitudes_from_power() {
        assert_eq!(input_amplitude_from_power(0.0, 1.0).unwrap(), 0.0);
        let p = dbm_to_watts(-75.0);
        assert_relative_eq!(p, 3.162_277_660_168e-11, max_relative = 1e-12);
        let a = input_amplitude_from_power(p, TWO_PI * 5e9).unwrap();
        assert_relative_eq!(a, 3_089_491.347_439_597, max_relative = 1e-10);
        let b = input_amplitude_from_power(1e-12, TWO_PI * 195e12).unwrap();
        assert_relative_eq!(b, 2_781.984_331_986_757, max_relative = 1e-10);
        assert!(input_amplitude_from_power(-1.0, 1.0).is_err());
        let rate = 1e-9 / (HBAR * 1e10);
        let amp = input_amplitude_from_power(1e-9, 1e10).unwrap();
        assert_relative_eq!(amp * amp, rate, max_relative = 1e-12);
    }

    #[test]
    fn branching_from_dipoles() {
        let atom = ModelConfig::table_one(crate::params::BareFrequencyUnits::Angular).atom;
        let (g12, g13, g23) = decay_rates_from_lifetimes(&atom).unwrap();
        assert_relative_eq!(g12, 1.0 / 11.0, max_relative = 1e-14);
        assert_relative_eq!(g13, 60.696_678_804_936_34, max_relative = 1e-12);
        assert_relative_eq!(g23, 30.212_412_104_154_58, max_relative = 1e-12);
        assert!((g13 + g23 - 1.0 / 11e-3).abs() <= 1e-15 * (1.0 / 11e-3) * 4.0);

        let mut sym = atom;
        sym.d23 = sym.d13;
        let (_, a, b) = decay_rates_from_lifetimes(&sym).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a, 0.5 / sym.tau3, max_relative = 1e-15);

        sym.tau2 = 0.0;
        assert!(matches!(
            decay_rates_from_lifetimes(&sym),
            Err(ParamError::NonPositive { name: "tau2", .. })
        ));
    }

    #[test]
    fn rabi_square_root_law() {
        let cfg = ModelConfig::table_one(crate::params::BareFrequencyUnits::Angular);
        let mut cav = cfg.cavity;
        cav.gamma_o_c = TWO_PI * 1.7e6;
        cav.gamma_o_i = TWO_PI * 7.95e6;
        let mut atom = cfg.atom;
        atom.g_o = 51.9;
        let wp = TWO_PI * 195e12;
        assert_eq!(rabi_from_pump_power(0.0, wp, &cav, &atom).unwrap(), 0.0);
        let o1 = rabi_from_pump_power(0.05, wp, &cav, &atom).unwrap();
        let o2 = rabi_from_pump_power(0.1, wp, &cav, &atom).unwrap();
        assert_relative_eq!(o2 / o1, core::f64::consts::SQRT_2, max_relative = 1e-12);
        // closed form evaluated independently: n_p = 8.9946e9, g23 = 36.617 rad/s
        assert_relative_eq!(o2, 3_472_717.714_106_4, max_relative = 1e-9);
        assert!(rabi_from_pump_power(-1.0, wp, &cav, &atom).is_err());
    }
}
