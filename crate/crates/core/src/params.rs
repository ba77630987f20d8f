//! Model parameters. All frequencies and rates are angular (rad/s).

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::dressed::PeakSearchSettings;
use crate::ensemble::{InhomogeneousDistribution, QuadratureSettings};
use crate::nonlinear::FieldSolverSettings;
use crate::units::{self, TWO_PI};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be strictly positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} is not finite")]
    NotFinite { name: &'static str },
    #[error("{0}")]
    Inconsistent(&'static str),
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ParamError> {
    finite(name, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::Negative { name, value })
    }
}

fn finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NotFinite { name })
    }
}

/// How a frequency written without an explicit `2π` factor is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BareFrequencyUnits {
    /// The number already is an angular frequency.
    #[default]
    Angular,
    /// The number is a cyclic frequency and gets multiplied by `2π`.
    Cyclic,
}

impl BareFrequencyUnits {
    pub fn to_angular(self, value: f64) -> f64 {
        match self {
            BareFrequencyUnits::Angular => value,
            BareFrequencyUnits::Cyclic => TWO_PI * value,
        }
    }
}

/// Relation between output and intracavity fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputConvention {
    /// `β_out = sqrt(γ_μc) β`, `α_out = sqrt(γ_oc) α`.
    #[default]
    Paper,
    /// Standard input–output: `β_out = sqrt(γ_μc) β − β_in`, likewise for α.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// `|1⟩ ↔ |3⟩` dipole moment, C·m.
    pub d13: f64,
    /// `|2⟩ ↔ |3⟩` dipole moment, C·m.
    pub d23: f64,
    /// Lifetime of `|3⟩`, s.
    pub tau3: f64,
    /// Lifetime of `|2⟩`, s.
    pub tau2: f64,
    pub gamma_2d: f64,
    pub gamma_3d: f64,
    /// Single-ion coupling to the microwave cavity mode.
    pub g_mu: f64,
    /// Single-ion coupling to the optical signal mode.
    pub g_o: f64,
    /// Mean `|1⟩ ↔ |2⟩` transition frequency.
    pub omega_12: f64,
    /// Mean `|1⟩ ↔ |3⟩` transition frequency.
    pub omega_13: f64,
}

impl AtomParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        non_negative("d13", self.d13)?;
        non_negative("d23", self.d23)?;
        positive("tau3", self.tau3)?;
        positive("tau2", self.tau2)?;
        positive("gamma_2d", self.gamma_2d)?;
        positive("gamma_3d", self.gamma_3d)?;
        non_negative("g_mu", self.g_mu)?;
        non_negative("g_o", self.g_o)?;
        positive("omega_12", self.omega_12)?;
        positive("omega_13", self.omega_13)?;
        Ok(())
    }

    /// Frequency of the `|2⟩ ↔ |3⟩` pump transition.
    pub fn omega_23(&self) -> f64 {
        self.omega_13 - self.omega_12
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    pub gamma_mu_c: f64,
    pub gamma_mu_i: f64,
    pub gamma_o_c: f64,
    pub gamma_o_i: f64,
    pub omega_c_mu: f64,
    pub omega_c_o: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        non_negative("gamma_mu_c", self.gamma_mu_c)?;
        non_negative("gamma_mu_i", self.gamma_mu_i)?;
        non_negative("gamma_o_c", self.gamma_o_c)?;
        non_negative("gamma_o_i", self.gamma_o_i)?;
        positive("gamma_mu_c + gamma_mu_i", self.gamma_mu_c + self.gamma_mu_i)?;
        positive("gamma_o_c + gamma_o_i", self.gamma_o_c + self.gamma_o_i)?;
        positive("omega_c_mu", self.omega_c_mu)?;
        positive("omega_c_o", self.omega_c_o)?;
        Ok(())
    }

    /// Microwave amplitude decay rate `(γ_μc + γ_μi) / 2`.
    pub fn half_width_mu(&self) -> f64 {
        0.5 * (self.gamma_mu_c + self.gamma_mu_i)
    }

    /// Optical amplitude decay rate `(γ_oc + γ_oi) / 2`.
    pub fn half_width_o(&self) -> f64 {
        0.5 * (self.gamma_o_c + self.gamma_o_i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    /// Ions in the microwave mode.
    pub n_total: f64,
    /// Ions also inside the optical mode.
    pub n_o: f64,
    pub sigma_o: f64,
    pub sigma_mu: f64,
    /// K.
    pub temperature: f64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        non_negative("n_total", self.n_total)?;
        non_negative("n_o", self.n_o)?;
        if self.n_o > self.n_total {
            return Err(ParamError::Inconsistent("n_o must not exceed n_total"));
        }
        positive("sigma_o", self.sigma_o)?;
        positive("sigma_mu", self.sigma_mu)?;
        non_negative("temperature", self.temperature)?;
        Ok(())
    }
}

/// Inputs and drive detunings. `delta_mu` and `delta_o` are the drive
/// frequencies minus the respective cavity resonances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSettings {
    /// Microwave input amplitude, sqrt(photons/s).
    pub beta_in: C64,
    /// Optical signal input amplitude, sqrt(photons/s).
    pub alpha_in: C64,
    /// Pump Rabi frequency on `|2⟩ ↔ |3⟩`.
    pub omega: C64,
    pub delta_mu: f64,
    pub delta_o: f64,
}

impl Default for DriveSettings {
    fn default() -> Self {
        DriveSettings {
            beta_in: C64::new(0.0, 0.0),
            alpha_in: C64::new(0.0, 0.0),
            omega: C64::new(0.0, 0.0),
            delta_mu: 0.0,
            delta_o: 0.0,
        }
    }
}

impl DriveSettings {
    pub fn validate(&self) -> Result<(), ParamError> {
        let ok = |z: C64| z.re.is_finite() && z.im.is_finite();
        if !ok(self.beta_in) {
            return Err(ParamError::NotFinite { name: "beta_in" });
        }
        if !ok(self.alpha_in) {
            return Err(ParamError::NotFinite { name: "alpha_in" });
        }
        if !ok(self.omega) {
            return Err(ParamError::NotFinite { name: "rabi" });
        }
        finite("delta_mu", self.delta_mu)?;
        finite("delta_o", self.delta_o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NumericsSettings {
    pub quadrature: QuadratureSettings,
    pub peaks: PeakSearchSettings,
    pub fields: FieldSolverSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub atom: AtomParams,
    pub cavity: CavityParams,
    pub ensemble: EnsembleSpec,
    pub drive: DriveSettings,
    pub numerics: NumericsSettings,
    pub convention: OutputConvention,
    /// Pump power (W) the Rabi frequency was derived from, if any.
    pub pump_power: Option<f64>,
}

impl ModelConfig {
    /// Er:Y2SiO5 device parameters with the default numerics. The two
    /// single-ion couplings are quoted without a `2π` factor (51.9 and 1.04);
    /// `units` decides how they are read.
    pub fn table_one(units: BareFrequencyUnits) -> Self {
        let omega_12 = TWO_PI * 5e9;
        let omega_13 = TWO_PI * 195e12;
        ModelConfig {
            atom: AtomParams {
                d13: 1.63e-32,
                d23: 1.15e-32,
                tau3: 11e-3,
                tau2: 11.0,
                gamma_2d: TWO_PI * 1e3,
                gamma_3d: TWO_PI * 1e3,
                g_mu: units.to_angular(1.04),
                g_o: units.to_angular(51.9),
                omega_12,
                omega_13,
            },
            cavity: CavityParams {
                gamma_mu_c: TWO_PI * 1.5e6,
                gamma_mu_i: TWO_PI * 650e3,
                gamma_o_c: TWO_PI * 1.7e6,
                gamma_o_i: TWO_PI * 7.95e6,
                omega_c_mu: omega_12,
                omega_c_o: omega_13,
            },
            ensemble: EnsembleSpec {
                n_total: 1e16,
                n_o: 1e16,
                sigma_o: TWO_PI * 419e6,
                sigma_mu: TWO_PI * 5e6,
                temperature: 0.1,
            },
            drive: DriveSettings::default(),
            numerics: NumericsSettings::default(),
            convention: OutputConvention::Paper,
            pump_power: None,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.atom.validate()?;
        self.cavity.validate()?;
        self.ensemble.validate()?;
        self.drive.validate()
    }

    /// Thermal occupation of the microwave transition.
    pub fn n12(&self) -> f64 {
        units::planck_occupation(self.atom.omega_12, self.ensemble.temperature)
    }

    /// Mean atomic detunings from the cavities, `(ω12 − ω_cμ, ω13 − ω_co)`.
    pub fn atom_cavity_detunings(&self) -> (f64, f64) {
        (
            self.atom.omega_12 - self.cavity.omega_c_mu,
            self.atom.omega_13 - self.cavity.omega_c_o,
        )
    }

    pub fn distribution(&self) -> InhomogeneousDistribution {
        let (center_mu, center_o) = self.atom_cavity_detunings();
        InhomogeneousDistribution::gaussian(
            center_o,
            center_mu,
            self.ensemble.sigma_o,
            self.ensemble.sigma_mu,
        )
    }

    /// Moves the cavities so the mean atomic detunings become the given
    /// values.
    pub fn set_atom_cavity_detunings(&mut self, center_mu: f64, center_o: f64) {
        self.cavity.omega_c_mu = self.atom.omega_12 - center_mu;
        self.cavity.omega_c_o = self.atom.omega_13 - center_o;
    }

    /// Sets the pump Rabi frequency from a pump power, using the current
    /// optical cavity losses for the pump build-up.
    pub fn set_pump_power(&mut self, power: f64) -> Result<(), ParamError> {
        let omega =
            units::rabi_from_pump_power(power, self.atom.omega_23(), &self.cavity, &self.atom)?;
        self.drive.omega = C64::new(omega, 0.0);
        self.pump_power = Some(power);
        Ok(())
    }

    /// Sets the optical intrinsic loss from a quality factor, refreshing the
    /// pump Rabi frequency if it was derived from a power.
    pub fn set_optical_q(&mut self, q: f64) -> Result<(), ParamError> {
        self.cavity.gamma_o_i = units::loss_from_quality_factor(self.cavity.omega_c_o, q)?;
        if let Some(p) = self.pump_power {
            self.set_pump_power(p)?;
        }
        Ok(())
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<(), ParamError> {
        non_negative("temperature", temperature)?;
        self.ensemble.temperature = temperature;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_is_valid() {
        for u in [BareFrequencyUnits::Angular, BareFrequencyUnits::Cyclic] {
            ModelConfig::table_one(u).validate().unwrap();
        }
        let c = ModelConfig::table_one(BareFrequencyUnits::Cyclic);
        assert!((c.atom.g_o - TWO_PI * 51.9).abs() < 1e-12);
        assert!((c.cavity.gamma_mu_i - 4.0841e6).abs() < 1e2);
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        c.atom.tau3 = -1e-3;
        assert_eq!(
            c.validate(),
            Err(ParamError::NonPositive {
                name: "tau3",
                value: -1e-3
            })
        );
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        c.ensemble.n_o = 2.0 * c.ensemble.n_total;
        assert!(matches!(c.validate(), Err(ParamError::Inconsistent(_))));
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        c.cavity.gamma_o_c = 0.0;
        c.cavity.gamma_o_i = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn quality_factor_refreshes_pump() {
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Cyclic);
        c.set_pump_power(0.1).unwrap();
        let before = c.drive.omega.re;
        c.set_optical_q(1e8).unwrap();
        assert!((c.cavity.gamma_o_i - c.cavity.omega_c_o / 1e8).abs() < 1e-6);
        assert!(c.drive.omega.re != before);
    }

    #[test]
    fn detuning_roundtrip() {
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        c.set_atom_cavity_detunings(1.5e8, -2.0e10);
        let (m, o) = c.atom_cavity_detunings();
        assert!((m - 1.5e8).abs() < 1e-3);
        assert!((o + 2.0e10).abs() < 1.0);
    }
}
