//! Plain-text model configuration.
//!
//! One `key = value [unit]` pair per line; `#` starts a comment. Frequencies
//! and rates are stored in rad/s. A value written with an explicit `2π·`
//! factor (also `2pi*`, `2*pi*`) is multiplied out. The `bare_frequency`
//! key decides how a frequency without the factor and without a `rad/s`
//! unit is read: `angular` (the default) keeps the number, `cyclic`
//! multiplies it by `2π`.
//!
//! With `base = table1` every key is optional and falls back to the device
//! parameters of [`ModelConfig::table_one`]. With `base = none` the atom,
//! cavity and ensemble keys are required.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use upconv_core::optimizer::SweepVariable;
use upconv_core::params::{BareFrequencyUnits, ModelConfig, OutputConvention, ParamError};
use upconv_core::units::{dbm_to_watts, input_amplitude_from_power, TWO_PI};
use upconv_core::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("key `{key}` given twice (line {line})")]
    Duplicate { key: String, line: usize },
    #[error("required key `{key}` is missing")]
    Missing { key: String },
    #[error("key `{key}` has no value (line {line})")]
    Empty { key: String, line: usize },
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("key `{key}`: unknown unit `{unit}`")]
    BadUnit { key: String, unit: String },
    #[error("keys `{a}` and `{b}` cannot both be set")]
    Conflict { a: String, b: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    /// The key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. }
            | ConfigError::Duplicate { key, .. }
            | ConfigError::Missing { key }
            | ConfigError::Empty { key, .. }
            | ConfigError::BadValue { key, .. }
            | ConfigError::BadUnit { key, .. }
            | ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::Conflict { a, .. } => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Frequency,
    Time,
    Power,
    Temperature,
    Dipole,
    Number,
    Integer,
    Flag,
    Complex,
    Choice(&'static [&'static str]),
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    /// Needed when there is no base parameter set.
    required: bool,
}

const fn key(name: &'static str, kind: Kind, required: bool) -> KeySpec {
    KeySpec {
        name,
        kind,
        required,
    }
}

const KEYS: &[KeySpec] = &[
    key("base", Kind::Choice(&["table1", "none"]), false),
    key(
        "bare_frequency",
        Kind::Choice(&["angular", "cyclic"]),
        false,
    ),
    key("convention", Kind::Choice(&["paper", "standard"]), false),
    // atom
    key("d13", Kind::Dipole, true),
    key("d23", Kind::Dipole, true),
    key("tau3", Kind::Time, true),
    key("tau2", Kind::Time, true),
    key("gamma_2d", Kind::Frequency, false),
    key("gamma_3d", Kind::Frequency, false),
    key("g_mu", Kind::Frequency, true),
    key("g_o", Kind::Frequency, true),
    key("omega_12", Kind::Frequency, true),
    key("omega_13", Kind::Frequency, true),
    // cavities
    key("gamma_mu_c", Kind::Frequency, true),
    key("gamma_mu_i", Kind::Frequency, false),
    key("gamma_o_c", Kind::Frequency, true),
    key("gamma_o_i", Kind::Frequency, false),
    key("q_mu", Kind::Number, false),
    key("q_o", Kind::Number, false),
    key("omega_c_mu", Kind::Frequency, false),
    key("omega_c_o", Kind::Frequency, false),
    key("atom_cavity_mu", Kind::Frequency, false),
    key("atom_cavity_o", Kind::Frequency, false),
    // ensemble
    key("n_total", Kind::Number, true),
    key("n_o", Kind::Number, false),
    key("sigma_o", Kind::Frequency, true),
    key("sigma_mu", Kind::Frequency, true),
    key("temperature", Kind::Temperature, true),
    // drives
    key("beta_in", Kind::Complex, false),
    key("alpha_in", Kind::Complex, false),
    key("microwave_power", Kind::Power, false),
    key("optical_power", Kind::Power, false),
    key("rabi", Kind::Frequency, false),
    key("pump_power", Kind::Power, false),
    key("delta_mu", Kind::Frequency, false),
    key("delta_o", Kind::Frequency, false),
    // numerics
    key("quad_points", Kind::Integer, false),
    key("n_sigma", Kind::Number, false),
    key("base_panels_o", Kind::Integer, false),
    key("base_panels_mu", Kind::Integer, false),
    key("ladder_ratio", Kind::Number, false),
    key("refine", Kind::Integer, false),
    key("adaptive", Kind::Flag, false),
    key("adaptive_tol", Kind::Number, false),
    key("max_depth", Kind::Integer, false),
    key("peak_window_sigmas", Kind::Number, false),
    key("peak_scan_points", Kind::Integer, false),
    key("field_rel_tol", Kind::Number, false),
    key("field_abs_tol", Kind::Number, false),
    key("field_max_iter", Kind::Integer, false),
];

/// Default dephasing rate of `|2⟩` and `|3⟩`.
pub const DEFAULT_DEPHASING: f64 = TWO_PI * 1e3;

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Splits a number from its unit, e.g. `"650 kHz"` into `(650.0, "kHz")`.
fn split_number(s: &str) -> Option<(f64, &str)> {
    let b = s.as_bytes();
    let mut end = 0;
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_digit() || c == b'.' {
            i += 1;
            end = i;
        } else if (c == b'e' || c == b'E') && end > 0 {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                i = j;
            } else {
                break;
            }
        } else {
            break;
        }
    }
    if end == 0 {
        return None;
    }
    let num = s[..end].parse().ok()?;
    Some((num, s[end..].trim()))
}

/// Removes a leading `2π` factor.
fn strip_two_pi(s: &str) -> (bool, &str) {
    for p in ["2π·", "2π*", "2π ", "2π", "2pi*", "2*pi*", "2pi ", "2·π·"] {
        if let Some(rest) = s.strip_prefix(p) {
            return (true, rest.trim_start());
        }
    }
    (false, s)
}

fn parse_value(
    name: &str,
    kind: Kind,
    raw: &str,
    bare: BareFrequencyUnits,
) -> Result<Value, ConfigError> {
    let bad = || ConfigError::BadValue {
        key: name.to_string(),
        value: raw.to_string(),
    };
    let bad_unit = |u: &str| ConfigError::BadUnit {
        key: name.to_string(),
        unit: u.to_string(),
    };
    let trimmed = raw.trim();
    // a sign may stand in front of the 2π factor
    let (negate, unsigned) = match trimmed.strip_prefix('-') {
        Some(rest) if strip_two_pi(rest).0 => (true, rest),
        _ => (false, trimmed),
    };
    let (two_pi, body) = strip_two_pi(unsigned);
    if two_pi && kind != Kind::Frequency {
        return Err(bad());
    }
    let number = || split_number(body).ok_or_else(bad);
    let v = match kind {
        Kind::Frequency => {
            let (x, unit) = number()?;
            let (scale, angular) = match unit {
                "" => (1.0, false),
                "Hz" => (1.0, false),
                "kHz" => (1e3, false),
                "MHz" => (1e6, false),
                "GHz" => (1e9, false),
                "THz" => (1e12, false),
                "rad/s" | "/s" | "s^-1" => (1.0, true),
                "krad/s" => (1e3, true),
                "Mrad/s" => (1e6, true),
                "Grad/s" => (1e9, true),
                u => return Err(bad_unit(u)),
            };
            if angular && two_pi {
                return Err(bad());
            }
            let x = x * scale;
            let x = if negate { -x } else { x };
            Value::Real(if two_pi {
                TWO_PI * x
            } else if angular {
                x
            } else {
                bare.to_angular(x)
            })
        }
        Kind::Time => {
            let (x, unit) = number()?;
            let scale = match unit {
                "" | "s" => 1.0,
                "ms" => 1e-3,
                "us" | "µs" => 1e-6,
                "ns" => 1e-9,
                u => return Err(bad_unit(u)),
            };
            Value::Real(x * scale)
        }
        Kind::Power => {
            let (x, unit) = number()?;
            Value::Real(match unit {
                "" | "W" => x,
                "mW" => x * 1e-3,
                "uW" | "µW" => x * 1e-6,
                "nW" => x * 1e-9,
                "pW" => x * 1e-12,
                "dBm" => dbm_to_watts(x),
                u => return Err(bad_unit(u)),
            })
        }
        Kind::Temperature => {
            let (x, unit) = number()?;
            Value::Real(match unit {
                "" | "K" => x,
                "mK" => x * 1e-3,
                "uK" | "µK" => x * 1e-6,
                u => return Err(bad_unit(u)),
            })
        }
        Kind::Dipole => {
            let (x, unit) = number()?;
            match unit {
                "" | "C m" | "C·m" | "Cm" | "C*m" => Value::Real(x),
                u => return Err(bad_unit(u)),
            }
        }
        Kind::Number => {
            let (x, unit) = number()?;
            if !unit.is_empty() {
                return Err(bad_unit(unit));
            }
            Value::Real(x)
        }
        Kind::Integer => Value::Integer(body.parse().map_err(|_| bad())?),
        Kind::Flag => Value::Flag(match body {
            "true" | "yes" | "on" | "1" => true,
            "false" | "no" | "off" | "0" => false,
            _ => return Err(bad()),
        }),
        Kind::Complex => {
            let z: C64 = body.replace(' ', "").parse().map_err(|_| bad())?;
            Value::Complex(z)
        }
        Kind::Choice(options) => {
            if !options.contains(&body) {
                return Err(bad());
            }
            Value::Choice(body.to_string())
        }
    };
    if let Value::Real(x) = v {
        if !x.is_finite() {
            return Err(bad());
        }
    }
    Ok(v)
}

/// Reads a frequency given on the command line, with the same syntax as in
/// a config file. `name` is used in error messages.
pub fn parse_frequency(
    name: &str,
    text: &str,
    bare: BareFrequencyUnits,
) -> Result<f64, ConfigError> {
    match parse_value(name, Kind::Frequency, text, bare)? {
        Value::Real(x) => Ok(x),
        _ => unreachable!(),
    }
}

pub fn parse_complex(name: &str, text: &str) -> Result<C64, ConfigError> {
    match parse_value(name, Kind::Complex, text, BareFrequencyUnits::Angular)? {
        Value::Complex(z) => Ok(z),
        _ => unreachable!(),
    }
}

/// Reads one value of a swept quantity: a temperature, a pump power, or a
/// bare optical quality factor.
pub fn parse_sweep_value(variable: SweepVariable, text: &str) -> Result<f64, ConfigError> {
    let kind = match variable {
        SweepVariable::Temperature => Kind::Temperature,
        SweepVariable::PumpPower => Kind::Power,
        SweepVariable::OpticalQ => Kind::Number,
    };
    match parse_value(variable.name(), kind, text, BareFrequencyUnits::Angular)? {
        Value::Real(x) => Ok(x),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Real(f64),
    Integer(u64),
    Flag(bool),
    Complex(C64),
    Choice(String),
}

/// A parsed configuration together with the flags that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub model: ModelConfig,
    pub bare_frequency: BareFrequencyUnits,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn read_entries(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if spec(k).is_none() {
            return Err(ConfigError::UnknownKey {
                key: k.to_string(),
                line,
            });
        }
        let entry = Entry {
            value: v.trim().to_string(),
            line,
        };
        if map.insert(k.to_string(), entry).is_some() {
            return Err(ConfigError::Duplicate {
                key: k.to_string(),
                line,
            });
        }
    }
    Ok(map)
}

fn invalid(key: &str, e: ParamError) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: e.to_string(),
    }
}

/// Maps a validation error back to the config key it came from.
fn param_key(e: &ParamError) -> String {
    match e {
        ParamError::NonPositive { name, .. }
        | ParamError::Negative { name, .. }
        | ParamError::NotFinite { name } => match *name {
            "gamma_mu_c + gamma_mu_i" => "gamma_mu_i".to_string(),
            "gamma_o_c + gamma_o_i" => "gamma_o_i".to_string(),
            other => other.to_string(),
        },
        ParamError::Inconsistent(_) => "n_o".to_string(),
    }
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let entries = read_entries(text)?;
    // empty values count as absent for optional keys
    let mut values: BTreeMap<&'static str, Value> = BTreeMap::new();
    let choice = |name: &str| -> Result<Option<String>, ConfigError> {
        match entries.get(name) {
            Some(e) if !e.value.is_empty() => {
                match parse_value(
                    name,
                    spec(name).unwrap().kind,
                    &e.value,
                    BareFrequencyUnits::Angular,
                )? {
                    Value::Choice(s) => Ok(Some(s)),
                    _ => unreachable!(),
                }
            }
            _ => Ok(None),
        }
    };
    let bare = match choice("bare_frequency")?.as_deref() {
        Some("cyclic") => BareFrequencyUnits::Cyclic,
        _ => BareFrequencyUnits::Angular,
    };
    let with_base = choice("base")?.as_deref() != Some("none");

    for k in KEYS {
        match entries.get(k.name) {
            Some(e) if e.value.is_empty() => {
                if k.required && !with_base {
                    return Err(ConfigError::Empty {
                        key: k.name.to_string(),
                        line: e.line,
                    });
                }
            }
            Some(e) => {
                values.insert(k.name, parse_value(k.name, k.kind, &e.value, bare)?);
            }
            None => {
                if k.required && !with_base {
                    return Err(ConfigError::Missing {
                        key: k.name.to_string(),
                    });
                }
            }
        }
    }
    for (a, b) in [
        ("rabi", "pump_power"),
        ("beta_in", "microwave_power"),
        ("alpha_in", "optical_power"),
        ("q_o", "gamma_o_i"),
        ("q_mu", "gamma_mu_i"),
        ("omega_c_mu", "atom_cavity_mu"),
        ("omega_c_o", "atom_cavity_o"),
    ] {
        if values.contains_key(a) && values.contains_key(b) {
            return Err(ConfigError::Conflict {
                a: a.to_string(),
                b: b.to_string(),
            });
        }
    }

    let mut c = if with_base {
        ModelConfig::table_one(bare)
    } else {
        let mut c = ModelConfig::table_one(BareFrequencyUnits::Angular);
        c.atom.gamma_2d = DEFAULT_DEPHASING;
        c.atom.gamma_3d = DEFAULT_DEPHASING;
        c.cavity.gamma_mu_i = 0.0;
        c.cavity.gamma_o_i = 0.0;
        c.drive = Default::default();
        c
    };
    let real = |name: &str| match values.get(name) {
        Some(Value::Real(x)) => Some(*x),
        _ => None,
    };
    let int = |name: &str| match values.get(name) {
        Some(Value::Integer(x)) => Some(*x),
        _ => None,
    };
    macro_rules! set {
        ($($field:expr => $name:literal),* $(,)?) => {
            $(if let Some(x) = real($name) { $field = x; })*
        };
    }
    set! {
        c.atom.d13 => "d13",
        c.atom.d23 => "d23",
        c.atom.tau3 => "tau3",
        c.atom.tau2 => "tau2",
        c.atom.gamma_2d => "gamma_2d",
        c.atom.gamma_3d => "gamma_3d",
        c.atom.g_mu => "g_mu",
        c.atom.g_o => "g_o",
        c.atom.omega_12 => "omega_12",
        c.atom.omega_13 => "omega_13",
        c.cavity.gamma_mu_c => "gamma_mu_c",
        c.cavity.gamma_mu_i => "gamma_mu_i",
        c.cavity.gamma_o_c => "gamma_o_c",
        c.cavity.gamma_o_i => "gamma_o_i",
        c.ensemble.n_total => "n_total",
        c.ensemble.sigma_o => "sigma_o",
        c.ensemble.sigma_mu => "sigma_mu",
        c.ensemble.temperature => "temperature",
        c.drive.delta_mu => "delta_mu",
        c.drive.delta_o => "delta_o",
        c.numerics.quadrature.n_sigma => "n_sigma",
        c.numerics.quadrature.ladder_ratio => "ladder_ratio",
        c.numerics.quadrature.adaptive_tol => "adaptive_tol",
        c.numerics.peaks.window_sigmas => "peak_window_sigmas",
        c.numerics.fields.rel_tol => "field_rel_tol",
        c.numerics.fields.abs_tol => "field_abs_tol",
    }
    // without an explicit value all ions sit in the optical mode
    c.ensemble.n_o = real("n_o").unwrap_or(c.ensemble.n_total);
    if !values.contains_key("omega_c_mu") && !values.contains_key("atom_cavity_mu") {
        c.cavity.omega_c_mu = c.atom.omega_12;
    }
    if !values.contains_key("omega_c_o") && !values.contains_key("atom_cavity_o") {
        c.cavity.omega_c_o = c.atom.omega_13;
    }
    set! {
        c.cavity.omega_c_mu => "omega_c_mu",
        c.cavity.omega_c_o => "omega_c_o",
    }
    if let Some(x) = real("atom_cavity_mu") {
        c.cavity.omega_c_mu = c.atom.omega_12 - x;
    }
    if let Some(x) = real("atom_cavity_o") {
        c.cavity.omega_c_o = c.atom.omega_13 - x;
    }
    let usize_of = |name: &str, x: u64| -> Result<usize, ConfigError> {
        usize::try_from(x).map_err(|_| ConfigError::Invalid {
            key: name.to_string(),
            message: "out of range".to_string(),
        })
    };
    if let Some(x) = int("quad_points") {
        if x < 3 {
            return Err(ConfigError::Invalid {
                key: "quad_points".to_string(),
                message: "at least 3 points are needed".to_string(),
            });
        }
        c.numerics.quadrature.points = usize_of("quad_points", x)?;
    }
    if let Some(x) = int("base_panels_o") {
        c.numerics.quadrature.base_panels_o = usize_of("base_panels_o", x)?.max(1);
    }
    if let Some(x) = int("base_panels_mu") {
        c.numerics.quadrature.base_panels_mu = usize_of("base_panels_mu", x)?.max(1);
    }
    if let Some(x) = int("refine") {
        c.numerics.quadrature.refine = x.min(16) as u32;
    }
    if let Some(x) = int("max_depth") {
        c.numerics.quadrature.max_depth = x.min(40) as u32;
    }
    if let Some(x) = int("peak_scan_points") {
        c.numerics.peaks.scan_points = usize_of("peak_scan_points", x)?.max(2);
    }
    if let Some(x) = int("field_max_iter") {
        c.numerics.fields.max_iter = usize_of("field_max_iter", x)?;
    }
    if let Some(Value::Flag(b)) = values.get("adaptive") {
        c.numerics.quadrature.adaptive = *b;
    }
    if let Some(Value::Choice(s)) = values.get("convention") {
        c.convention = if s == "standard" {
            OutputConvention::Standard
        } else {
            OutputConvention::Paper
        };
    }

    // quantities derived from others, in dependency order
    if let Some(q) = real("q_mu") {
        c.cavity.gamma_mu_i = upconv_core::units::loss_from_quality_factor(c.cavity.omega_c_mu, q)
            .map_err(|e| invalid("q_mu", e))?;
    }
    if let Some(q) = real("q_o") {
        c.cavity.gamma_o_i = upconv_core::units::loss_from_quality_factor(c.cavity.omega_c_o, q)
            .map_err(|e| invalid("q_o", e))?;
    }
    if let Some(x) = real("rabi") {
        c.drive.omega = C64::new(x, 0.0);
        c.pump_power = None;
    }
    if let Some(p) = real("pump_power") {
        c.set_pump_power(p).map_err(|e| invalid("pump_power", e))?;
    }
    if let Some(Value::Complex(z)) = values.get("beta_in") {
        c.drive.beta_in = *z;
    }
    if let Some(Value::Complex(z)) = values.get("alpha_in") {
        c.drive.alpha_in = *z;
    }
    if let Some(p) = real("microwave_power") {
        let a = input_amplitude_from_power(p, c.cavity.omega_c_mu)
            .map_err(|e| invalid("microwave_power", e))?;
        c.drive.beta_in = C64::new(a, 0.0);
    }
    if let Some(p) = real("optical_power") {
        let a = input_amplitude_from_power(p, c.cavity.omega_c_o)
            .map_err(|e| invalid("optical_power", e))?;
        c.drive.alpha_in = C64::new(a, 0.0);
    }

    c.validate().map_err(|e| invalid(&param_key(&e), e))?;
    Ok(LoadedConfig {
        model: c,
        bare_frequency: bare,
    })
}

fn complex(z: C64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

/// Canonical text of a configuration: no base set, every value in SI or
/// rad/s, shortest round-trip number formatting. Parsing the result gives
/// back the same configuration.
pub fn render_config(c: &ModelConfig) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let f = |x: f64| format!("{x:e} rad/s");
    line("base", "none".into());
    line("bare_frequency", "angular".into());
    line(
        "convention",
        match c.convention {
            OutputConvention::Paper => "paper".into(),
            OutputConvention::Standard => "standard".into(),
        },
    );
    let a = &c.atom;
    line("d13", format!("{:e} C m", a.d13));
    line("d23", format!("{:e} C m", a.d23));
    line("tau3", format!("{:e} s", a.tau3));
    line("tau2", format!("{:e} s", a.tau2));
    line("gamma_2d", f(a.gamma_2d));
    line("gamma_3d", f(a.gamma_3d));
    line("g_mu", f(a.g_mu));
    line("g_o", f(a.g_o));
    line("omega_12", f(a.omega_12));
    line("omega_13", f(a.omega_13));
    let cv = &c.cavity;
    line("gamma_mu_c", f(cv.gamma_mu_c));
    line("gamma_mu_i", f(cv.gamma_mu_i));
    line("gamma_o_c", f(cv.gamma_o_c));
    line("gamma_o_i", f(cv.gamma_o_i));
    line("omega_c_mu", f(cv.omega_c_mu));
    line("omega_c_o", f(cv.omega_c_o));
    let e = &c.ensemble;
    line("n_total", format!("{:e}", e.n_total));
    line("n_o", format!("{:e}", e.n_o));
    line("sigma_o", f(e.sigma_o));
    line("sigma_mu", f(e.sigma_mu));
    line("temperature", format!("{:e} K", e.temperature));
    let d = &c.drive;
    line("beta_in", complex(d.beta_in));
    line("alpha_in", complex(d.alpha_in));
    match c.pump_power {
        Some(p) if d.omega.im == 0.0 => line("pump_power", format!("{p:e} W")),
        _ => line("rabi", f(d.omega.re)),
    }
    line("delta_mu", f(d.delta_mu));
    line("delta_o", f(d.delta_o));
    let q = &c.numerics.quadrature;
    line("quad_points", q.points.to_string());
    line("n_sigma", format!("{:e}", q.n_sigma));
    line("base_panels_o", q.base_panels_o.to_string());
    line("base_panels_mu", q.base_panels_mu.to_string());
    line("ladder_ratio", format!("{:e}", q.ladder_ratio));
    line("refine", q.refine.to_string());
    line("adaptive", q.adaptive.to_string());
    line("adaptive_tol", format!("{:e}", q.adaptive_tol));
    line("max_depth", q.max_depth.to_string());
    let p = &c.numerics.peaks;
    line("peak_window_sigmas", format!("{:e}", p.window_sigmas));
    line("peak_scan_points", p.scan_points.to_string());
    let fs = &c.numerics.fields;
    line("field_rel_tol", format!("{:e}", fs.rel_tol));
    line("field_abs_tol", format!("{:e}", fs.abs_tol));
    line("field_max_iter", fs.max_iter.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_units() {
        assert_eq!(split_number("650 kHz"), Some((650.0, "kHz")));
        assert_eq!(split_number("1.5e-3ms"), Some((1.5e-3, "ms")));
        assert_eq!(split_number("-2E+3"), Some((-2000.0, "")));
        assert_eq!(split_number("3e"), Some((3.0, "e")));
        assert_eq!(split_number("kHz"), None);
        assert_eq!(strip_two_pi("2π·650 kHz"), (true, "650 kHz"));
        assert_eq!(strip_two_pi("2*pi*1"), (true, "1"));
    }

    #[test]
    fn frequency_readings() {
        let p = |s: &str, b| match parse_value("x", Kind::Frequency, s, b).unwrap() {
            Value::Real(x) => x,
            _ => unreachable!(),
        };
        let a = BareFrequencyUnits::Angular;
        assert!((p("2π·650 kHz", a) - 4.084_070_449_666_731e6).abs() < 1e-6);
        assert_eq!(p("51.9 Hz", a), 51.9);
        assert_eq!(p("51.9 Hz", BareFrequencyUnits::Cyclic), TWO_PI * 51.9);
        assert_eq!(p("3 rad/s", BareFrequencyUnits::Cyclic), 3.0);
        assert_eq!(p("-2pi*20 MHz", a), -TWO_PI * 2e7);
        assert!(parse_value("x", Kind::Frequency, "--2pi*20 MHz", a).is_err());
        assert!(parse_value("x", Kind::Frequency, "3 furlongs", a).is_err());
        assert!(parse_value("x", Kind::Time, "2π·3 s", a).is_err());
    }

    fn shipped() -> LoadedConfig {
        parse_config(include_str!("../../../configs/table1.conf")).unwrap()
    }

    fn err(text: &str) -> ConfigError {
        parse_config(text).unwrap_err()
    }

    #[test]
    fn shipped_file_loads() {
        let c = shipped();
        assert_eq!(c.bare_frequency, BareFrequencyUnits::Cyclic);
        let m = &c.model;
        assert!((m.cavity.gamma_mu_i - 4.0841e6).abs() < 1e2);
        assert_eq!(m.atom.gamma_2d, DEFAULT_DEPHASING);
        assert_eq!(m.atom.g_o, TWO_PI * 51.9);
        assert_eq!(m.ensemble.n_o, m.ensemble.n_total);
        assert_eq!(m.cavity.omega_c_o, m.atom.omega_13);
        assert!((m.cavity.gamma_o_i - TWO_PI * 1.95e6).abs() < 1e-3);
        assert_eq!(m.pump_power, Some(0.1));
        assert!(m.drive.omega.re > 0.0);
    }

    #[test]
    fn render_round_trips() {
        let c = shipped().model;
        let text = render_config(&c);
        let back = parse_config(&text).unwrap().model;
        assert_eq!(back, c);
        assert_eq!(render_config(&back), text);

        let mut d = c;
        d.drive.beta_in = C64::new(3.1e6, -2.5e-3);
        d.drive.alpha_in = C64::new(-0.0, 7.0);
        d.drive.delta_mu = -1.234_567_890_123e8;
        d.convention = OutputConvention::Standard;
        d.numerics.quadrature.adaptive = true;
        d.set_atom_cavity_detunings(2.0e8, -3.3e10);
        assert_eq!(parse_config(&render_config(&d)).unwrap().model, d);
    }

    #[test]
    fn defaults_from_base() {
        let c = parse_config("").unwrap();
        assert_eq!(c.model, ModelConfig::table_one(BareFrequencyUnits::Angular));
        let c = parse_config("bare_frequency = cyclic\n").unwrap();
        assert_eq!(c.model, ModelConfig::table_one(BareFrequencyUnits::Cyclic));
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(err("tau3 = -1 ms").key(), Some("tau3"));
        assert_eq!(err("gamma_mu_c = -1").key(), Some("gamma_mu_c"));
        assert_eq!(err("n_o = 2e16").key(), Some("n_o"));
        assert_eq!(err("tau3 = 1 furlong").key(), Some("tau3"));
        assert_eq!(err("tau3 = fast").key(), Some("tau3"));
        assert_eq!(err("frobnicate = 1").key(), Some("frobnicate"));
        assert_eq!(err("tau2 = 1\ntau2 = 2").key(), Some("tau2"));
        assert_eq!(err("rabi = 1\npump_power = 1 mW").key(), Some("rabi"));
        assert_eq!(err("q_o = -5").key(), Some("q_o"));
        assert_eq!(err("temperature = 2π·1 K").key(), Some("temperature"));
        assert_eq!(err("quad_points = 2").key(), Some("quad_points"));
        assert!(matches!(
            err("no equals sign"),
            ConfigError::Syntax { line: 1 }
        ));

        let text = include_str!("../../../configs/table1.conf").replace("tau2 = 11 s", "");
        assert_eq!(err(&text), ConfigError::Missing { key: "tau2".into() });
        let text = include_str!("../../../configs/table1.conf").replace("11 s", "");
        assert!(matches!(err(&text), ConfigError::Empty { .. }));
        assert!(err("tau3 = -1 ms").to_string().contains("tau3"));
    }

    #[test]
    fn derived_quantities() {
        let c = parse_config(
            "microwave_power = -75 dBm\noptical_power = 1 pW\natom_cavity_mu = 2π·10 MHz\n",
        )
        .unwrap()
        .model;
        assert!((c.drive.beta_in.re / 3.09e6 - 1.0).abs() < 2e-3);
        assert!((c.drive.alpha_in.re / 2.78e3 - 1.0).abs() < 2e-3);
        assert!((c.atom_cavity_detunings().0 - TWO_PI * 1e7).abs() < 1e-3);
        let c = parse_config("beta_in = 1e3-2e2i\nrabi = 5 Mrad/s")
            .unwrap()
            .model;
        assert_eq!(c.drive.beta_in, C64::new(1e3, -2e2));
        assert_eq!(c.drive.omega, C64::new(5e6, 0.0));
    }
}
