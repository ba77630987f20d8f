//! Built-in suite of analytic checks, run by `upconv validate`.

use upconv_core::atom::{
    build_damping, build_liouvillian, hamiltonian, steady_state, AtomModel, DampingRates,
};
use upconv_core::dressed::{
    find_degenerate_detunings, guess_small_pump, DegeneracyQuery, PeakSearchSettings, SearchWindow,
};
use upconv_core::linear::{scattering, LinearResponder, STerms};
use upconv_core::params::{BareFrequencyUnits, ModelConfig, OutputConvention};
use upconv_core::units::{
    dbm_to_watts, decay_rates_from_lifetimes, effective_microwave_atom_number,
    input_amplitude_from_power, planck_occupation, TWO_PI,
};
use upconv_core::{AtomDetunings, DriveSettings, FieldState, C64};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn thermal_occupation() -> Check {
    let n = planck_occupation(TWO_PI * 5e9, 0.1);
    let zero = planck_occupation(TWO_PI * 5e9, 0.0);
    let optical = planck_occupation(TWO_PI * 195e12, 300.0);
    check(
        "thermal occupation",
        rel(n, 0.0998) < 1e-3 && zero == 0.0 && optical < 1e-13,
        format!("N(5 GHz, 100 mK) = {n:.6}, N(T = 0) = {zero}, N(195 THz, 300 K) = {optical:.2e}"),
    )
}

fn microwave_atom_number() -> Check {
    let e = ModelConfig::table_one(BareFrequencyUnits::Angular).ensemble;
    let n = effective_microwave_atom_number(&e, TWO_PI * 5e9);
    let mut cold = e;
    cold.temperature = 0.0;
    let n0 = effective_microwave_atom_number(&cold, TWO_PI * 5e9);
    check(
        "microwave atom number",
        rel(n, 0.8337e16) < 1e-3 && n0 == e.n_total,
        format!("N_mu = {n:.5e}, at T = 0 {n0:e}"),
    )
}

fn input_amplitudes() -> Check {
    let b = input_amplitude_from_power(dbm_to_watts(-75.0), TWO_PI * 5e9).unwrap_or(f64::NAN);
    let a = input_amplitude_from_power(1e-12, TWO_PI * 195e12).unwrap_or(f64::NAN);
    check(
        "input amplitudes",
        rel(b, 3.09e6) < 2e-3 && rel(a, 2.78e3) < 2e-3,
        format!("-75 dBm at 5 GHz -> {b:.4e}, 1 pW at 195 THz -> {a:.4e}"),
    )
}

fn decay_rates() -> Check {
    let atom = ModelConfig::table_one(BareFrequencyUnits::Angular).atom;
    match decay_rates_from_lifetimes(&atom) {
        Ok((g12, g13, g23)) => check(
            "decay rates",
            rel(g12, 1.0 / 11.0) < 1e-12
                && rel(g13 / g23, (atom.d13 / atom.d23).powi(2)) < 1e-14
                && rel(g13 + g23, 1.0 / atom.tau3) < 1e-14,
            format!("gamma_12 = {g12:.4}, gamma_13 = {g13:.2}, gamma_23 = {g23:.2}"),
        ),
        Err(e) => check("decay rates", false, e.to_string()),
    }
}

fn rates() -> DampingRates {
    DampingRates::from_atom(&ModelConfig::table_one(BareFrequencyUnits::Angular).atom)
        .expect("default atom is valid")
}

fn ground_and_thermal_states() -> Check {
    let r = rates();
    let h = hamiltonian(FieldState::ZERO, C64::new(0.0, 0.0), 1e6, 2e6, 1.0, 1.0);
    let mut worst: f64 = 0.0;
    for n in [0.0, 0.0998, 1.0, 10.0] {
        let rho = match steady_state(&build_liouvillian(&h, &build_damping(&r, n))) {
            Ok(rho) => rho,
            Err(e) => return check("ground and thermal states", false, e.to_string()),
        };
        let p = rho.populations();
        let want = [(n + 1.0) / (2.0 * n + 1.0), n / (2.0 * n + 1.0), 0.0];
        for (a, b) in p.iter().zip(want) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max(rho.coherence_12().norm() + rho.coherence_13().norm());
    }
    check(
        "ground and thermal states",
        worst < 1e-12,
        format!("max population deviation {worst:.2e}"),
    )
}

fn two_level_response() -> Check {
    let mut atom = ModelConfig::table_one(BareFrequencyUnits::Angular).atom;
    atom.g_mu = 1.3;
    let r = DampingRates {
        gamma_12: 3.0,
        gamma_13: 1.0,
        gamma_23: 1.0,
        gamma_2d: 40.0,
        gamma_3d: 0.0,
    };
    let mut worst: f64 = 0.0;
    for (n, x) in [(0.0, 0.0), (0.5, 120.0), (2.0, -3e3)] {
        let resp = LinearResponder::new(&atom, &build_damping(&r, n), C64::new(0.0, 0.0), 0.0, 0.0)
            .respond(AtomDetunings {
                delta_a_mu: x,
                delta_a_o: 0.0,
            });
        let resp = match resp {
            Ok(v) => v,
            Err(e) => return check("two-level response", false, e.to_string()),
        };
        let (w12, _) = r.coherence_widths(n);
        let expected = C64::new(0.0, -1.3 / (2.0 * n + 1.0)) / C64::new(w12, x);
        worst = worst.max((resp[1] - expected).norm() / expected.norm());
    }
    check(
        "two-level response",
        worst < 1e-9,
        format!("max relative deviation {worst:.2e}"),
    )
}

fn density_matrix_invariants() -> Check {
    let c = ModelConfig::table_one(BareFrequencyUnits::Angular);
    let damping = build_damping(&rates(), c.n12());
    let fields = FieldState::new(C64::new(3e2, 1e2), C64::new(-20.0, 5.0));
    let model = AtomModel::new(&c.atom, &damping, fields, C64::new(4e5, -2e5), 1e5, -3e6);
    let (mut herm, mut trace, mut neg): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..21 {
        for j in 0..21 {
            let det = AtomDetunings {
                delta_a_mu: (i as f64 - 10.0) * 3e6,
                delta_a_o: (j as f64 - 10.0) * 2e8,
            };
            match steady_state(&model.liouvillian(det)) {
                Ok(rho) => {
                    herm = herm.max(rho.hermiticity_error());
                    trace = trace.max((rho.trace() - 1.0).norm());
                    neg = neg.min(rho.min_eigenvalue());
                }
                Err(e) => return check("density matrix invariants", false, e.to_string()),
            }
        }
    }
    check(
        "density matrix invariants",
        herm < 1e-12 && trace < 1e-12 && neg > -1e-12,
        format!("Hermiticity {herm:.2e}, trace {trace:.2e}, min eigenvalue {neg:.2e}"),
    )
}

fn empty_cavity_scattering() -> Check {
    let c = ModelConfig::table_one(BareFrequencyUnits::Angular);
    let s = STerms::default();
    let paper = scattering(
        &s,
        &c.cavity,
        &DriveSettings::default(),
        OutputConvention::Paper,
    );
    let std = scattering(
        &s,
        &c.cavity,
        &DriveSettings::default(),
        OutputConvention::Standard,
    );
    match (paper, std) {
        (Ok(p), Ok(q)) => {
            let want = (2.0 * 1.5 / 2.15_f64).powi(2);
            check(
                "empty-cavity scattering",
                rel(p.microwave_transmission(), want) < 1e-12
                    && p.c_ab == C64::new(0.0, 0.0)
                    && q.c_bb == p.c_bb - 1.0,
                format!("|C_bb|^2 = {:.6}", p.microwave_transmission()),
            )
        }
        (Err(e), _) | (_, Err(e)) => check("empty-cavity scattering", false, e.to_string()),
    }
}

fn dressed_small_pump_limit() -> Check {
    let settings = PeakSearchSettings::default();
    let mut worst: f64 = 0.0;
    for y in [-5e7, 3e7, 8e7] {
        let q = DegeneracyQuery {
            delta_a_o: y,
            fields: FieldState::new(C64::new(1e6, 0.0), C64::new(0.0, 0.0)),
            omega: C64::new(1e-3, 0.0),
            delta_mu: 0.0,
            delta_o: 0.0,
            g_mu: 10.0,
            g_o: 50.0,
        };
        let guess = match guess_small_pump(&q) {
            Ok(g) => g,
            Err(e) => return check("dressed small-pump limit", false, e.to_string()),
        };
        let window = SearchWindow::around(guess, 1e7, &settings);
        let roots = find_degenerate_detunings(&q, &window, &settings);
        let nearest = roots
            .iter()
            .map(|r| (r - guess).abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest / guess.abs());
    }
    check(
        "dressed small-pump limit",
        worst < 1e-2,
        format!("max relative distance from the small-pump locus {worst:.2e}"),
    )
}

pub fn run_all() -> Vec<Check> {
    vec![
        thermal_occupation(),
        microwave_atom_number(),
        input_amplitudes(),
        decay_rates(),
        ground_and_thermal_states(),
        two_level_response(),
        density_matrix_invariants(),
        empty_cavity_scattering(),
        dressed_small_pump_limit(),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
