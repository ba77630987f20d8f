//! End-to-end checks at the device parameters with the default numerics.

use rand::Rng;
use upconv_core::ensemble::integrate_nonlinear_sums;
use upconv_core::linear::{conversion_efficiency, linear_sterms, scattering};
use upconv_core::nonlinear::{
    field_residual, output_fields, solve_fields, solve_fields_from, FieldSolverSettings,
};
use upconv_core::optimizer::{
    optimize, pulling_guess, scan_detunings, sweep, OperatingPoint, OptimizationProblem,
    SweepVariable, Variable,
};
use upconv_core::params::{BareFrequencyUnits, ModelConfig};
use upconv_core::{FieldState, C64};

mod common;

fn device() -> ModelConfig {
    let mut c = ModelConfig::table_one(BareFrequencyUnits::Cyclic);
    c.set_optical_q(1e8).unwrap();
    c.set_pump_power(0.1).unwrap();
    c
}

/// A high-efficiency operating point of `device()`.
fn operating_point() -> ModelConfig {
    let p = OperatingPoint {
        atom_drive_mu: 2.11e8,
        atom_drive_o: 1.58e10,
        delta_mu: -1.886e9,
        delta_o: -6.669e10,
        gamma_mu_c: 4.08e8,
        gamma_o_c: 1.225e9,
    };
    p.apply(&device())
}

fn with_beta(c: &ModelConfig, b: f64) -> ModelConfig {
    let mut d = *c;
    d.drive.beta_in = C64::new(b, 0.0);
    d
}

#[test]
fn weak_input_matches_linear_conversion() {
    let c = operating_point();
    let s = linear_sterms(&c).unwrap();
    let lin = scattering(&s, &c.cavity, &c.drive, c.convention)
        .unwrap()
        .c_ab
        .norm();
    assert!(lin > 0.9);
    let d = with_beta(&c, 1e4);
    let sol = solve_fields(&d).unwrap();
    let (_, a_out) = output_fields(sol.fields, &d.cavity, &d.drive, d.convention);
    assert!((a_out.norm() / 1e4 - lin).abs() < 0.01 * lin);
}

#[test]
fn saturation_lowers_efficiency() {
    let c = operating_point();
    let lin = conversion_efficiency(&c).unwrap();
    let mut prev = lin;
    for b in [3e8, 1e9] {
        let d = with_beta(&c, b);
        let sol = solve_fields(&d).unwrap();
        let (_, a_out) = output_fields(sol.fields, &d.cavity, &d.drive, d.convention);
        let eff = (a_out.norm() / b).powi(2);
        assert!(eff < prev, "{b:e}: {eff} vs {prev}");
        prev = eff;
    }
}

#[test]
fn fixed_point_is_unique_from_random_starts() {
    let d = with_beta(&operating_point(), 1e6);
    let reference = solve_fields(&d).unwrap().fields;
    let mut r = common::rng(11);
    for _ in 0..3 {
        let scale = reference.norm();
        let start = FieldState::new(
            reference.beta + C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * scale,
            reference.alpha + C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * scale,
        );
        let sol = solve_fields_from(
            &d.cavity,
            &d.drive,
            &FieldSolverSettings::default(),
            Some(start),
            |f| integrate_nonlinear_sums(&d, f),
        )
        .unwrap();
        let diff = FieldState::new(
            sol.fields.beta - reference.beta,
            sol.fields.alpha - reference.alpha,
        );
        assert!(diff.norm() < 1e-6 * scale);
    }
}

#[test]
fn linear_regime_scales_with_input() {
    let c = operating_point();
    let one = solve_fields(&with_beta(&c, 1e5)).unwrap().fields;
    let two = solve_fields(&with_beta(&c, 2e5)).unwrap().fields;
    assert!((two.beta - one.beta * 2.0).norm() < 1e-3 * two.beta.norm());
    assert!((two.alpha - one.alpha * 2.0).norm() < 1e-3 * two.alpha.norm());
}

#[test]
fn residual_is_reproduced_independently() {
    let d = with_beta(&operating_point(), 1e6);
    let sol = solve_fields(&d).unwrap();
    let r = field_residual(&d, sol.fields).unwrap();
    assert!(r <= d.numerics.fields.rel_tol, "{r:e}");
}

#[test]
fn zero_inputs_zero_fields() {
    let sol = solve_fields(&operating_point()).unwrap();
    assert_eq!(sol.fields, FieldState::ZERO);
}

#[test]
fn pulling_guess_fixture() {
    let c = ModelConfig::table_one(BareFrequencyUnits::Angular);
    let (d_mu, _) =
        pulling_guess(2.0 * std::f64::consts::PI * 10e6, 1e9, &c.ensemble, &c.atom).unwrap();
    // effective microwave atom number 0.8337e16 at 100 mK
    assert!(
        (d_mu / -1.434_970_225_175_736e8 - 1.0).abs() < 1e-12,
        "{d_mu}"
    );
}

#[test]
fn scan_edge_cases() {
    let c = device();
    assert!(scan_detunings(&c, &[], &[1e9]).is_empty());
    assert!(scan_detunings(&c, &[1e8], &[]).is_empty());
    let pts = scan_detunings(&c, &[1e8, 2e8], &[1.4e10, 1.6e10]);
    assert_eq!(pts.len(), 4);
    let max = pts
        .iter()
        .map(|p| p.efficiency)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(pts.iter().all(|p| p.efficiency <= max && p.error.is_none()));
    // zero detuning has no pulling guess and falls back to the bare cavities
    let z = scan_detunings(&c, &[0.0], &[1.4e10]);
    assert_eq!((z[0].delta_mu, z[0].delta_o), (0.0, 0.0));
}

#[test]
fn optimizer_contract() {
    let problem = OptimizationProblem::new(&device());
    let r = optimize(&problem).unwrap();
    assert!(r.efficiency > 0.8);
    assert!(r.efficiency >= r.seed_efficiency);
    // re-evaluating at the argmax reproduces the reported value exactly
    assert_eq!(
        conversion_efficiency(&r.point.apply(&problem.config)).unwrap(),
        r.efficiency
    );
    let probe = upconv_core::optimizer::stencil_probe(&problem, &r, 1e-3).unwrap();
    assert!(probe <= 1e-6, "{probe:e}");

    // the order in which variables are listed does not matter
    let mut shuffled = problem.clone();
    shuffled.free.reverse();
    let r2 = optimize(&shuffled).unwrap();
    assert_eq!(r2.efficiency, r.efficiency);
    assert_eq!(r2.point, r.point);

    let rows = sweep(&problem, SweepVariable::PumpPower, &[0.1], true);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].result.as_ref().unwrap().efficiency, r.efficiency);
}

#[test]
fn restricted_problem_keeps_fixed_variables() {
    let c = operating_point();
    let problem =
        OptimizationProblem::new(&c).with_free(&[Variable::DriveCavityMu, Variable::DriveCavityO]);
    let r = optimize(&problem).unwrap();
    let start = OperatingPoint::from_config(&problem.config);
    assert_eq!(r.point.gamma_mu_c, start.gamma_mu_c);
    assert_eq!(r.point.atom_drive_o, start.atom_drive_o);
    assert!(r.efficiency >= conversion_efficiency(&problem.config).unwrap() - 1e-12);
}

#[test]
fn warm_and_cold_sweeps_agree() {
    let problem = OptimizationProblem::new(&device());
    let values = [0.1, 0.4, 1.0];
    let warm = sweep(&problem, SweepVariable::Temperature, &values, true);
    let cold = sweep(&problem, SweepVariable::Temperature, &values, false);
    for (w, c) in warm.iter().zip(&cold) {
        let (w, c) = (w.result.as_ref().unwrap(), c.result.as_ref().unwrap());
        assert!(
            (w.efficiency - c.efficiency).abs() < 1e-3,
            "{} vs {}",
            w.efficiency,
            c.efficiency
        );
    }
}
