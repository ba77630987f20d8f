mod common;

use common::{max_abs_diff, rng, to_nalgebra, Draw};
use proptest::prelude::*;
use upconv_core::atom::{
    build_damping, build_liouvillian, hamiltonian, steady_state, steady_state_with_diagnostics,
    DampingRates,
};
use upconv_core::linalg::{vectorize, Mat3};
use upconv_core::linear::{
    decompose, linear_response, linear_sterms, scattering, LinearResponder, STerms,
};
use upconv_core::params::{BareFrequencyUnits, DriveSettings, ModelConfig, OutputConvention};
use upconv_core::{AtomDetunings, FieldState, C64};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn steady_state_is_a_density_matrix(seed in any::<u64>(), scale in 1e-2f64..1e8) {
        let d = Draw::random(&mut rng(seed), scale);
        let s = steady_state_with_diagnostics(&d.liouvillian()).unwrap();
        prop_assert!(!s.ill_conditioned);
        prop_assert!(s.rho.hermiticity_error() < 1e-10);
        prop_assert!((s.rho.trace() - 1.0).norm() < 1e-10);
        prop_assert!(s.rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn steady_state_is_in_the_kernel(seed in any::<u64>()) {
        let d = Draw::random(&mut rng(seed), 1e4);
        let l = d.liouvillian();
        let rho = steady_state(&l).unwrap();
        let r = l.apply(&rho.to_vector());
        let scale = l.matrix().max_abs();
        prop_assert!(r.iter().all(|z| z.norm() < 1e-11 * scale));
    }

    #[test]
    fn steady_state_matches_independent_null_vector(seed in any::<u64>()) {
        let d = Draw::random(&mut rng(seed), 1.0);
        let l = d.liouvillian();
        let rho = steady_state(&l).unwrap();
        let svd = to_nalgebra(l.matrix()).svd(false, true);
        let v_t = svd.v_t.unwrap();
        let k = (0..9)
            .min_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap())
            .unwrap();
        let null = v_t.row(k).map(|z| z.conj());
        let tr = null[0] + null[4] + null[8];
        for i in 0..9 {
            let z = null[i] / tr;
            let ours = rho.to_vector()[i];
            prop_assert!((C64::new(z.re, z.im) - ours).norm() < 1e-9, "entry {i}");
        }
    }

    #[test]
    fn phase_covariance(seed in any::<u64>(), t1 in 0.0f64..6.3, t2 in 0.0f64..6.3) {
        let d = Draw::random(&mut rng(seed), 1e3);
        let rho = steady_state(&d.liouvillian()).unwrap();
        let e = |t: f64| C64::from_polar(1.0, t);
        let rotated = Draw {
            fields: FieldState::new(d.fields.beta * e(t1), d.fields.alpha * e(t2)),
            pump: d.pump * e(t2 - t1),
            ..d
        };
        let rho2 = steady_state(&rotated.liouvillian()).unwrap();
        let u = Mat3::from_diagonal([C64::new(1.0, 0.0), e(t1), e(t2)]);
        let expected = u * rho.0 * u.adjoint();
        prop_assert!(max_abs_diff(&rho2.0, &expected) < 1e-10);
    }

    #[test]
    fn first_order_response_solves_its_equation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = Draw::random(&mut r, 1e5);
        let atom = {
            let mut a = ModelConfig::table_one(BareFrequencyUnits::Angular).atom;
            a.g_mu = d.g_mu;
            a.g_o = d.g_o;
            a
        };
        let drive = DriveSettings { omega: d.pump, ..DriveSettings::default() };
        let det = AtomDetunings { delta_a_mu: d.level2, delta_a_o: d.level3 };
        let dec = decompose(&atom, &d.damping(), d.pump, det, &drive);
        let lr = linear_response(&dec).unwrap();
        let r0 = lr.rho0.to_vector();
        let scale = dec.l0.max_abs();
        for (lx, rx) in [
            (dec.l_alpha, lr.rho_alpha),
            (dec.l_alpha_conj, lr.rho_alpha_conj),
            (dec.l_beta, lr.rho_beta),
            (dec.l_beta_conj, lr.rho_beta_conj),
        ] {
            let a = dec.l0.mul_vec(&vectorize(&rx));
            let b = lx.mul_vec(&r0);
            for i in 0..9 {
                prop_assert!((a[i] + b[i]).norm() < 1e-9 * scale.max(lx.max_abs()));
            }
            prop_assert!(rx.trace().norm() < 1e-12 * rx.max_abs().max(1e-300));
        }
        // conjugate channels are the Hermitian conjugates
        prop_assert!(max_abs_diff(&lr.rho_alpha_conj, &lr.rho_alpha.adjoint()) < 1e-9 * lr.rho_alpha.max_abs());

        let fast = LinearResponder::new(&atom, &d.damping(), d.pump, 0.0, 0.0).respond(det).unwrap();
        let slow = [
            lr.rho_alpha[(1, 0)],
            lr.rho_beta[(1, 0)],
            lr.rho_alpha[(2, 0)],
            lr.rho_beta[(2, 0)],
        ];
        for (a, b) in fast.iter().zip(slow) {
            prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1e-12));
        }
    }

    #[test]
    fn two_level_response_closed_form(
        g12 in 1e-2f64..1e4, g2d in 0.0f64..1e4, n in 0.0f64..5.0, x in -1e4f64..1e4,
    ) {
        let rates = DampingRates { gamma_12: g12, gamma_13: 1.0, gamma_23: 1.0, gamma_2d: g2d, gamma_3d: 0.0 };
        let mut atom = ModelConfig::table_one(BareFrequencyUnits::Angular).atom;
        atom.g_mu = 1.3;
        let resp = LinearResponder::new(&atom, &build_damping(&rates, n), C64::new(0.0, 0.0), 0.0, 0.0)
            .respond(AtomDetunings { delta_a_mu: x, delta_a_o: 0.0 })
            .unwrap();
        let (w12, _) = rates.coherence_widths(n);
        let inversion = 1.0 / (2.0 * n + 1.0);
        let expected = C64::new(0.0, -1.3 * inversion) / C64::new(w12, x);
        prop_assert!((resp[1] - expected).norm() < 1e-9 * expected.norm());
        prop_assert!(resp[0].norm() < 1e-12 && resp[3].norm() < 1e-12);
    }

    #[test]
    fn scattering_is_reciprocal_in_the_cross_terms(
        re in -1e6f64..1e6, im in 0.0f64..1e6, dmu in -1e7f64..1e7, d_o in -1e7f64..1e7,
    ) {
        // equal cross terms give equal conversion in both directions
        let cav = ModelConfig::table_one(BareFrequencyUnits::Angular).cavity;
        let z = C64::new(re, im);
        let s = STerms { s_alpha_12: z, s_beta_12: C64::new(1e5, 2e5), s_alpha_13: C64::new(-3e5, 1e5), s_beta_13: z };
        let drive = DriveSettings { delta_mu: dmu, delta_o: d_o, ..DriveSettings::default() };
        let c = scattering(&s, &cav, &drive, OutputConvention::Paper).unwrap();
        prop_assert!((c.c_ab - c.c_ba).norm() <= 1e-14 * c.c_ab.norm().max(1e-300));
        let std = scattering(&s, &cav, &drive, OutputConvention::Standard).unwrap();
        prop_assert_eq!(std.c_ab, c.c_ab);
        prop_assert_eq!(std.c_bb, c.c_bb - 1.0);
    }
}

#[test]
fn hamiltonian_is_hermitian_for_any_draw() {
    let mut r = rng(7);
    for _ in 0..100 {
        let d = Draw::random(&mut r, 10.0);
        let h = hamiltonian(d.fields, d.pump, d.level2, d.level3, d.g_mu, d.g_o);
        assert_eq!(h.hermiticity_error(), 0.0);
        let l = build_liouvillian(&h, &d.damping());
        // trace preservation: the population rows sum to zero column-wise
        for j in 0..9 {
            let s = l.matrix().0[0][j] + l.matrix().0[4][j] + l.matrix().0[8][j];
            assert!(s.norm() < 1e-12 * l.matrix().max_abs());
        }
    }
}

#[test]
fn ensemble_terms_are_deterministic() {
    let mut c = ModelConfig::table_one(BareFrequencyUnits::Cyclic);
    c.set_pump_power(0.1).unwrap();
    c.set_atom_cavity_detunings(1.2e8, 1.4e10);
    c.numerics.quadrature.base_panels_o = 2;
    c.numerics.quadrature.base_panels_mu = 2;
    let a = linear_sterms(&c).unwrap();
    let b = linear_sterms(&c).unwrap();
    assert_eq!(a, b);
}
