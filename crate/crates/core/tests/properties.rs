use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use proptest::prelude::*;

use adiascope::{
    analytic_spin_frame, cp_positions, cp_scenario, decompose, delta_u_err, distance, drive_scenario,
    eigenphases, gamma_objective, modulation_trace, spectral_frame_at, sweep_cp, ComplexMatrix, CpScenario,
    DecompositionSettings, DriveKind, DriveScenario, FnPath, HamiltonianModel, IntegratorSettings,
    PulseRotation, QuadratureSpec, RunSettings, Scenario, SpinHalfFieldModel, UnitaryMatrix, C64,
    DEFAULT_GAMMA,
};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5EED),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Spin in a field `B(t) = b0 + b1 cos(t)` turning at rate `omega`.
fn spin_drive(theta: f64, b0: f64, b1: f64, omega: f64, span: (f64, f64)) -> Scenario {
    let path = FnPath::new(span.0, span.1, move |t| vec![b0 + b1 * t.cos(), omega * t])
        .unwrap()
        .with_velocity(move |t| vec![-b1 * t.sin(), omega]);
    Scenario::continuous(Arc::new(SpinHalfFieldModel::new(theta)), Arc::new(path)).unwrap()
}

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

fn eigen_residual(model: &dyn HamiltonianModel, r: &[f64], energy: f64, v: &[C64]) -> f64 {
    let h = model.hamiltonian(r);
    let hv = h.matrix().mul_vec(v);
    hv.iter().zip(v).map(|(x, y)| (x - y * energy).norm_sqr()).sum::<f64>().sqrt() / h.matrix().frobenius_norm()
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI - 1e-12 {
        y - TAU
    } else {
        y
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn frames_solve_the_eigenproblem(theta in 0.05..PI - 0.05, phi in -10.0f64..10.0, b in 0.1f64..5.0) {
        let model = SpinHalfFieldModel::new(theta);
        let path = FnPath::new(0.0, 1.0, move |_| vec![b, phi]).unwrap();
        let numeric = spectral_frame_at(&model, &path, 0.5, None).unwrap();
        let analytic = model.analytic_frame(&[b, phi]).unwrap();
        for k in 0..2 {
            prop_assert!(eigen_residual(&model, &[b, phi], numeric.energies[k], &numeric.vector(k)) <= 1e-10);
            prop_assert!(eigen_residual(&model, &[b, phi], analytic.energies[k], &analytic.vector(k)) <= 1e-10);
            let m = (0..2)
                .min_by(|&i, &j| {
                    (numeric.energies[i] - analytic.energies[k]).abs().total_cmp(&(numeric.energies[j] - analytic.energies[k]).abs())
                })
                .unwrap();
            prop_assert!((overlap(&analytic.vector(k), &numeric.vector(m)) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn labels_track_the_field_through_a_crossing(theta in 0.2..PI - 0.2, b1 in 1.5f64..3.0) {
        // B(s) = 1 - b1 cos(s) changes sign twice, so the energy order swaps
        let model = SpinHalfFieldModel::new(theta);
        let path = FnPath::new(0.0, TAU, move |s| vec![1.0 - b1 * s.cos() + 1e-3, 0.7 * s]).unwrap();
        let mut prev = spectral_frame_at(&model, &path, 0.0, None).unwrap();
        let start = analytic_spin_frame(theta, 0.0);
        let tracked: Vec<usize> = (0..2)
            .map(|k| (0..2).find(|&a| overlap(&start.vector(a), &prev.vector(k)) > 0.99).unwrap())
            .collect();
        for i in 1..=400 {
            let s = TAU * i as f64 / 400.0;
            let frame = spectral_frame_at(&model, &path, s, Some(&prev)).unwrap();
            let reference = analytic_spin_frame(theta, 0.7 * s);
            for (k, &label) in tracked.iter().enumerate() {
                prop_assert!(overlap(&prev.vector(k), &frame.vector(k)) > 0.9, "jump at s = {}", s);
                prop_assert!((overlap(&reference.vector(label), &frame.vector(k)) - 1.0).abs() < 1e-9);
            }
            prev = frame;
        }
    }

    #[test]
    fn propagation_is_unitary_and_composes(
        theta in 0.1..PI - 0.1,
        b0 in -3.0f64..3.0,
        b1 in 0.0f64..3.0,
        omega in 0.5f64..6.0,
        t in 0.5f64..2.0,
        split in 0.2f64..0.8,
    ) {
        let settings = IntegratorSettings::default();
        let whole = spin_drive(theta, b0, b1, omega, (0.0, t)).propagate(&settings).unwrap();
        let first = spin_drive(theta, b0, b1, omega, (0.0, split * t)).propagate(&settings).unwrap();
        let second = spin_drive(theta, b0, b1, omega, (split * t, t)).propagate(&settings).unwrap();
        prop_assert!(whole.u_total.matrix().unitary_deviation() <= 1e-10);
        let composed = second.u_total.compose(&first.u_total).unwrap();
        prop_assert!(distance(composed.matrix(), whole.u_total.matrix()).unwrap() <= 1e-7);
    }

    #[test]
    fn halving_the_step_shrinks_the_error(theta in 0.1..PI - 0.1, b0 in 2.0f64..20.0, b1 in 0.0f64..10.0) {
        let run = |slices| {
            let s = IntegratorSettings { slices_per_period: slices, tolerance: 1.0, max_doublings: 0 };
            spin_drive(theta, b0, b1, 3.0, (0.0, 2.0)).propagate(&s).unwrap().self_difference
        };
        let (coarse, fine) = (run(16), run(32));
        prop_assume!(coarse > 1e-10);
        prop_assert!(fine * 3.0 <= coarse, "{} then {}", coarse, fine);
    }

    #[test]
    fn cp_decomposition_reconstructs(theta in 0.1..PI - 0.1, n in 1usize..12, phi_t in 1.0f64..TAU) {
        let scenario = cp_scenario(&CpScenario { phi_t, ..CpScenario::new(theta, n) }).unwrap();
        let evolution = scenario.propagate(&IntegratorSettings::default()).unwrap();
        let settings = DecompositionSettings { cross_validate: true, ..Default::default() };
        let d = decompose(&scenario, &evolution, &settings).unwrap();
        prop_assert!(d.reconstruction_residual <= 1e-8);
        prop_assert!(d.cross_difference.unwrap() <= 1e-6);
        for u in [&d.u_dyn, &d.u_g1, &d.u_g2, &d.u_geo, &d.u_err] {
            prop_assert!(u.matrix().unitary_deviation() <= 1e-10);
        }
    }

    #[test]
    fn drive_decomposition_reconstructs(theta in 0.2..PI - 0.2, b0 in 0.5f64..4.0, omega in 1.0f64..6.0) {
        let scenario = spin_drive(theta, b0, 0.0, omega, (0.0, 1.0));
        let evolution = scenario.propagate(&IntegratorSettings::default()).unwrap();
        let settings = DecompositionSettings { cross_validate: true, ..Default::default() };
        let d = decompose(&scenario, &evolution, &settings).unwrap();
        prop_assert!(d.reconstruction_residual <= 1e-8);
        prop_assert!(d.cross_difference.unwrap() <= 1e-6);
    }

    #[test]
    fn circle_geometric_phase(theta in 0.05..PI - 0.05) {
        let path = FnPath::new(0.0, TAU, |s| vec![1.0, s]).unwrap().with_velocity(|_| vec![0.0, 1.0]);
        let scenario = Scenario::continuous(Arc::new(SpinHalfFieldModel::new(theta)), Arc::new(path)).unwrap();
        let evolution = scenario.propagate(&IntegratorSettings::default()).unwrap();
        let d = decompose(&scenario, &evolution, &DecompositionSettings::default()).unwrap();
        let mut got: Vec<f64> = eigenphases(&d.u_geo).unwrap().into_iter().map(wrap).collect();
        let c = PI * theta.cos() - PI;
        let mut expected = vec![wrap(c), wrap(-c)];
        got.sort_by(f64::total_cmp);
        expected.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expected) {
            prop_assert!((g - e).abs() <= 1e-8, "{:?} vs {:?}", got, expected);
        }
    }

    #[test]
    fn modulation_has_unit_modulus(theta in 0.1..PI - 0.1, b0 in -3.0f64..3.0, b1 in 0.0f64..3.0) {
        let trace = modulation_trace(&spin_drive(theta, b0, b1, 2.0, (0.0, 3.0)), (0, 1), 257).unwrap();
        for p in &trace.samples {
            prop_assert!((p.value.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn balanced_pulses_modulate_by_sign(theta in 0.1..PI - 0.1, n in 1usize..20) {
        let trace = modulation_trace(&cp_scenario(&CpScenario::new(theta, n)).unwrap(), (0, 1), 301).unwrap();
        for p in &trace.samples {
            let re = p.value.re;
            prop_assert!(p.value.im.abs() <= 1e-12 && (re.abs() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn averaged_error_is_bounded(re in -3.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, phase in 0.0..TAU) {
        let norm = (x * x + y * y + z * z).sqrt().max(1e-9);
        let (s, c) = re.sin_cos();
        let (nx, ny, nz) = (x / norm, y / norm, z / norm);
        let g = C64::from_polar(1.0, phase);
        let i = C64::i();
        let m = ComplexMatrix::from_rows(&[
            vec![g * (c - i * s * nz), g * (-i * s * C64::new(nx, -ny))],
            vec![g * (-i * s * C64::new(nx, ny)), g * (c + i * s * nz)],
        ])
        .unwrap();
        let v = delta_u_err(&UnitaryMatrix::new(m).unwrap(), &QuadratureSpec::default()).unwrap().value;
        prop_assert!((0.0..=2.0 + 1e-12).contains(&v));
    }

    #[test]
    fn global_phase_gives_chord_length(delta in -PI..PI) {
        let u = UnitaryMatrix::new(ComplexMatrix::identity(2).scale(C64::from_polar(1.0, delta))).unwrap();
        let v = delta_u_err(&u, &QuadratureSpec::default()).unwrap().value;
        prop_assert!((v - 2.0 * (delta / 2.0).sin().abs()).abs() <= 1e-12);
    }

    #[test]
    fn cp_positions_are_symmetric(phi_0 in -5.0f64..5.0, len in 0.0f64..10.0, n in 1usize..80) {
        let p = cp_positions(phi_0, phi_0 + len, n);
        let mid = phi_0 + len / 2.0;
        for k in 0..n {
            prop_assert!(((p[k] - mid) + (p[n - 1 - k] - mid)).abs() <= 1e-12);
        }
    }

    #[test]
    fn even_sequences_have_no_dynamic_factor(theta in 0.1..PI - 0.1, half in 1usize..16) {
        let scenario = cp_scenario(&CpScenario::new(theta, 2 * half)).unwrap();
        let evolution = scenario.propagate(&IntegratorSettings::default()).unwrap();
        prop_assert!(evolution.final_phases().iter().all(|&p| p == 0.0));
        let d = decompose(&scenario, &evolution, &DecompositionSettings::default()).unwrap();
        prop_assert!(distance(d.u_dyn.matrix(), &ComplexMatrix::identity(2)).unwrap() <= 1e-15);
    }

    #[test]
    fn equatorial_sequences_have_no_error(n in 1usize..=64) {
        let scenario = cp_scenario(&CpScenario::new(PI / 2.0, n)).unwrap();
        let evolution = scenario.propagate(&IntegratorSettings::default()).unwrap();
        let d = decompose(&scenario, &evolution, &DecompositionSettings::default()).unwrap();
        prop_assert!(distance(d.u_err.matrix(), &ComplexMatrix::identity(2)).unwrap() <= 1e-10);
    }

    #[test]
    fn gamma_root_is_scale_free(big_omega in 0.1f64..100.0) {
        let v = gamma_objective(DEFAULT_GAMMA, big_omega).unwrap();
        prop_assert!(v.norm() * big_omega < 1e-9);
        let off = gamma_objective(2.0, big_omega).unwrap().norm() * big_omega;
        let reference = gamma_objective(2.0, 1.0).unwrap().norm();
        prop_assert!((off - reference).abs() <= 1e-9);
    }
}

#[test]
fn sweep_rows_are_sorted_and_reconstruct() {
    let ns = [7, 2, 5, 3];
    let sweep = sweep_cp(0.8, 0.0, TAU, &ns, PulseRotation::HalfTurn, &RunSettings::default()).unwrap();
    let vars: Vec<f64> = sweep.rows.iter().map(|r| r.sweep_var).collect();
    assert_eq!(vars, [2.0, 3.0, 5.0, 7.0]);
    assert!(sweep.rows.iter().all(|r| r.residual <= 1e-8));
}

#[test]
fn constant_drive_approaches_the_adiabatic_limit() {
    let mut first = None;
    let mut last = f64::INFINITY;
    for nprime in [5.0, 10.0, 20.0, 40.0] {
        let scenario = drive_scenario(&DriveScenario::with_nprime(DriveKind::BConst, nprime, PI / 2.0)).unwrap();
        let evolution = scenario.propagate(&IntegratorSettings::default()).unwrap();
        let settings = DecompositionSettings { cross_validate: true, ..Default::default() };
        let d = decompose(&scenario, &evolution, &settings).unwrap();
        let err = distance(d.u_err_direct.unwrap().matrix(), &ComplexMatrix::identity(2)).unwrap();
        assert!(err < last, "N' = {nprime}: {err} after {last}");
        first.get_or_insert(err);
        last = err;
    }
    // eight times the frequency, roughly an eighth of the error
    let first = first.unwrap();
    assert!(last < first / 4.0, "{first} then {last}");
}
