use collshift::analysis::{string_shift, synthesize_record, FrequencyRecord, SynthesisSpec};
use collshift::lineshape::{shift_from_lineshape, LockOptions, ThermalLineshape};
use collshift::modes::{
    overlap_coefficient, overlap_coefficient_quadrature, rabi_frequency, thermal_ensemble, EnsemblePolicy,
};
use collshift::perturbative::wigner_initial_amplitudes;
use collshift::physunits::{angular_to_hz, hz_to_angular, Constants};
use collshift::spinmodel::{evolve, InteractionMode, SpinHamiltonian, SpinModel};
use collshift::tunneling::{effective_tunneling, TiltParams};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn lock_options(mode: InteractionMode) -> LockOptions {
    LockOptions { interaction: mode, ..LockOptions::default() }
}

fn evolve_model(model: &SpinModel, detuning: f64, t: f64) -> collshift::spinmodel::SpinState {
    let h = SpinHamiltonian::from_model(model, detuning, InteractionMode::ExactPairwise).unwrap();
    evolve(&h, t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequency_and_energy_round_trips(f in 1e-3f64..1e15) {
        let c = Constants::default();
        let back = angular_to_hz(hz_to_angular(f));
        prop_assert!((back - f).abs() <= 1e-12 * f);
        let e = c.hz_to_energy(f);
        prop_assert!((c.energy_to_hz(e) - f).abs() <= 1e-12 * f);
        let w = hz_to_angular(f);
        prop_assert!((c.energy_to_angular(c.angular_to_energy(w)) - w).abs() <= 1e-12 * w);
    }

    #[test]
    fn overlap_is_symmetric_and_positive(n in 0u32..=50, m in 0u32..=50) {
        let a = overlap_coefficient(n, m);
        prop_assert!(a > 0.0);
        prop_assert!((a - overlap_coefficient(m, n)).abs() <= 1e-15 * a);
    }

    #[test]
    fn rabi_decreases_in_lamb_dicke_regime(eta_z in 0.01f64..0.25, eta_y in 0.0f64..0.1) {
        let mut n = 0u32;
        while (n as f64 + 1.0) * eta_z * eta_z < 0.5 {
            prop_assert!(rabi_frequency(n + 1, 1.0, eta_y, eta_z) < rabi_frequency(n, 1.0, eta_y, eta_z));
            n += 1;
        }
    }

    #[test]
    fn evolution_is_unitary_and_conserves_number(
        rabi in prop::collection::vec(0.1f64..2.0, 2..=5),
        u in -3.0f64..3.0,
        detuning in -3.0f64..3.0,
        t in 0.0f64..20.0,
    ) {
        let n = rabi.len() as f64;
        let model = SpinModel::uniform(rabi, u).unwrap();
        let state = evolve_model(&model, detuning, t);
        prop_assert!((state.norm() - 1.0).abs() < 1e-10);
        prop_assert!((state.excited_number() + state.ground_number() - n).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_mean_u_conserves_total_spin(
        n in 2usize..=5,
        omega in 0.1f64..2.0,
        u in -3.0f64..3.0,
        detuning in -3.0f64..3.0,
        t in 0.0f64..20.0,
    ) {
        let model = SpinModel::uniform(vec![omega; n], u).unwrap();
        let s = n as f64 / 2.0;
        let state = evolve_model(&model, detuning, t);
        prop_assert!((state.total_spin_squared() - s * (s + 1.0)).abs() < 1e-8);
    }

    #[test]
    fn permuting_equal_rabi_labels_is_invisible(
        omega in 0.2f64..2.0,
        other in 0.2f64..2.0,
        u in -2.0f64..2.0,
        detuning in -2.0f64..2.0,
        t in 0.0f64..10.0,
    ) {
        let a = SpinModel::uniform(vec![omega, omega, other], u).unwrap();
        let b = SpinModel::uniform(vec![omega, other, omega], u).unwrap();
        let na = evolve_model(&a, detuning, t).excited_number();
        let nb = evolve_model(&b, detuning, t).excited_number();
        prop_assert!((na - nb).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_pair_is_single_atom_rabi_formula(
        omega in 0.1f64..2.0,
        u in -3.0f64..3.0,
        detuning in -3.0f64..3.0,
        t in 0.0f64..20.0,
    ) {
        let model = SpinModel::uniform(vec![omega, omega], u).unwrap();
        let fraction = evolve_model(&model, detuning, t).excited_number() / 2.0;
        let r2 = omega * omega + detuning * detuning;
        let closed = omega * omega / r2 * (0.5 * r2.sqrt() * t).sin().powi(2);
        prop_assert!((fraction - closed).abs() < 1e-10);
    }

    #[test]
    fn effective_tunneling_is_reduced_by_tilt(j in 1e-6f64..3.0, site in 0u32..200, omega_dy_hz in 10.0f64..2000.0) {
        let c = Constants::default();
        let tilt = TiltParams::new(hz_to_angular(omega_dy_hz), 25, c.lattice_wavelength / 2.0).unwrap();
        let eff = effective_tunneling(j, &tilt, site, &c).unwrap();
        prop_assert!(eff < j && eff > 0.0);
        let untilted = TiltParams::new(1e-12, 25, c.lattice_wavelength / 2.0).unwrap();
        prop_assert_eq!(effective_tunneling(j, &untilted, site, &c).unwrap(), j);
    }

    #[test]
    fn string_shift_annihilates_low_order_drift(
        n in 2usize..=7,
        coefficients in prop::collection::vec(-1.0f64..1.0, 6),
        shift in -2.0f64..2.0,
    ) {
        let base = synthesize_record(&SynthesisSpec::new(shift, vec![], 0.3, 200), 1).unwrap();
        // Drift of degree n−2 in the point index, scaled to stay well-conditioned.
        let drifted: Vec<_> = base
            .points()
            .iter()
            .map(|p| {
                let x = p.index as f64 / 50.0;
                let drift: f64 = coefficients[..n - 1].iter().enumerate().map(|(k, c)| c * x.powi(k as i32)).sum();
                let mut q = *p;
                q.frequency_hz += drift;
                q
            })
            .collect();
        let drifted = FrequencyRecord::new(drifted).unwrap();
        let plain = string_shift(&base, n).unwrap();
        let moved = string_shift(&drifted, n).unwrap();
        let scale = plain.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in plain.iter().zip(&moved) {
            prop_assert!((a - b).abs() <= 1e-9 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn wigner_amplitudes_are_normalized(n in 1usize..=12, theta in 0.0f64..std::f64::consts::PI) {
        let amps = wigner_initial_amplitudes(n, theta).unwrap();
        prop_assert_eq!(amps.len(), n + 1);
        let norm: f64 = amps.iter().map(|a| a * a).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_swap_negates_strings(n in 2usize..=6, seed in 0u64..1000) {
        let record = synthesize_record(&SynthesisSpec::new(0.7, vec![1.0, 0.01], 1.0, 120), seed).unwrap();
        let a = string_shift(&record, n).unwrap();
        let b = string_shift(&record.with_swapped_density(), n).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(*x, -*y);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn pair_spectrum_is_rabi_doublet_zero_and_u(
        omega in 0.01f64..5.0,
        u in -5.0f64..5.0,
        detuning in -5.0f64..5.0,
    ) {
        let model = SpinModel::uniform(vec![omega, omega], u).unwrap();
        let mut got: Vec<f64> = SymmetricEigen::new(model.hamiltonian(detuning).unwrap()).eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let r = omega.hypot(detuning);
        let mut want = vec![-r, 0.0, r, u];
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10, "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn homogeneous_drive_has_no_shift(
        n in 2usize..=4,
        omega in 0.5f64..2.0,
        u_over_omega in -100.0f64..100.0,
        target in 0.1f64..0.4,
    ) {
        let model = SpinModel::uniform(vec![omega; n], u_over_omega * omega).unwrap();
        let t = std::f64::consts::PI / omega;
        let shape = ThermalLineshape::from_models(vec![(model, 1.0)], t, InteractionMode::MeanU).unwrap();
        let r = shift_from_lineshape(&shape, target, &lock_options(InteractionMode::MeanU), &Constants::default()).unwrap();
        prop_assert!(r.midpoint.abs() < 1e-8 * omega, "midpoint {}", r.midpoint);
    }

    #[test]
    fn shift_is_linear_in_occupied_fraction(fraction in 0.01f64..1.0, spread in 0.01f64..0.3, u in 0.1f64..5.0) {
        let model = SpinModel::uniform(vec![1.0 + spread, 1.0 - spread], u).unwrap();
        let shape = ThermalLineshape::from_models(vec![(model, 1.0)], std::f64::consts::PI, InteractionMode::ExactPairwise).unwrap();
        let c = Constants::default();
        let full = shift_from_lineshape(&shape, 0.3, &LockOptions::default(), &c).unwrap();
        let opts = LockOptions { occupied_fraction: fraction, ..LockOptions::default() };
        let part = shift_from_lineshape(&shape, 0.3, &opts, &c).unwrap();
        prop_assert_eq!(part.midpoint, full.midpoint);
        prop_assert!((part.shift - fraction * full.midpoint).abs() <= 1e-15 * full.midpoint.abs());
    }
}

#[test]
fn quadrature_is_converged_up_to_fifty_quanta() {
    for n in (0..=50).step_by(5) {
        for m in (0..=50).step_by(7) {
            let nodes = (n + m) as usize + 2;
            let a = overlap_coefficient_quadrature(n, m, nodes).unwrap();
            let b = overlap_coefficient_quadrature(n, m, 2 * nodes).unwrap();
            assert!((a - b).abs() < 1e-10, "I({n},{m}): {a} vs {b}");
            assert!((a - overlap_coefficient(n, m)).abs() < 1e-10 * a.max(1.0));
        }
    }
}

#[test]
fn sampled_pair_ensemble_matches_enumeration() {
    let c = Constants::default();
    let omega_z = hz_to_angular(700.0);
    let exact = thermal_ensemble(2, 6.5e-6, omega_z, EnsemblePolicy::Enumeration { coverage: 0.999 }, 0, &c).unwrap();
    let sampled = thermal_ensemble(2, 6.5e-6, omega_z, EnsemblePolicy::Sampling { samples: 4000 }, 17, &c).unwrap();
    let pair = |m: &[u32]| overlap_coefficient(m[0], m[1]);
    let want = exact.weighted_mean(|cfg| pair(cfg.modes()));
    let values: Vec<f64> = sampled.configs().iter().map(|cfg| pair(cfg.modes())).collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    assert!((mean - want).abs() < 3.0 * sd / k.sqrt(), "sampled {mean} vs enumerated {want}");
}

#[test]
fn halving_scan_step_keeps_shift() {
    let c = Constants::default();
    let omega_z = hz_to_angular(700.0);
    let ensemble = thermal_ensemble(2, 6.5e-6, omega_z, EnsemblePolicy::Enumeration { coverage: 0.95 }, 0, &c).unwrap();
    let geometry = collshift::physunits::TrapGeometry::new(
        &c,
        hz_to_angular(80e3),
        hz_to_angular(80e3),
        omega_z,
        0.0,
        0.06,
        0.0,
    )
    .unwrap();
    let drive = collshift::spinmodel::DriveParams::pi_pulse(0.08, 0.3).unwrap();
    let geometry = geometry.with_interaction(drive.omega0b()).unwrap();
    let coarse = LockOptions { scan_step: 0.05, ..LockOptions::default() };
    let fine = LockOptions { scan_step: 0.025, ..LockOptions::default() };
    let a = collshift::lineshape::clock_shift(&ensemble, &drive, &geometry, &coarse, &c).unwrap();
    let b = collshift::lineshape::clock_shift(&ensemble, &drive, &geometry, &fine, &c).unwrap();
    assert!(((a.shift - b.shift) / b.shift).abs() < 0.01, "{} vs {}", a.shift, b.shift);
}
