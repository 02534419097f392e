//! Acceptance report: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use collshift::analysis::{
    allan_deviation, analyze, string_shift, synthesize_record, AnalysisOptions, Protocol, ShiftEstimate, SynthesisSpec,
};
use collshift::lineshape::{clock_shift, shift_from_lineshape, LockOptions, ShiftResult, ThermalLineshape};
use collshift::modes::{mean_interaction, thermal_ensemble, EnsemblePolicy, ThermalEnsemble};
use collshift::perturbative::{power_law_fit, shift_second_order, zero_order_lock_point, CollectiveBasisParams};
use collshift::physunits::{hz_to_angular, Constants, TrapGeometry};
use collshift::spinmodel::{DriveParams, InteractionMode, SpinHamiltonian, SpinModel};
use collshift::tunneling::{
    band_structure, thermal_effective_tunneling, thermal_tunneling, BandWeighting, TiltParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id}: {detail} [{:.1} s]", started.elapsed().as_secs_f64());
    }
}

/// Reference conditions: N = 2, T_Z = 6.5 μK, ω_Z = 2π·700 Hz, η_Z = 0.06, π-pulse of 80 ms, 30% lock.
struct ReferenceSetup {
    constants: Constants,
    ensemble: ThermalEnsemble,
    geometry: TrapGeometry,
    drive: DriveParams,
    options: LockOptions,
}

impl ReferenceSetup {
    fn new() -> Self {
        let constants = Constants::default();
        let omega_z = hz_to_angular(700.0);
        let ensemble =
            thermal_ensemble(2, 6.5e-6, omega_z, EnsemblePolicy::Enumeration { coverage: 0.999 }, 0, &constants)
                .expect("pair ensemble");
        let geometry = TrapGeometry::new(&constants, hz_to_angular(80e3), hz_to_angular(80e3), omega_z, 0.0, 0.06, 0.0)
            .expect("trap");
        let drive = DriveParams::pi_pulse(0.08, 0.3).expect("drive");
        let options = LockOptions { occupied_fraction: 1.0, ..LockOptions::default() };
        Self { constants, ensemble, geometry, drive, options }
    }

    fn omega0(&self) -> f64 {
        self.drive.omega0b()
    }

    fn shift(&self, u: f64, eta_z: f64, drive: &DriveParams) -> collshift::Result<ShiftResult> {
        let geometry = self.geometry.with_eta_z(eta_z)?.with_interaction(u)?;
        clock_shift(&self.ensemble, drive, &geometry, &self.options, &self.constants)
    }

    fn shift_at(&self, u_over_omega0: f64) -> collshift::Result<f64> {
        Ok(self.shift(u_over_omega0 * self.omega0(), self.geometry.eta_z(), &self.drive)?.shift)
    }
}

fn slope(points: &[(f64, f64)]) -> Result<f64, String> {
    power_law_fit(points).map(|(e, _)| e).map_err(|e| format!("{} ({e})", e.name()))
}

fn criterion_1(report: &mut Report) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut error = None;
    for _ in 0..40 {
        let n = rng.random_range(2..=4);
        let omega = rng.random_range(0.5..2.0);
        let u = rng.random_range(-200.0..200.0) * omega;
        let target = rng.random_range(0.1..0.4);
        let run = || -> collshift::Result<f64> {
            let model = SpinModel::uniform(vec![omega; n], u)?;
            let shape = ThermalLineshape::from_models(vec![(model, 1.0)], PI / omega, InteractionMode::MeanU)?;
            let opts = LockOptions { interaction: InteractionMode::MeanU, ..LockOptions::default() };
            Ok(shift_from_lineshape(&shape, target, &opts, &Constants::default())?.midpoint.abs() / omega)
        };
        match run() {
            Ok(r) => worst = worst.max(r),
            Err(e) => error = Some(e.name()),
        }
    }
    let pass = error.is_none() && worst < 1e-8 && started.elapsed().as_secs_f64() < 1.0;
    report.line("1", pass, format!("max |Δν|/Ω̄ = {worst:.2e} over 40 draws (want < 1e-8, < 1 s); error {error:?}"), started);
}

fn criterion_2(report: &mut Report) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let omega = rng.random_range(0.01..5.0);
        let u = rng.random_range(-5.0..5.0);
        let detuning = rng.random_range(-5.0..5.0);
        let model = SpinModel::uniform(vec![omega, omega], u).expect("pair model");
        let h = SpinHamiltonian::from_model(&model, detuning, InteractionMode::MeanU).expect("hamiltonian");
        let mut got: Vec<f64> = h.propagator().energies().iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let r = omega.hypot(detuning);
        let mut want = [-r, 0.0, r, u];
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    report.line("2", worst < 1e-10, format!("max eigenvalue error {worst:.2e} over 20 draws (want < 1e-10)"), started);
}

fn criterion_3(report: &mut Report) {
    let started = Instant::now();
    let t = PI;
    let mut pass = true;
    let mut details = Vec::new();
    for u in [0.3, 3.0, 30.0] {
        let mut errors = Vec::new();
        for frac in [0.05, 0.025, 0.0125] {
            let rabi = vec![1.0 + frac, 1.0 - frac];
            let run = || -> collshift::Result<f64> {
                let model = SpinModel::uniform(rabi.clone(), u)?;
                let shape = ThermalLineshape::from_models(vec![(model, 1.0)], t, InteractionMode::MeanU)?;
                let opts = LockOptions { occupied_fraction: 1.0, ..LockOptions::default() };
                let exact = shift_from_lineshape(&shape, 0.3, &opts, &Constants::default())?.midpoint;
                let d0 = zero_order_lock_point(1.0, t, 0.3)?;
                let pert = shift_second_order(&CollectiveBasisParams::from_rabi(&rabi, u, d0)?, t)?.shift;
                Ok(((pert - exact) / exact).abs())
            };
            errors.push(run().unwrap_or(f64::NAN));
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        pass &= errors[0] < 0.05 && ratios.iter().all(|r| (3.0..5.0).contains(r));
        details.push(format!("u={u}: err(0.05)={:.2e}, ratios {:.2}/{:.2}", errors[0], ratios[0], ratios[1]));
    }
    report.line("3", pass, format!("{} (want err < 5%, ratios ≈ 4)", details.join("; ")), started);
}

fn criteria_4_to_7(report: &mut Report) {
    let sweep_start = Instant::now();
    let setup = ReferenceSetup::new();
    let grid = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
    let mut sweep = Vec::new();
    for &x in &grid {
        match setup.shift_at(x) {
            Ok(s) => sweep.push((x, s)),
            Err(e) => println!("note: shift at u = {x}·Ω₀ᴮ failed with {}", e.name()),
        }
    }
    let sweep_time = sweep_start.elapsed().as_secs_f64();
    println!(
        "note: reference sweep Δν/Ω₀ᴮ: {}",
        sweep.iter().map(|(x, s)| format!("{x}:{:.3e}", s / setup.omega0())).collect::<Vec<_>>().join(" ")
    );

    // 4: slopes in both regimes and the η_Z exponent.
    let started = Instant::now();
    let weak: Vec<(f64, f64)> = sweep.iter().copied().filter(|&(x, _)| x <= 0.2).collect();
    let strong: Vec<(f64, f64)> = sweep.iter().copied().filter(|&(x, _)| x >= 10.0).collect();
    let weak_slope = slope(&weak);
    let strong_slope = slope(&strong);
    let etas = [0.03, 0.0425, 0.06];
    let eta_points: Result<Vec<(f64, f64)>, String> = etas
        .iter()
        .map(|&eta| {
            setup.shift(0.1 * setup.omega0(), eta, &setup.drive).map(|r| (eta, r.shift)).map_err(|e| e.name().to_string())
        })
        .collect();
    let eta_exponent = eta_points.and_then(|p| slope(&p));
    let ok = |r: &Result<f64, String>, want: f64| r.as_ref().is_ok_and(|v| (v - want).abs() <= if want == 4.0 { 0.3 } else { 0.15 });
    let pass = ok(&weak_slope, 1.0) && ok(&strong_slope, -1.0) && ok(&eta_exponent, 4.0);
    report.line(
        "4",
        pass,
        format!(
            "weak slope {weak_slope:.3?} (want 1 ± 0.15, u ≤ Ω₀ᴮ/5); strong slope {strong_slope:.3?} (want −1 ± 0.15, u ≥ 10Ω₀ᴮ); η_Z exponent {eta_exponent:.3?} (want 4 ± 0.3); sweep took {sweep_time:.0} s"
        ),
        started,
    );

    // 5: suppression at u = 20·Ω₀ᴮ relative to the weak-regime maximum.
    let started = Instant::now();
    let at20 = sweep.iter().find(|(x, _)| *x == 20.0).map(|p| p.1.abs());
    let weak_max = sweep.iter().filter(|(x, _)| *x <= 2.0).map(|p| p.1.abs()).fold(0.0, f64::max);
    let pass = at20.is_some_and(|a| a < weak_max / 10.0);
    report.line("5", pass, format!("|Δν(20Ω₀ᴮ)| = {} vs weak-regime max {weak_max:.3e} / 10 (rad/s)", at20.map_or("missing".into(), |a| format!("{a:.3e}"))), started);

    // Invariant: |Δν| decreasing in u on a geometric grid above 5·Ω₀ᴮ.
    let started = Instant::now();
    let tail: Vec<(f64, f64)> = sweep.iter().copied().filter(|&(x, _)| x >= 5.0).collect();
    let rising: Vec<String> =
        tail.windows(2).filter(|w| w[1].1.abs() >= w[0].1.abs()).map(|w| format!("{}→{}", w[0].0, w[1].0)).collect();
    report.line(
        "invariant monotone-suppression",
        rising.is_empty() && tail.len() >= 2,
        format!("|Δν| non-decreasing on steps {rising:?} (want none for u ≥ 5Ω₀ᴮ)"),
        started,
    );

    // 6: constant pulse area, Ω₀ᴮ doubled, deep in the suppressed regime (u fixed in absolute terms).
    let started = Instant::now();
    let u = 1000.0 * setup.omega0();
    let faster = DriveParams::pi_pulse(0.04, 0.3).expect("drive");
    let ratio = setup
        .shift(u, 0.06, &setup.drive)
        .and_then(|a| setup.shift(u, 0.06, &faster).map(|b| (b.shift / a.shift).abs()))
        .map_err(|e| e.name());
    report.line("6", ratio.is_ok_and(|r| r > 2.0), format!("|Δν(2Ω₀ᴮ, t/2)| / |Δν(Ω₀ᴮ, t)| = {ratio:.3?} at u = 1000Ω₀ᴮ (want > 2)"), started);

    // 7: negative scattering length, weak regime.
    let started = Instant::now();
    let signs: Vec<(f64, Result<f64, &str>)> = [-0.05, -0.2]
        .iter()
        .map(|&x| (x, setup.shift_at(x).map_err(|e| e.name())))
        .collect();
    let pass = signs.iter().all(|(_, s)| s.as_ref().is_ok_and(|v| *v < 0.0));
    let shown: Vec<String> = signs
        .iter()
        .map(|(x, s)| match s {
            Ok(v) => format!("{x}: {v:.3e}"),
            Err(e) => format!("{x}: {e}"),
        })
        .collect();
    report.line("7", pass, format!("Δν (rad/s) at u/Ω₀ᴮ = {} (want < 0)", shown.join(", ")), started);
}

fn criterion_8(report: &mut Report) {
    let started = Instant::now();
    let c = Constants::default();
    let run = || -> collshift::Result<Vec<String>> {
        let bands = band_structure(64.0, 8, 101, 30)?;
        let wy = hz_to_angular(55e3);
        let tilt = TiltParams::default_for(&c);
        let mut bad = Vec::new();
        for (temp, j_ref, t_ref, teff_ref) in [(2.5e-6, 0.007, 38e-3, 150e-3), (4e-6, 0.024, 11e-3, 40e-3)] {
            let th = thermal_tunneling(&bands, temp, wy, BandWeighting::HarmonicLadder, &c)?;
            let eff = thermal_effective_tunneling(&bands, temp, wy, BandWeighting::HarmonicLadder, &tilt, &c)?;
            let fine = ((th.mean_j - j_ref) / j_ref).abs() < 0.25
                && ((th.time - t_ref) / t_ref).abs() < 0.25
                && (0.5..2.0).contains(&(eff.time / teff_ref));
            bad.push(format!(
                "{}T={temp:.1e}: ⟨J⟩={:.4} E_r, h/⟨J⟩={:.1} ms, h/⟨J_eff⟩={:.0} ms",
                if fine { "" } else { "OUT " },
                th.mean_j,
                th.time * 1e3,
                eff.time * 1e3
            ));
        }
        Ok(bad)
    };
    match run() {
        Ok(lines) => {
            let pass = !lines.iter().any(|l| l.starts_with("OUT"));
            report.line("8", pass, format!("{} (want 0.007/0.024 E_r, 38/11 ms ±25%; 150/40 ms ×2)", lines.join("; ")), started)
        }
        Err(e) => report.line("8", false, format!("error {}", e.name()), started),
    }
}

fn criterion_9(report: &mut Report) {
    let started = Instant::now();
    let c = Constants::default();
    let omega_z = hz_to_angular(700.0);
    let mut worst = 0.0f64;
    let mut error = None;
    for ratio in [50.0, 100.0, 150.0, 200.0, 250.0, 300.0] {
        let temperature = ratio * c.hbar * omega_z / c.kb;
        match mean_interaction(temperature, omega_z, 1.0, &c) {
            Ok(m) => worst = worst.max(m.relative_deviation),
            Err(e) => error = Some(e.name()),
        }
    }
    report.line("9", error.is_none() && worst < 0.1, format!("max relative deviation {worst:.4} over k_BT/ħω_Z ∈ [50, 300] (want < 0.1); error {error:?}"), started);
}

fn criterion_10(report: &mut Report) {
    let started = Instant::now();
    let run = || -> collshift::Result<(f64, usize, f64, bool)> {
        let clean = synthesize_record(&SynthesisSpec::new(0.8, vec![3.0, 0.02, -4e-5], 0.0, 2000), 0)?;
        let drift_error = string_shift(&clean, 4)?.iter().map(|s| (s - 0.8).abs()).fold(0.0, f64::max);

        let options = AnalysisOptions::new(4)?;
        let mut covered = 0;
        for seed in 0..100 {
            let rec = synthesize_record(&SynthesisSpec::new(0.8, vec![3.0, 1e-3, -2e-7], 1.0, 10_000), seed)?;
            let est = analyze(&rec, Protocol::Pooled, &options)?;
            if (est.value_hz - 0.8).abs() <= 4.0 * est.error_hz {
                covered += 1;
            }
        }

        let white = synthesize_record(&SynthesisSpec::new(0.0, vec![], 1.0, 20_000), 9)?;
        let series: Vec<f64> = white.points().iter().map(|p| p.frequency_hz).collect();
        let taus: Vec<usize> = (0..8).map(|i| (2f64.powf(i as f64 * 5.0 / 7.0)).round() as usize).collect();
        let dev = allan_deviation(&series, &taus)?;
        let pts: Vec<(f64, f64)> = taus.iter().map(|&t| t as f64).zip(dev).collect();
        let (adev_slope, _) = power_law_fit(&pts)?;

        let mut spec = SynthesisSpec::new(0.6, vec![1.0, 5e-4], 1.0, 12_000);
        spec.run_length = 1_000;
        spec.runs_per_day = 3;
        let rec = synthesize_record(&spec, 77)?;
        let all = [Protocol::Pooled, Protocol::Binned, Protocol::ByDay, Protocol::BySegment]
            .iter()
            .map(|&p| analyze(&rec, p, &options))
            .collect::<collshift::Result<Vec<ShiftEstimate>>>()?;
        let consistent = all.iter().all(|a| all.iter().all(|b| (a.value_hz - b.value_hz).abs() < a.error_hz.hypot(b.error_hz)));
        Ok((drift_error, covered, adev_slope, consistent))
    };
    match run() {
        Ok((drift, covered, adev, consistent)) => {
            let pass = drift < 1e-12 && covered >= 99 && (adev + 0.5).abs() < 0.1 && consistent;
            report.line(
                "10",
                pass,
                format!("drift residual {drift:.1e} Hz; coverage {covered}/100 at 4σ; ADEV slope {adev:.3}; protocols consistent: {consistent}"),
                started,
            )
        }
        Err(e) => report.line("10", false, format!("error {}", e.name()), started),
    }
}

fn main() {
    let mut report = Report { failures: 0 };
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    criterion_10(&mut report);
    criteria_4_to_7(&mut report);
    println!(
        "INFO criterion 11: measured fractional shifts at unknown densities are not a reproduction target; the qualitative trend is covered by criteria 4 to 7"
    );
    println!("acceptance: {} failing criterion line(s)", report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
