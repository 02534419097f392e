use std::path::Path;

use serde::Serialize;

use super::config::{Resolved, Scenario, ScenarioConfig};
use super::output::{json_artifact, Artifact, Table};
use super::CliError;
use crate::analysis::{
    allan_deviation, analyze, monte_carlo_correction, overlap_correction_factor, printed_correction_factor,
    string_points, synthesize_record, AnalysisOptions, FrequencyRecord, ShiftEstimate, SynthesisSpec,
};
use crate::lineshape::{
    clock_shift, rescale_series, suppression_surface, thermal_lineshape, RescaleModel, ShiftConditions, ShiftResult,
    SurfaceSpec,
};
use crate::modes::{thermal_ensemble, ThermalEnsemble};
use crate::perturbative::thermal_shift;
use crate::physunits::{angular_to_hz, hz_to_angular};
use crate::tunneling::{
    band_structure, band_tunneling, dispersion_csv, interaction_tunneling_regime_check, thermal_effective_tunneling,
    thermal_tunneling, tunneling_time, RegimeCheck, TiltParams,
};

const SHIFT_COLUMNS: [&str; 9] =
    ["u_Hz", "omega0B_Hz", "TZ_K", "etaZ", "shift_Hz", "shift_fractional", "delta_low_Hz", "delta_high_Hz", "coverage"];

fn shift_row(u: f64, omega0b: f64, temperature: f64, eta_z: f64, r: &ShiftResult) -> Vec<f64> {
    vec![
        angular_to_hz(u),
        angular_to_hz(omega0b),
        temperature,
        eta_z,
        r.shift_hz,
        r.shift_fractional,
        angular_to_hz(r.delta_low),
        angular_to_hz(r.delta_high),
        r.ensemble_coverage,
    ]
}

/// Executes the configured scenario and returns its artifacts in a fixed order.
pub fn execute(cfg: &ScenarioConfig, res: &Resolved, seed: u64, config_dir: &Path) -> Result<Vec<Artifact>, CliError> {
    match cfg.scenario {
        Scenario::Lineshape => lineshape(cfg, res, seed),
        Scenario::Shift => shift_sweep(cfg, res, seed),
        Scenario::Surface => surface(cfg, res, seed),
        Scenario::Fig4 => fig4(cfg, res),
        Scenario::Tunneling => tunneling(cfg, res),
        Scenario::Analyze => analyze_record(cfg, seed, config_dir),
        Scenario::Synth => synth(cfg, seed),
    }
}

fn ensemble(res: &Resolved, seed: u64) -> Result<ThermalEnsemble, CliError> {
    Ok(thermal_ensemble(res.n_atoms, res.temperature, res.geometry.omega_z(), res.policy, seed, &res.constants)?)
}

fn lineshape(cfg: &ScenarioConfig, res: &Resolved, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let ens = ensemble(res, seed)?;
    let n = cfg.lineshape.points;
    let half = cfg.lineshape.span_over_omega0 * res.drive.omega0b();
    let grid: Vec<f64> = (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect();
    let points = thermal_lineshape(&ens, &res.drive, &res.geometry, res.lock.interaction, &grid)?;
    let mut table = Table::new("lineshape", &["detuning_Hz", "excitation"]);
    for p in points {
        table.row(&[angular_to_hz(p.detuning), p.excitation]);
    }
    Ok(vec![table.into_artifact("lineshape.csv")])
}

fn shift_sweep(cfg: &ScenarioConfig, res: &Resolved, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let ens = ensemble(res, seed)?;
    let mut columns = SHIFT_COLUMNS.to_vec();
    if cfg.sweep.perturbative {
        columns.push("perturbative_shift_Hz");
    }
    let mut table = Table::new("shift", &columns);
    let omega0b = res.drive.omega0b();
    for &x in &cfg.sweep.u_over_omega0 {
        let geometry = res.geometry.with_interaction(x * omega0b)?;
        let r = clock_shift(&ens, &res.drive, &geometry, &res.lock, &res.constants)?;
        let mut row = shift_row(geometry.u(), omega0b, res.temperature, geometry.eta_z(), &r);
        if cfg.sweep.perturbative {
            row.push(thermal_shift(&ens, &res.drive, &geometry)?.shift_hz * res.lock.occupied_fraction);
        }
        table.row(&row);
    }
    Ok(vec![table.into_artifact("shift.csv")])
}

fn surface(cfg: &ScenarioConfig, res: &Resolved, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let spec = SurfaceSpec {
        ensemble: ensemble(res, seed)?,
        geometry: res.geometry,
        pulse: res.pulse,
        target_excitation: res.drive.target_excitation(),
        options: res.lock.clone(),
        constants: res.constants,
    };
    let omega0b = res.drive.omega0b();
    let u_grid: Vec<f64> = cfg.surface.u_over_omega0.iter().map(|x| x * omega0b).collect();
    let o_grid: Vec<f64> = cfg.surface.omega0b_hz.iter().copied().map(hz_to_angular).collect();
    let rows = suppression_surface(&u_grid, &o_grid, &spec)?;
    let mut table = Table::new("surface", &SHIFT_COLUMNS);
    for r in rows {
        table.row(&shift_row(r.u, r.omega0b, r.temperature, r.eta_z, &r.result));
    }
    Ok(vec![table.into_artifact("surface.csv")])
}

fn fig4(cfg: &ScenarioConfig, res: &Resolved) -> Result<Vec<Artifact>, CliError> {
    let f = &cfg.fig4;
    let model = RescaleModel {
        u: res.geometry.u(),
        reference_omega_z: hz_to_angular(f.reference_omega_z_hz),
        reference_eta_z: f.reference_eta_z.unwrap_or(res.geometry.eta_z()),
        eta_y: res.geometry.eta_y(),
        omega_perp: res.geometry.omega_perp(),
        drive: res.drive,
        coverage: cfg.ensemble.coverage,
        options: res.lock.clone(),
        constants: res.constants,
        floor: hz_to_angular(f.floor_hz),
    };
    let fixed = ShiftConditions { omega_z: hz_to_angular(f.fixed_omega_z_hz), temperature: f.fixed_temperature };
    let points: Vec<(f64, ShiftConditions)> = f
        .points
        .iter()
        .map(|p| (p.measured, ShiftConditions { omega_z: hz_to_angular(p.omega_z_hz), temperature: p.temperature }))
        .collect();
    let rescaled = rescale_series(&points, &fixed, &model)?;
    let mut table =
        Table::new("fig4", &["omegaZ_Hz", "TZ_K", "measured", "theory_Hz", "theory_fixed_Hz", "rescaled"]);
    for (p, r) in f.points.iter().zip(&rescaled) {
        table.row(&[
            p.omega_z_hz,
            p.temperature,
            r.measured,
            angular_to_hz(r.theory_at_conditions),
            angular_to_hz(r.theory_at_fixed),
            r.rescaled,
        ]);
    }
    Ok(vec![table.into_artifact("fig4.csv")])
}

#[derive(Serialize)]
struct TemperatureRow {
    temperature: f64,
    mean_j_er: f64,
    mean_j_hz: f64,
    tunneling_time_s: f64,
    effective_j_er: f64,
    effective_time_s: f64,
    band_weights: Vec<f64>,
}

#[derive(Serialize)]
struct TunnelingReport {
    schema: &'static str,
    depth_er: f64,
    recoil_energy_hz: f64,
    bound_band_count: usize,
    band_j_er: Vec<f64>,
    band_time_s: Vec<f64>,
    tilt_offset_er: f64,
    temperatures: Vec<TemperatureRow>,
    regime: Option<RegimeCheck>,
}

fn tunneling(cfg: &ScenarioConfig, res: &Resolved) -> Result<Vec<Artifact>, CliError> {
    let t = &cfg.tunneling;
    let c = &res.constants;
    let bands = band_structure(t.depth_er, t.n_bands, t.n_q, t.plane_wave_cutoff)?;
    let er_hz = c.energy_to_hz(c.lattice_recoil_energy()?);
    let tilt = TiltParams::new(hz_to_angular(t.omega_dy_hz), t.mean_site_index, c.lattice_wavelength / 2.0)?;
    let omega_y = hz_to_angular(t.omega_y_hz);
    let band_j = bands.energies.iter().map(|b| band_tunneling(b)).collect::<crate::Result<Vec<_>>>()?;
    let band_time = band_j.iter().map(|&j| tunneling_time(j, c)).collect::<crate::Result<Vec<_>>>()?;
    let weighting = cfg.weighting();
    let temperatures = t
        .temperatures
        .iter()
        .map(|&temp| {
            let plain = thermal_tunneling(&bands, temp, omega_y, weighting, c)?;
            let eff = thermal_effective_tunneling(&bands, temp, omega_y, weighting, &tilt, c)?;
            Ok(TemperatureRow {
                temperature: temp,
                mean_j_er: plain.mean_j,
                mean_j_hz: plain.mean_j * er_hz,
                tunneling_time_s: plain.time,
                effective_j_er: eff.mean_j,
                effective_time_s: eff.time,
                band_weights: plain.band_weights,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let regime = if t.mean_u_hz != 0.0 {
        Some(interaction_tunneling_regime_check(hz_to_angular(t.mean_u_hz), omega_y, t.regime_threshold)?)
    } else {
        None
    };
    let report = TunnelingReport {
        schema: "collshift.tunneling.v1",
        depth_er: t.depth_er,
        recoil_energy_hz: er_hz,
        bound_band_count: bands.bound_band_count,
        band_j_er: band_j,
        band_time_s: band_time,
        tilt_offset_er: tilt.energy_offset(t.mean_site_index, c)?,
        temperatures,
        regime,
    };
    let dispersion = Artifact {
        name: "dispersion.csv".into(),
        contents: format!("# schema: collshift.dispersion.v1\n{}", dispersion_csv(&bands)?),
    };
    Ok(vec![dispersion, json_artifact("tunneling.json", &report)])
}

#[derive(Serialize)]
struct CorrectionReport {
    printed: f64,
    overlap: f64,
    monte_carlo: f64,
    monte_carlo_uncertainty: f64,
    monte_carlo_trials: usize,
    monte_carlo_record_length: usize,
}

#[derive(Serialize)]
struct AdevRow {
    tau: usize,
    record_hz: f64,
    strings_hz: Option<f64>,
}

#[derive(Serialize)]
struct AnalysisReport {
    schema: &'static str,
    record_length: usize,
    string_length: usize,
    n_strings: usize,
    estimates: Vec<ShiftEstimate>,
    correction_factor: CorrectionReport,
    allan: Vec<AdevRow>,
}

fn adev_at(series: &[f64], tau: usize) -> crate::Result<Option<f64>> {
    if series.len() < 2 * tau + 1 {
        return Ok(None);
    }
    Ok(allan_deviation(series, &[tau])?.first().copied())
}

fn analyze_record(cfg: &ScenarioConfig, seed: u64, config_dir: &Path) -> Result<Vec<Artifact>, CliError> {
    let a = &cfg.analysis;
    let rel = a.record.as_ref().expect("validated: record path present");
    let path = config_dir.join(rel);
    let file = std::fs::File::open(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let record = FrequencyRecord::from_csv_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut options = AnalysisOptions::new(a.string_length)?;
    options.startup_cut = a.startup_cut;
    let estimates = a.protocols.iter().map(|&p| analyze(&record, p, &options)).collect::<crate::Result<Vec<_>>>()?;
    let strings: Vec<f64> =
        string_points(&record, a.string_length, a.startup_cut)?.into_iter().map(|p| p.value).collect();
    let frequencies: Vec<f64> = record.points().iter().map(|p| p.frequency_hz).collect();
    let mc_length = record.len().clamp(a.string_length, 2000);
    let mc = monte_carlo_correction(a.string_length, mc_length, a.mc_trials, seed)?;
    let mut allan = Vec::new();
    for &tau in &a.taus {
        if let Some(record_hz) = adev_at(&frequencies, tau)? {
            allan.push(AdevRow { tau, record_hz, strings_hz: adev_at(&strings, tau)? });
        }
    }
    let report = AnalysisReport {
        schema: "collshift.analysis.v1",
        record_length: record.len(),
        string_length: a.string_length,
        n_strings: strings.len(),
        estimates,
        correction_factor: CorrectionReport {
            printed: printed_correction_factor(a.string_length)?,
            overlap: overlap_correction_factor(a.string_length)?,
            monte_carlo: mc.factor,
            monte_carlo_uncertainty: mc.uncertainty,
            monte_carlo_trials: mc.trials,
            monte_carlo_record_length: mc_length,
        },
        allan,
    };
    Ok(vec![json_artifact("analysis.json", &report)])
}

fn synth(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let s = &cfg.synth;
    let spec = SynthesisSpec {
        true_shift: s.true_shift_hz,
        drift: s.drift.clone(),
        noise_sigma: s.noise_sigma_hz,
        length: s.length,
        run_length: s.run_length,
        runs_per_day: s.runs_per_day,
    };
    let record = synthesize_record(&spec, seed)?;
    let contents = format!("# schema: collshift.record.v1\n{}", record.to_csv()?);
    Ok(vec![Artifact { name: "record.csv".into(), contents }])
}
