//! Thermal Rabi lineshapes, lock points and the clock shift Δν = (δ₁+δ₂)/2.

use rayon::prelude::*;

use crate::error::{domain, ensure_finite, ensure_positive, Error, Result};
use crate::modes::{rabi_frequencies, thermal_ensemble, EnsemblePolicy, OverlapSeries, ThermalEnsemble};
use crate::numeric::brent;
use crate::physunits::{angular_to_hz, Constants, TrapGeometry};
use crate::spinmodel::{excited_fraction, pair_excitation, DriveParams, InteractionMode, SpinHamiltonian, SpinModel};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy)]
struct PairSite {
    rabi: [f64; 2],
    coupling: f64,
    weight: f64,
}

#[derive(Debug, Clone)]
enum Sites {
    Pairs(Vec<PairSite>),
    General(Vec<(SpinModel, f64)>),
}

/// Ensemble-averaged excitation fraction as a function of detuning.
#[derive(Debug, Clone)]
pub struct ThermalLineshape {
    sites: Sites,
    pulse_time: f64,
    mean_rabi: f64,
    interaction: InteractionMode,
}

impl ThermalLineshape {
    pub fn new(
        ensemble: &ThermalEnsemble,
        drive: &DriveParams,
        geometry: &TrapGeometry,
        interaction: InteractionMode,
    ) -> Result<Self> {
        Self::with_mode_detunings(ensemble, drive, geometry, interaction, None)
    }

    /// As [`ThermalLineshape::new`], with a per-mode detuning table indexed by mode number
    /// (modes beyond the table get no offset).
    pub fn with_mode_detunings(
        ensemble: &ThermalEnsemble,
        drive: &DriveParams,
        geometry: &TrapGeometry,
        interaction: InteractionMode,
        mode_detunings: Option<&[f64]>,
    ) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(domain("empty ensemble"));
        }
        let rabi = rabi_frequencies(ensemble.n_max(), drive.omega0b(), geometry.eta_y(), geometry.eta_z());
        let series = OverlapSeries::new(ensemble.n_max());
        let u_scale = geometry.u() / std::f64::consts::PI;
        let mean_rabi = ensemble.weighted_mean(|c| {
            c.modes().iter().map(|&m| rabi[m as usize]).sum::<f64>() / c.len() as f64
        });
        let sites = if ensemble.n_atoms() == 2 && mode_detunings.is_none() {
            Sites::Pairs(
                ensemble
                    .configs()
                    .iter()
                    .map(|c| {
                        let (a, b) = (c.modes()[0], c.modes()[1]);
                        PairSite {
                            rabi: [rabi[a as usize], rabi[b as usize]],
                            coupling: u_scale * series.coefficient(a, b),
                            weight: c.weight(),
                        }
                    })
                    .collect(),
            )
        } else {
            let mut models = Vec::with_capacity(ensemble.len());
            for c in ensemble.configs() {
                let mut model = SpinModel::from_config(c, drive, geometry, interaction)?;
                if let Some(table) = mode_detunings {
                    let offsets = c.modes().iter().map(|&m| table.get(m as usize).copied().unwrap_or(0.0)).collect();
                    model = model.with_detuning_offsets(offsets)?;
                }
                models.push((model, c.weight()));
            }
            Sites::General(models)
        };
        Ok(Self { sites, pulse_time: drive.pulse_time(), mean_rabi, interaction })
    }

    /// Lineshape over explicit site models with weights (normalized here).
    pub fn from_models(models: Vec<(SpinModel, f64)>, pulse_time: f64, interaction: InteractionMode) -> Result<Self> {
        if models.is_empty() {
            return Err(domain("empty ensemble"));
        }
        ensure_positive("pulseTime", pulse_time)?;
        let total: f64 = models.iter().map(|m| m.1).sum();
        let models: Vec<(SpinModel, f64)> = models.into_iter().map(|(m, w)| (m, w / total)).collect();
        let mean_rabi = models.iter().map(|(m, w)| w * m.mean_rabi()).sum();
        Ok(Self { sites: Sites::General(models), pulse_time, mean_rabi, interaction })
    }

    pub fn mean_rabi(&self) -> f64 {
        self.mean_rabi
    }

    pub fn len(&self) -> usize {
        match &self.sites {
            Sites::Pairs(p) => p.len(),
            Sites::General(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weighted excitation fraction at one detuning.
    ///
    /// Partial sums over fixed-size chunks are combined in chunk order, so the
    /// result does not depend on the number of worker threads.
    pub fn excitation(&self, detuning: f64) -> Result<f64> {
        let t = self.pulse_time;
        match &self.sites {
            Sites::Pairs(sites) => {
                let partial: Vec<f64> = sites
                    .par_chunks(CHUNK)
                    .map(|chunk| {
                        chunk.iter().map(|s| s.weight * pair_excitation(s.rabi, s.coupling, detuning, t)).sum()
                    })
                    .collect();
                Ok(partial.iter().sum())
            }
            Sites::General(models) => {
                let partial: Vec<Result<f64>> = models
                    .par_chunks(CHUNK.min(64))
                    .map(|chunk| {
                        let mut acc = 0.0;
                        for (model, w) in chunk {
                            let h = SpinHamiltonian::from_model(model, detuning, self.interaction)?;
                            acc += w * excited_fraction(&h.propagator().state_at(t)?);
                        }
                        Ok(acc)
                    })
                    .collect();
                partial.into_iter().sum()
            }
        }
    }

    /// Every k-th site, reweighted, holding at most `max_sites` sites.
    pub fn subsample(&self, max_sites: usize) -> Self {
        let len = self.len();
        if len <= max_sites || max_sites == 0 {
            return self.clone();
        }
        let stride = len.div_ceil(max_sites);
        let sites = match &self.sites {
            Sites::Pairs(p) => {
                let picked: Vec<PairSite> = p.iter().step_by(stride).copied().collect();
                let total: f64 = picked.iter().map(|s| s.weight).sum();
                Sites::Pairs(picked.into_iter().map(|s| PairSite { weight: s.weight / total, ..s }).collect())
            }
            Sites::General(g) => {
                let picked: Vec<(SpinModel, f64)> = g.iter().step_by(stride).cloned().collect();
                let total: f64 = picked.iter().map(|s| s.1).sum();
                Sites::General(picked.into_iter().map(|(m, w)| (m, w / total)).collect())
            }
        };
        Self { sites, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineshapePoint {
    pub detuning: f64,
    pub excitation: f64,
}

/// Excitation fraction on a detuning grid spanning at least ±4Ω̄.
pub fn thermal_lineshape(
    ensemble: &ThermalEnsemble,
    drive: &DriveParams,
    geometry: &TrapGeometry,
    interaction: InteractionMode,
    grid: &[f64],
) -> Result<Vec<LineshapePoint>> {
    let shape = ThermalLineshape::new(ensemble, drive, geometry, interaction)?;
    let span = 4.0 * shape.mean_rabi().abs();
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if grid.is_empty() || lo > -span * (1.0 - 1e-12) || hi < span * (1.0 - 1e-12) {
        return Err(domain(format!("detuning grid must span at least ±4Ω̄ = ±{span}")));
    }
    grid.iter().map(|&d| Ok(LineshapePoint { detuning: d, excitation: shape.excitation(d)? })).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockOptions {
    pub interaction: InteractionMode,
    /// Half-width of the bracketing scan in units of Ω̄.
    pub scan_half_width: f64,
    /// Step of the bracketing scan in units of Ω̄.
    pub scan_step: f64,
    /// Lock-point tolerance in units of Ω̄.
    pub tolerance: f64,
    /// Sites used for the bracketing scan before refinement on the full ensemble.
    pub scan_sites: usize,
    /// Fraction of atoms in multiply occupied sites; multiplies the reported shift.
    pub occupied_fraction: f64,
    /// Optional per-mode detuning offsets (rad/s), indexed by mode number.
    pub mode_detunings: Option<Vec<f64>>,
}

impl Default for LockOptions {
    fn default() -> Self {
        Self {
            interaction: InteractionMode::ExactPairwise,
            scan_half_width: 4.0,
            scan_step: 0.05,
            tolerance: 1e-12,
            scan_sites: 20_000,
            occupied_fraction: 0.25,
            mode_detunings: None,
        }
    }
}

impl LockOptions {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("scan half-width", self.scan_half_width)?;
        ensure_positive("scan step", self.scan_step)?;
        ensure_positive("lock tolerance", self.tolerance)?;
        if !(self.occupied_fraction > 0.0 && self.occupied_fraction <= 1.0) {
            return Err(domain(format!("occupied fraction must lie in (0,1], got {}", self.occupied_fraction)));
        }
        if self.scan_step >= self.scan_half_width {
            return Err(domain("scan step must be smaller than the scan half-width"));
        }
        if let Some(table) = &self.mode_detunings {
            for &d in table {
                ensure_finite("mode detuning", d)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftResult {
    pub delta_low: f64,
    pub delta_high: f64,
    /// (δ₁+δ₂)/2 of the lineshape, rad/s.
    pub midpoint: f64,
    /// midpoint × occupied fraction, rad/s.
    pub shift: f64,
    pub shift_hz: f64,
    pub shift_fractional: f64,
    pub target_excitation: f64,
    pub peak_excitation: f64,
    pub ensemble_coverage: f64,
    pub occupied_fraction: f64,
    pub mean_rabi: f64,
}

/// Outermost crossings of the target excitation on each side of the peak.
pub fn lock_points(shape: &ThermalLineshape, target: f64, options: &LockOptions) -> Result<(f64, f64, f64)> {
    options.validate()?;
    let scale = shape.mean_rabi().abs();
    if scale == 0.0 || !scale.is_finite() {
        return Err(domain("mean Rabi frequency vanishes; lineshape has no carrier"));
    }
    let coarse = shape.subsample(options.scan_sites);
    let exact_scan = coarse.len() == shape.len();
    let steps = (options.scan_half_width / options.scan_step).ceil() as i64;
    let h = options.scan_half_width * scale / steps as f64;
    let grid: Vec<f64> = (-steps..=steps).map(|i| i as f64 * h).collect();
    let values: Vec<f64> = grid.iter().map(|&d| coarse.excitation(d)).collect::<Result<_>>()?;
    let (peak_index, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let peak = if exact_scan { values[peak_index] } else { shape.excitation(grid[peak_index])? };
    if peak <= target {
        return Err(Error::UnreachableTarget { target, peak });
    }
    if values[0] >= target || values[values.len() - 1] >= target {
        return Err(Error::Bracket(format!(
            "lineshape exceeds the target at the scan edge ±{}Ω̄; widen the scan",
            options.scan_half_width
        )));
    }
    let left = values.iter().position(|&v| v >= target).expect("peak above target");
    let right = values.iter().rposition(|&v| v >= target).expect("peak above target");
    let tol = options.tolerance * scale;
    let f = |d: f64| shape.excitation(d).map(|v| v - target);

    let refine = |inner: usize, outer: usize| -> Result<f64> {
        // inner is above target, outer below, on the coarse grid
        let step = grid[inner] - grid[outer];
        let (mut a, mut b) = (grid[outer], grid[inner]);
        let (mut fa, mut fb) = if exact_scan {
            (values[outer] - target, values[inner] - target)
        } else {
            (f(a)?, f(b)?)
        };
        let mut widen = 0;
        while fa.signum() == fb.signum() {
            widen += 1;
            if widen > 2 * steps {
                return Err(Error::Bracket("could not bracket the target crossing on the full ensemble".into()));
            }
            if fa > 0.0 {
                // full lineshape still above target: move outward
                b = a;
                fb = fa;
                a -= step;
                fa = f(a)?;
            } else {
                a = b;
                fa = fb;
                b += step;
                fb = f(b)?;
            }
        }
        let mut err = None;
        let root = brent(
            |d| match f(d) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            },
            a,
            b,
            fa,
            fb,
            tol,
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(root),
        }
    };
    let delta_low = refine(left, left - 1)?;
    let delta_high = refine(right, right + 1)?;
    Ok((delta_low, delta_high, peak))
}

pub fn clock_shift(
    ensemble: &ThermalEnsemble,
    drive: &DriveParams,
    geometry: &TrapGeometry,
    options: &LockOptions,
    constants: &Constants,
) -> Result<ShiftResult> {
    let shape = ThermalLineshape::with_mode_detunings(
        ensemble,
        drive,
        geometry,
        options.interaction,
        options.mode_detunings.as_deref(),
    )?;
    let mut result = shift_from_lineshape(&shape, drive.target_excitation(), options, constants)?;
    result.ensemble_coverage = ensemble.coverage();
    Ok(result)
}

pub fn shift_from_lineshape(
    shape: &ThermalLineshape,
    target: f64,
    options: &LockOptions,
    constants: &Constants,
) -> Result<ShiftResult> {
    let (delta_low, delta_high, peak) = lock_points(shape, target, options)?;
    if !(delta_low < 0.0 && delta_high > 0.0) {
        return Err(Error::Bracket(format!(
            "lock points {delta_low}, {delta_high} do not straddle the carrier"
        )));
    }
    let midpoint = 0.5 * (delta_low + delta_high);
    let shift = midpoint * options.occupied_fraction;
    let shift_hz = angular_to_hz(shift);
    Ok(ShiftResult {
        delta_low,
        delta_high,
        midpoint,
        shift,
        shift_hz,
        shift_fractional: shift_hz / constants.clock_frequency_hz,
        target_excitation: target,
        peak_excitation: peak,
        ensemble_coverage: 1.0,
        occupied_fraction: options.occupied_fraction,
        mean_rabi: shape.mean_rabi(),
    })
}

/// How the pulse duration follows the bare Rabi frequency across a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulsePolicy {
    /// Pulse time fixed; area changes with Ω₀ᴮ.
    FixedTime(f64),
    /// Pulse area Ω₀ᴮ·t held fixed.
    FixedArea(f64),
}

impl PulsePolicy {
    pub fn pulse_time(&self, omega0b: f64) -> f64 {
        match *self {
            PulsePolicy::FixedTime(t) => t,
            PulsePolicy::FixedArea(area) => area / omega0b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    pub ensemble: ThermalEnsemble,
    pub geometry: TrapGeometry,
    pub pulse: PulsePolicy,
    pub target_excitation: f64,
    pub options: LockOptions,
    pub constants: Constants,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub u: f64,
    pub omega0b: f64,
    pub temperature: f64,
    pub eta_z: f64,
    pub result: ShiftResult,
}

/// Clock shift on every (u, Ω₀ᴮ) grid point, returned in grid order (u outer).
pub fn suppression_surface(u_grid: &[f64], omega0b_grid: &[f64], spec: &SurfaceSpec) -> Result<Vec<SurfaceRow>> {
    if u_grid.is_empty() || omega0b_grid.is_empty() {
        return Err(domain("surface grids must be non-empty"));
    }
    let points: Vec<(f64, f64)> =
        u_grid.iter().flat_map(|&u| omega0b_grid.iter().map(move |&o| (u, o))).collect();
    points
        .par_iter()
        .map(|&(u, omega0b)| {
            let geometry = spec.geometry.with_interaction(u)?;
            let drive = DriveParams::new(omega0b, 0.0, spec.pulse.pulse_time(omega0b), spec.target_excitation)?;
            let result = clock_shift(&spec.ensemble, &drive, &geometry, &spec.options, &spec.constants)?;
            Ok(SurfaceRow { u, omega0b, temperature: spec.ensemble.temperature(), eta_z: geometry.eta_z(), result })
        })
        .collect()
}

/// Experimental conditions entering the measured-shift rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftConditions {
    pub omega_z: f64,
    pub temperature: f64,
}

/// Theory model evaluated at varying (ω_Z, T_Z) for one u.
///
/// η_Z follows η_ref·√(ω_ref/ω_Z) since k_Z is fixed while a_ho changes.
#[derive(Debug, Clone)]
pub struct RescaleModel {
    pub u: f64,
    pub reference_omega_z: f64,
    pub reference_eta_z: f64,
    pub eta_y: f64,
    pub omega_perp: f64,
    pub drive: DriveParams,
    pub coverage: f64,
    pub options: LockOptions,
    pub constants: Constants,
    /// |Δν^T| below this (rad/s) makes the ratio undefined.
    pub floor: f64,
}

impl RescaleModel {
    pub fn theory_shift(&self, conditions: &ShiftConditions) -> Result<ShiftResult> {
        let eta_z = self.reference_eta_z * (self.reference_omega_z / conditions.omega_z).sqrt();
        let geometry =
            TrapGeometry::new(&self.constants, self.omega_perp, self.omega_perp, conditions.omega_z, self.eta_y, eta_z, 0.0)?
                .with_interaction(self.u)?;
        let ensemble = thermal_ensemble(
            2,
            conditions.temperature,
            conditions.omega_z,
            EnsemblePolicy::Enumeration { coverage: self.coverage },
            0,
            &self.constants,
        )?;
        clock_shift(&ensemble, &self.drive, &geometry, &self.options, &self.constants)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaled {
    pub measured: f64,
    pub rescaled: f64,
    /// Δν^T at the measured conditions, rad/s.
    pub theory_at_conditions: f64,
    /// Δν^T at the fixed conditions, rad/s.
    pub theory_at_fixed: f64,
}

fn rescale_with(measured: f64, at_conditions: f64, at_fixed: f64, floor: f64) -> Result<Rescaled> {
    if at_conditions.abs() < floor {
        return Err(Error::RescaleUndefined(format!(
            "theory shift {at_conditions} rad/s at the measured conditions is below the floor {floor}"
        )));
    }
    Ok(Rescaled { measured, rescaled: measured * at_fixed / at_conditions, theory_at_conditions: at_conditions, theory_at_fixed: at_fixed })
}

/// measured × Δν^T(fix)/Δν^T(i).
pub fn rescale_shift(
    measured: f64,
    conditions: &ShiftConditions,
    fixed: &ShiftConditions,
    model: &RescaleModel,
) -> Result<Rescaled> {
    let at_conditions = model.theory_shift(conditions)?.shift;
    let at_fixed = if conditions == fixed { at_conditions } else { model.theory_shift(fixed)?.shift };
    rescale_with(measured, at_conditions, at_fixed, model.floor)
}

/// [`rescale_shift`] over many points, evaluating the fixed-condition theory once.
pub fn rescale_series(
    points: &[(f64, ShiftConditions)],
    fixed: &ShiftConditions,
    model: &RescaleModel,
) -> Result<Vec<Rescaled>> {
    let at_fixed = model.theory_shift(fixed)?.shift;
    points
        .iter()
        .map(|(measured, conditions)| {
            let at_conditions = if conditions == fixed { at_fixed } else { model.theory_shift(conditions)?.shift };
            rescale_with(*measured, at_conditions, at_fixed, model.floor)
        })
        .collect()
}
