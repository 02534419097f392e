//! Sectioned TOML scenario configuration. Frequencies are entered in Hz and
//! converted to rad/s when the configuration is resolved.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::Protocol;
use crate::lineshape::{LockOptions, PulsePolicy};
use crate::modes::EnsemblePolicy;
use crate::physunits::{hz_to_angular, Constants, TrapGeometry};
use crate::spinmodel::{DriveParams, InteractionMode};
use crate::tunneling::BandWeighting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Lineshape,
    Shift,
    Surface,
    Fig4,
    Tunneling,
    Analyze,
    Synth,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Lineshape => "lineshape",
            Scenario::Shift => "shift",
            Scenario::Surface => "surface",
            Scenario::Fig4 => "fig4",
            Scenario::Tunneling => "tunneling",
            Scenario::Analyze => "analyze",
            Scenario::Synth => "synth",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub lock: LockSection,
    #[serde(default)]
    pub lineshape: LineshapeSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub surface: SurfaceSection,
    #[serde(default)]
    pub fig4: Fig4Section,
    #[serde(default)]
    pub tunneling: TunnelingSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub clock_frequency_hz: Option<f64>,
    pub lattice_wavelength_m: Option<f64>,
    pub atom_mass_kg: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub omega_x_hz: f64,
    pub omega_y_hz: f64,
    pub omega_z_hz: f64,
    pub eta_y: f64,
    pub eta_z: f64,
    /// At most one of the three interaction inputs may be given; none means u = 0.
    pub u_hz: Option<f64>,
    pub u_over_omega0: Option<f64>,
    pub scattering_length_a0: Option<f64>,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            omega_x_hz: 80e3,
            omega_y_hz: 80e3,
            omega_z_hz: 700.0,
            eta_y: 0.0,
            eta_z: 0.06,
            u_hz: None,
            u_over_omega0: None,
            scattering_length_a0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PulseMode {
    #[default]
    FixedArea,
    FixedTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// Ω₀ᴮ/2π; defaults to the π-pulse value 1/(2t).
    pub omega0b_hz: Option<f64>,
    pub pulse_time: f64,
    pub target_excitation: f64,
    pub pulse_mode: PulseMode,
}

impl DriveSection {
    /// Configured Ω₀ᴮ/2π, or the π-pulse value; a placeholder of 1 Hz when the
    /// pulse time itself is invalid so that the violation names the pulse time.
    pub fn omega0b_hz(&self) -> f64 {
        match self.omega0b_hz {
            Some(f) => f,
            None if self.pulse_time > 0.0 => 0.5 / self.pulse_time,
            None => 1.0,
        }
    }
}

impl Default for DriveSection {
    fn default() -> Self {
        Self { omega0b_hz: None, pulse_time: 0.08, target_excitation: 0.3, pulse_mode: PulseMode::FixedArea }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Auto,
    Enumeration,
    Sampling,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub n_atoms: usize,
    pub temperature: f64,
    pub policy: PolicyKind,
    pub coverage: f64,
    pub samples: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_atoms: 2,
            temperature: 6.5e-6,
            policy: PolicyKind::Auto,
            coverage: crate::modes::DEFAULT_COVERAGE,
            samples: crate::modes::DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    #[default]
    ExactPairwise,
    MeanU,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockSection {
    pub interaction: InteractionKind,
    pub scan_half_width: f64,
    pub scan_step: f64,
    pub tolerance: f64,
    pub scan_sites: usize,
    pub occupied_fraction: f64,
    /// Optional per-mode detuning table δ_n/2π in Hz, indexed by axial mode number.
    pub mode_detunings_hz: Option<Vec<f64>>,
}

impl Default for LockSection {
    fn default() -> Self {
        let d = LockOptions::default();
        Self {
            interaction: InteractionKind::ExactPairwise,
            scan_half_width: d.scan_half_width,
            scan_step: d.scan_step,
            tolerance: d.tolerance,
            scan_sites: d.scan_sites,
            occupied_fraction: d.occupied_fraction,
            mode_detunings_hz: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineshapeSection {
    /// Half-width of the output grid in units of Ω₀ᴮ.
    pub span_over_omega0: f64,
    pub points: usize,
}

impl Default for LineshapeSection {
    fn default() -> Self {
        Self { span_over_omega0: 5.0, points: 201 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub u_over_omega0: Vec<f64>,
    /// Also evaluate the second-order thermal estimate.
    pub perturbative: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { u_over_omega0: vec![0.02, 0.2, 1.0, 5.0, 20.0, 100.0, 1000.0], perturbative: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    pub u_over_omega0: Vec<f64>,
    pub omega0b_hz: Vec<f64>,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { u_over_omega0: vec![0.1, 1.0, 10.0, 100.0], omega0b_hz: vec![6.25, 12.5] }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig4Point {
    pub omega_z_hz: f64,
    pub temperature: f64,
    pub measured: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig4Section {
    pub fixed_omega_z_hz: f64,
    pub fixed_temperature: f64,
    /// η_Z at `reference_omega_z_hz`; η_Z at other ω_Z follows 1/√ω_Z.
    pub reference_omega_z_hz: f64,
    pub reference_eta_z: Option<f64>,
    /// Minimum |Δν^T| (Hz) accepted as a rescaling denominator.
    pub floor_hz: f64,
    pub points: Vec<Fig4Point>,
}

impl Default for Fig4Section {
    fn default() -> Self {
        Self {
            fixed_omega_z_hz: 700.0,
            fixed_temperature: 3.5e-6,
            reference_omega_z_hz: 700.0,
            reference_eta_z: None,
            floor_hz: 1e-9,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TunnelingSection {
    pub depth_er: f64,
    pub n_bands: usize,
    pub n_q: usize,
    pub plane_wave_cutoff: usize,
    pub omega_y_hz: f64,
    pub temperatures: Vec<f64>,
    pub weighting: WeightingKind,
    pub omega_dy_hz: f64,
    pub mean_site_index: u32,
    pub mean_u_hz: f64,
    pub regime_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightingKind {
    #[default]
    HarmonicLadder,
    BandCenter,
}

impl Default for TunnelingSection {
    fn default() -> Self {
        Self {
            depth_er: 64.0,
            n_bands: 8,
            n_q: 101,
            plane_wave_cutoff: 30,
            omega_y_hz: 55e3,
            temperatures: vec![2.5e-6, 4e-6],
            weighting: WeightingKind::HarmonicLadder,
            omega_dy_hz: 485.0,
            mean_site_index: 25,
            mean_u_hz: 0.0,
            regime_threshold: crate::tunneling::DEFAULT_REGIME_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Record CSV; relative paths resolve against the configuration file.
    pub record: Option<PathBuf>,
    pub string_length: usize,
    pub startup_cut: usize,
    pub protocols: Vec<Protocol>,
    pub taus: Vec<usize>,
    pub mc_trials: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            record: None,
            string_length: 4,
            startup_cut: 0,
            protocols: vec![Protocol::Pooled, Protocol::Binned, Protocol::ByDay, Protocol::BySegment],
            taus: vec![1, 2, 4, 8, 16, 32, 64],
            mc_trials: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub true_shift_hz: f64,
    pub drift: Vec<f64>,
    pub noise_sigma_hz: f64,
    pub length: usize,
    pub run_length: usize,
    pub runs_per_day: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            true_shift_hz: 0.5,
            drift: vec![0.0, 1e-3, -1e-7],
            noise_sigma_hz: 1.0,
            length: 10_000,
            run_length: 1_000,
            runs_per_day: 3,
        }
    }
}

/// One violated invariant, tagged with the type or section that owns it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub owner: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.owner, self.message)
    }
}

/// Validated physical inputs shared by the scenarios.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub constants: Constants,
    pub geometry: TrapGeometry,
    pub drive: DriveParams,
    pub temperature: f64,
    pub n_atoms: usize,
    pub policy: EnsemblePolicy,
    pub lock: LockOptions,
    pub pulse: PulsePolicy,
}

struct Collector(Vec<Violation>);

impl Collector {
    fn check<T>(&mut self, owner: &'static str, r: crate::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(Violation { owner, message: e.to_string() });
                None
            }
        }
    }

    fn require(&mut self, owner: &'static str, ok: bool, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation { owner, message: message.into() });
        }
    }
}

impl ScenarioConfig {
    /// Checks every parameter against module invariants, collecting all violations.
    pub fn resolve(&self) -> Result<Resolved, Vec<Violation>> {
        let mut v = Collector(Vec::new());
        let mut constants = Constants::default();
        if let Some(f) = self.constants.clock_frequency_hz {
            constants.clock_frequency_hz = f;
        }
        if let Some(l) = self.constants.lattice_wavelength_m {
            constants.lattice_wavelength = l;
        }
        if let Some(m) = self.constants.atom_mass_kg {
            constants.m_sr = m;
        }
        v.check("Constants", constants.validate());

        let t = &self.trap;
        let drive = v.check(
            "DriveParams",
            DriveParams::new(
                hz_to_angular(self.drive.omega0b_hz()),
                0.0,
                self.drive.pulse_time,
                self.drive.target_excitation,
            ),
        );
        let base = v.check(
            "TrapGeometry",
            TrapGeometry::new(
                &constants,
                hz_to_angular(t.omega_x_hz),
                hz_to_angular(t.omega_y_hz),
                hz_to_angular(t.omega_z_hz),
                t.eta_y,
                t.eta_z,
                0.0,
            ),
        );
        let given = [t.u_hz.is_some(), t.u_over_omega0.is_some(), t.scattering_length_a0.is_some()];
        v.require(
            "TrapGeometry",
            given.iter().filter(|g| **g).count() <= 1,
            "give at most one of u_hz, u_over_omega0, scattering_length_a0",
        );
        let geometry = match (base, drive) {
            (Some(g), Some(d)) => {
                let r = if let Some(u) = t.u_hz {
                    g.with_interaction(hz_to_angular(u))
                } else if let Some(x) = t.u_over_omega0 {
                    g.with_interaction(x * d.omega0b())
                } else if let Some(a) = t.scattering_length_a0 {
                    g.with_scattering_length(a * constants.a0)
                } else {
                    Ok(g)
                };
                v.check("TrapGeometry", r)
            }
            _ => None,
        };

        let e = &self.ensemble;
        v.require("ThermalEnsemble", e.n_atoms >= 1, "n_atoms must be at least 1");
        v.require(
            "ThermalEnsemble",
            e.temperature > 0.0 && e.temperature.is_finite(),
            format!("temperature must be positive, got {}", e.temperature),
        );
        v.require(
            "EnsemblePolicy",
            e.coverage > 0.0 && e.coverage <= 1.0,
            format!("coverage must lie in (0, 1], got {}", e.coverage),
        );
        v.require("EnsemblePolicy", e.samples > 0, "samples must be positive");
        let policy = match e.policy {
            PolicyKind::Auto => match EnsemblePolicy::default_for(e.n_atoms) {
                EnsemblePolicy::Enumeration { .. } => EnsemblePolicy::Enumeration { coverage: e.coverage },
                EnsemblePolicy::Sampling { .. } => EnsemblePolicy::Sampling { samples: e.samples },
            },
            PolicyKind::Enumeration => EnsemblePolicy::Enumeration { coverage: e.coverage },
            PolicyKind::Sampling => EnsemblePolicy::Sampling { samples: e.samples },
        };

        let l = &self.lock;
        let lock = LockOptions {
            interaction: match l.interaction {
                InteractionKind::ExactPairwise => InteractionMode::ExactPairwise,
                InteractionKind::MeanU => InteractionMode::MeanU,
            },
            scan_half_width: l.scan_half_width,
            scan_step: l.scan_step,
            tolerance: l.tolerance,
            scan_sites: l.scan_sites,
            occupied_fraction: l.occupied_fraction,
            mode_detunings: l.mode_detunings_hz.as_ref().map(|v| v.iter().copied().map(hz_to_angular).collect()),
        };
        v.check("LockOptions", lock.validate());

        let pulse = match self.drive.pulse_mode {
            PulseMode::FixedArea => PulsePolicy::FixedArea(
                hz_to_angular(self.drive.omega0b_hz()) * self.drive.pulse_time,
            ),
            PulseMode::FixedTime => PulsePolicy::FixedTime(self.drive.pulse_time),
        };

        self.validate_scenario(&mut v);

        match (v.0.is_empty(), geometry, drive) {
            (true, Some(geometry), Some(drive)) => Ok(Resolved {
                constants,
                geometry,
                drive,
                temperature: e.temperature,
                n_atoms: e.n_atoms,
                policy,
                lock,
                pulse,
            }),
            _ => Err(v.0),
        }
    }

    fn validate_scenario(&self, v: &mut Collector) {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match self.scenario {
            Scenario::Lineshape => {
                v.require("lineshape", self.lineshape.points >= 3, "need at least 3 grid points");
                v.require(
                    "lineshape",
                    self.lineshape.span_over_omega0 >= 4.0,
                    "span_over_omega0 must be at least 4 so the grid covers ±4Ω̄",
                );
            }
            Scenario::Shift => {
                v.require("sweep", !self.sweep.u_over_omega0.is_empty(), "u_over_omega0 must be non-empty");
                v.require(
                    "sweep",
                    self.sweep.u_over_omega0.iter().all(|u| u.is_finite()),
                    "u values must be finite",
                );
            }
            Scenario::Surface => {
                v.require(
                    "surface",
                    !self.surface.u_over_omega0.is_empty() && !self.surface.omega0b_hz.is_empty(),
                    "surface grids must be non-empty",
                );
                v.require(
                    "surface",
                    self.surface.omega0b_hz.iter().copied().all(positive),
                    "Ω₀ᴮ grid values must be positive",
                );
            }
            Scenario::Fig4 => {
                let f = &self.fig4;
                v.require("fig4", !f.points.is_empty(), "at least one measured point is required");
                v.require(
                    "fig4",
                    positive(f.fixed_omega_z_hz) && positive(f.fixed_temperature) && positive(f.reference_omega_z_hz),
                    "fixed and reference conditions must be positive",
                );
                v.require(
                    "fig4",
                    f.points.iter().all(|p| positive(p.omega_z_hz) && positive(p.temperature) && p.measured.is_finite()),
                    "every point needs positive omega_z_hz and temperature and a finite measurement",
                );
                v.require("fig4", f.floor_hz >= 0.0, "floor_hz must be non-negative");
            }
            Scenario::Tunneling => {
                let tn = &self.tunneling;
                v.require("BandStructure", positive(tn.depth_er), "depth_er must be positive");
                v.require(
                    "BandStructure",
                    tn.plane_wave_cutoff >= 2 * tn.n_bands + 5,
                    "plane_wave_cutoff must be at least 2·n_bands + 5",
                );
                v.require("BandStructure", tn.n_bands >= 1 && tn.n_q >= 2, "need n_bands ≥ 1 and n_q ≥ 2");
                v.require("tunneling", positive(tn.omega_y_hz), "omega_y_hz must be positive");
                v.require(
                    "tunneling",
                    !tn.temperatures.is_empty() && tn.temperatures.iter().copied().all(positive),
                    "temperatures must be positive and non-empty",
                );
                v.require("TiltParams", positive(tn.omega_dy_hz) && tn.mean_site_index > 0, "tilt parameters must be positive");
                v.require("tunneling", positive(tn.regime_threshold), "regime_threshold must be positive");
            }
            Scenario::Analyze => {
                let a = &self.analysis;
                v.require("analysis", a.record.is_some(), "analysis.record must name a record CSV");
                v.require("analysis", a.string_length >= 2, "string_length must be at least 2");
                v.require("analysis", !a.protocols.is_empty(), "at least one protocol is required");
                v.require("analysis", a.taus.iter().all(|&t| t > 0), "taus must be positive");
                v.require("analysis", a.mc_trials >= 10, "mc_trials must be at least 10");
            }
            Scenario::Synth => {
                let s = &self.synth;
                v.require("synth", s.length > 0 && s.length % 2 == 0, "length must be positive and even");
                v.require("synth", s.run_length > 0 && s.runs_per_day > 0, "run_length and runs_per_day must be positive");
                v.require("synth", s.noise_sigma_hz >= 0.0 && s.noise_sigma_hz.is_finite(), "noise_sigma_hz must be non-negative");
            }
        }
    }

    pub fn weighting(&self) -> BandWeighting {
        match self.tunneling.weighting {
            WeightingKind::HarmonicLadder => BandWeighting::HarmonicLadder,
            WeightingKind::BandCenter => BandWeighting::BandCenter,
        }
    }
}
