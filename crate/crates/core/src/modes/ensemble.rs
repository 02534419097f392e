use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::overlap::OverlapSeries;
use crate::error::{domain, ensure_positive, Error, Result};
use crate::physunits::Constants;

pub const DEFAULT_COVERAGE: f64 = 0.999;
pub const DEFAULT_SAMPLES: usize = 2000;
const MAX_ENUMERATED: usize = 20_000_000;
const MAX_REJECTIONS: usize = 1_000_000;

/// Occupied axial modes of one site, strictly increasing, with a Boltzmann weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeConfig {
    modes: Vec<u32>,
    weight: f64,
}

impl ModeConfig {
    pub fn new(modes: Vec<u32>, weight: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(domain("mode configuration must contain at least one mode"));
        }
        if modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain(format!("modes must be strictly increasing, got {modes:?}")));
        }
        ensure_positive("configuration weight", weight)?;
        Ok(Self { modes, weight })
    }

    pub fn modes(&self) -> &[u32] {
        &self.modes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn energy_quanta(&self) -> u64 {
        self.modes.iter().map(|&m| u64::from(m)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsemblePolicy {
    /// All configurations by increasing energy until `coverage` of the partition sum is captured.
    Enumeration { coverage: f64 },
    /// Monte Carlo draws from the single-particle Boltzmann law, collisions rejected.
    Sampling { samples: usize },
}

impl EnsemblePolicy {
    /// Enumeration for N ≤ 2, sampling otherwise.
    pub fn default_for(n_atoms: usize) -> Self {
        if n_atoms <= 2 {
            EnsemblePolicy::Enumeration { coverage: DEFAULT_COVERAGE }
        } else {
            EnsemblePolicy::Sampling { samples: DEFAULT_SAMPLES }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEnsemble {
    configs: Vec<ModeConfig>,
    temperature: f64,
    omega_z: f64,
    n_max: u32,
    coverage: f64,
}

impl ThermalEnsemble {
    /// Ensemble built from explicit configurations; weights are renormalized.
    pub fn from_configs(configs: Vec<ModeConfig>, temperature: f64, omega_z: f64, coverage: f64) -> Result<Self> {
        if configs.is_empty() {
            return Err(domain("ensemble must contain at least one configuration"));
        }
        let n = configs[0].len();
        if configs.iter().any(|c| c.len() != n) {
            return Err(domain("all configurations must hold the same number of atoms"));
        }
        let total: f64 = configs.iter().map(|c| c.weight).sum();
        let configs: Vec<ModeConfig> =
            configs.into_iter().map(|c| ModeConfig { weight: c.weight / total, ..c }).collect();
        let n_max = configs.iter().flat_map(|c| c.modes.iter().copied()).max().unwrap_or(0);
        Ok(Self { configs, temperature, omega_z, n_max, coverage })
    }

    /// A single configuration with unit weight.
    pub fn single(modes: Vec<u32>) -> Result<Self> {
        Self::from_configs(vec![ModeConfig::new(modes, 1.0)?], 0.0, 0.0, 1.0)
    }

    pub fn configs(&self) -> &[ModeConfig] {
        &self.configs
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn omega_z(&self) -> f64 {
        self.omega_z
    }
    pub fn n_max(&self) -> u32 {
        self.n_max
    }
    pub fn coverage(&self) -> f64 {
        self.coverage
    }
    pub fn n_atoms(&self) -> usize {
        self.configs[0].len()
    }
    pub fn len(&self) -> usize {
        self.configs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Σ_c w_c f(c).
    pub fn weighted_mean(&self, mut f: impl FnMut(&ModeConfig) -> f64) -> f64 {
        self.configs.iter().map(|c| c.weight * f(c)).sum()
    }

    /// Columnar text: header line, then one row per configuration.
    pub fn to_columnar(&self) -> String {
        let mut out = String::new();
        let n = self.n_atoms();
        let _ = writeln!(
            out,
            "# temperature_K={:e} omegaZ_rad_s={:e} coverage={:.15}",
            self.temperature, self.omega_z, self.coverage
        );
        for j in 0..n {
            let _ = write!(out, "n{} ", j + 1);
        }
        out.push_str("weight\n");
        for c in &self.configs {
            for m in &c.modes {
                let _ = write!(out, "{m} ");
            }
            let _ = writeln!(out, "{:e}", c.weight);
        }
        out
    }

    pub fn from_columnar(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let meta = lines.next().ok_or_else(|| domain("empty ensemble text"))?;
        let mut temperature = 0.0;
        let mut omega_z = 0.0;
        let mut coverage = 1.0;
        for field in meta.trim_start_matches('#').split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| domain(format!("bad metadata field {field}")))?;
            let value: f64 = value.parse().map_err(|_| domain(format!("bad metadata value {field}")))?;
            match key {
                "temperature_K" => temperature = value,
                "omegaZ_rad_s" => omega_z = value,
                "coverage" => coverage = value,
                _ => return Err(domain(format!("unknown metadata key {key}"))),
            }
        }
        lines.next().ok_or_else(|| domain("missing column header"))?;
        let mut configs = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (weight, modes) = fields.split_last().ok_or_else(|| domain("empty row"))?;
            let modes = modes
                .iter()
                .map(|s| s.parse::<u32>().map_err(|_| domain(format!("bad mode index {s}"))))
                .collect::<Result<Vec<_>>>()?;
            let weight: f64 = weight.parse().map_err(|_| domain(format!("bad weight {weight}")))?;
            configs.push(ModeConfig::new(modes, weight)?);
        }
        Self::from_configs(configs, temperature, omega_z, coverage)
    }
}

/// Boltzmann ensemble of N-atom mode configurations at axial temperature `temperature`.
pub fn thermal_ensemble(
    n_atoms: usize,
    temperature: f64,
    omega_z: f64,
    policy: EnsemblePolicy,
    seed: u64,
    constants: &Constants,
) -> Result<ThermalEnsemble> {
    if n_atoms == 0 {
        return Err(domain("particle count must be at least 1"));
    }
    ensure_positive("temperature", temperature)?;
    ensure_positive("omegaZ", omega_z)?;
    let x = constants.reduced_inverse_temperature(omega_z, temperature)?;
    match policy {
        EnsemblePolicy::Enumeration { coverage } => enumerate(n_atoms, x, coverage, temperature, omega_z),
        EnsemblePolicy::Sampling { samples } => sample(n_atoms, x, samples, seed, temperature, omega_z),
    }
}

/// ln of the partition sum over strictly increasing N-tuples, relative to the ground configuration.
fn log_partition(n_atoms: usize, x: f64) -> f64 {
    (1..=n_atoms).map(|k| -(-(-(k as f64) * x).exp_m1()).ln()).sum()
}

fn push_shell(n_atoms: usize, shell: u64, out: &mut Vec<Vec<u32>>) {
    fn rec(start: u64, left: usize, sum: u64, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            if sum >= start {
                prefix.push(sum as u32);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let l = left as u64;
        let mut v = start;
        // remaining values exceed v, so sum ≥ l·v + l(l−1)/2
        while l * v + l * (l - 1) / 2 <= sum {
            prefix.push(v as u32);
            rec(v + 1, left - 1, sum - v, prefix, out);
            prefix.pop();
            v += 1;
        }
    }
    rec(0, n_atoms, shell, &mut Vec::with_capacity(n_atoms), out);
}

fn enumerate(n_atoms: usize, x: f64, coverage: f64, temperature: f64, omega_z: f64) -> Result<ThermalEnsemble> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(domain(format!("coverage must lie in (0,1), got {coverage}")));
    }
    let ground = (n_atoms * (n_atoms - 1) / 2) as u64;
    let log_z = log_partition(n_atoms, x);
    let z = log_z.exp();
    let mut modes: Vec<Vec<u32>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut captured = 0.0;
    let mut shell = ground;
    loop {
        let w = (-x * (shell - ground) as f64).exp();
        if w <= 0.0 {
            break;
        }
        let before = modes.len();
        push_shell(n_atoms, shell, &mut modes);
        let added = modes.len() - before;
        weights.extend(std::iter::repeat_n(w, added));
        captured += w * added as f64;
        if modes.len() > MAX_ENUMERATED {
            return Err(Error::Capacity(format!(
                "enumeration exceeded {MAX_ENUMERATED} configurations; use sampling"
            )));
        }
        if captured >= coverage * z {
            break;
        }
        shell += 1;
    }
    let achieved = (captured / z).min(1.0);
    if achieved < coverage {
        return Err(Error::Convergence(format!(
            "enumeration reached coverage {achieved} below target {coverage}"
        )));
    }
    let configs = modes
        .into_iter()
        .zip(weights)
        .map(|(m, w)| ModeConfig { modes: m, weight: w })
        .collect();
    ThermalEnsemble::from_configs(configs, temperature, omega_z, achieved)
}

fn sample(n_atoms: usize, x: f64, samples: usize, seed: u64, temperature: f64, omega_z: f64) -> Result<ThermalEnsemble> {
    if samples == 0 {
        return Err(domain("sample count must be positive"));
    }
    let p = -(-x).exp_m1();
    let geometric = Geometric::new(p).map_err(|e| domain(format!("occupation law: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = 1.0 / samples as f64;
    let mut configs = Vec::with_capacity(samples);
    let mut draw = vec![0u32; n_atoms];
    for _ in 0..samples {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_REJECTIONS {
                return Err(Error::Convergence(
                    "collision rejection did not produce distinct modes; temperature too low for sampling".into(),
                ));
            }
            for slot in draw.iter_mut() {
                *slot = u32::try_from(geometric.sample(&mut rng)).unwrap_or(u32::MAX);
            }
            draw.sort_unstable();
            if draw.windows(2).all(|w| w[0] < w[1]) {
                break;
            }
        }
        configs.push(ModeConfig { modes: draw.clone(), weight });
    }
    ThermalEnsemble::from_configs(configs, temperature, omega_z, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanInteraction {
    /// Boltzmann average of u·I_{n,n'}/π over the enumerated pair ensemble.
    pub direct: f64,
    /// u √(π/40 · ħω_Z/(k_B T_Z)).
    pub closed_form: f64,
    pub relative_deviation: f64,
}

pub fn mean_interaction(temperature: f64, omega_z: f64, u: f64, constants: &Constants) -> Result<MeanInteraction> {
    let ensemble = thermal_ensemble(
        2,
        temperature,
        omega_z,
        EnsemblePolicy::Enumeration { coverage: DEFAULT_COVERAGE },
        0,
        constants,
    )?;
    let series = OverlapSeries::new(ensemble.n_max());
    let direct = u * ensemble.weighted_mean(|c| series.coefficient(c.modes()[0], c.modes()[1])) / PI;
    let x = constants.reduced_inverse_temperature(omega_z, temperature)?;
    let closed_form = u * (PI / 40.0 * x).sqrt();
    let relative_deviation = if closed_form == 0.0 { 0.0 } else { (direct - closed_form).abs() / closed_form.abs() };
    Ok(MeanInteraction { direct, closed_form, relative_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physunits::hz_to_angular;

    fn temperature_for(x: f64, omega: f64, c: &Constants) -> f64 {
        c.hbar * omega / (c.kb * x)
    }

    #[test]
    fn config_invariants() {
        assert!(ModeConfig::new(vec![1, 1], 1.0).is_err());
        assert!(ModeConfig::new(vec![2, 1], 1.0).is_err());
        assert!(ModeConfig::new(vec![0, 1], 0.0).is_err());
        assert!(ModeConfig::new(vec![0, 3, 9], 0.5).is_ok());
    }

    #[test]
    fn zero_temperature_single_atom() {
        let c = Constants::default();
        let e = thermal_ensemble(1, 1e-12, 1e4, EnsemblePolicy::default_for(1), 0, &c).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.configs()[0].modes(), &[0]);
        assert_eq!(e.configs()[0].weight(), 1.0);
    }

    #[test]
    fn pair_weights_match_boltzmann_ratios() {
        let c = Constants::default();
        let omega = hz_to_angular(700.0);
        let t = temperature_for(1.0, omega, &c);
        let e = thermal_ensemble(2, t, omega, EnsemblePolicy::default_for(2), 0, &c).unwrap();
        let w = |m: [u32; 2]| e.configs().iter().find(|cf| cf.modes() == m).unwrap().weight();
        let e1 = std::f64::consts::E;
        assert!((w([0, 2]) / w([0, 1]) - 1.0 / e1).abs() < 1e-12);
        assert!((w([0, 3]) / w([1, 2]) - 1.0).abs() < 1e-12);
        assert!((w([1, 3]) / w([0, 1]) - 1.0 / (e1 * e1 * e1)).abs() < 1e-12);
        let total: f64 = e.configs().iter().map(|c| c.weight()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_coverage_at_seven_microkelvin() {
        let c = Constants::default();
        let e = thermal_ensemble(2, 7e-6, hz_to_angular(700.0), EnsemblePolicy::default_for(2), 0, &c).unwrap();
        assert!(e.coverage() >= 0.999);
        assert!(e.n_max() > 300 && e.n_max() < 5000, "nMax = {}", e.n_max());
        // tail bound: the neglected mass is the partition sum minus the captured shells
        let x = c.reduced_inverse_temperature(hz_to_angular(700.0), 7e-6).unwrap();
        let shell_max = e.configs().iter().map(|c| c.energy_quanta()).max().unwrap();
        let captured: f64 = (1..=shell_max).map(|s| ((s + 1) / 2) as f64 * (-x * (s - 1) as f64).exp()).sum();
        let z = 1.0 / ((1.0 - (-x).exp()) * (1.0 - (-2.0 * x).exp()));
        assert!((captured / z - e.coverage()).abs() < 1e-9);
    }

    #[test]
    fn triple_enumeration_partition_consistency() {
        let c = Constants::default();
        let omega = 1e4;
        let t = temperature_for(0.7, omega, &c);
        let e = thermal_ensemble(3, t, omega, EnsemblePolicy::Enumeration { coverage: 0.99 }, 0, &c).unwrap();
        assert!(e.configs().iter().all(|c| c.modes().windows(2).all(|w| w[0] < w[1])));
        assert_eq!(e.configs()[0].modes(), &[0, 1, 2]);
        assert!(e.coverage() >= 0.99);
    }

    #[test]
    fn sampling_is_reproducible() {
        let c = Constants::default();
        let p = EnsemblePolicy::Sampling { samples: 300 };
        let a = thermal_ensemble(3, 3e-6, hz_to_angular(700.0), p, 42, &c).unwrap();
        let b = thermal_ensemble(3, 3e-6, hz_to_angular(700.0), p, 42, &c).unwrap();
        let d = thermal_ensemble(3, 3e-6, hz_to_angular(700.0), p, 43, &c).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn domain_errors() {
        let c = Constants::default();
        let p = EnsemblePolicy::default_for(2);
        assert!(thermal_ensemble(0, 1e-6, 1e3, p, 0, &c).is_err());
        assert!(thermal_ensemble(2, 0.0, 1e3, p, 0, &c).is_err());
        assert!(thermal_ensemble(2, -1.0, 1e3, p, 0, &c).is_err());
    }

    #[test]
    fn columnar_round_trip() {
        let c = Constants::default();
        let omega = hz_to_angular(700.0);
        let e = thermal_ensemble(2, temperature_for(0.5, omega, &c), omega, EnsemblePolicy::default_for(2), 0, &c)
            .unwrap();
        let back = ThermalEnsemble::from_columnar(&e.to_columnar()).unwrap();
        assert_eq!(back.len(), e.len());
        for (a, b) in back.configs().iter().zip(e.configs()) {
            assert_eq!(a.modes(), b.modes());
            assert!((a.weight() - b.weight()).abs() < 1e-12 * b.weight());
        }
    }

    #[test]
    fn mean_interaction_zero_u() {
        let c = Constants::default();
        let m = mean_interaction(5e-6, hz_to_angular(700.0), 0.0, &c).unwrap();
        assert_eq!(m.direct, 0.0);
        assert_eq!(m.closed_form, 0.0);
    }

    #[test]
    fn mean_interaction_at_hundred_quanta() {
        let c = Constants::default();
        let omega = hz_to_angular(700.0);
        let m = mean_interaction(temperature_for(0.01, omega, &c), omega, 1.0, &c).unwrap();
        assert!((m.closed_form - (PI / 4000.0).sqrt()).abs() < 1e-12);
        assert!(m.relative_deviation < 0.1, "{m:?}");
    }
}
