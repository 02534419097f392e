//! Bloch bands of the sin² lattice along Y, band tunneling energies, thermal
//! averages and tilt-suppressed effective tunneling.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::physunits::Constants;

const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    /// Lattice depth in recoil energies.
    pub depth: f64,
    /// Quasimomenta in units of k_L over the first zone [−1, 1].
    pub quasimomenta: Vec<f64>,
    /// energies[b][iq] in recoil energies.
    pub energies: Vec<Vec<f64>>,
    /// Bands lying entirely below the lattice depth.
    pub bound_band_count: usize,
}

fn plane_wave_levels(depth: f64, q: f64, cutoff: usize, n_bands: usize) -> Vec<f64> {
    // V sin²(k_L x) = V/2 − (V/4)(e^{2ik_L x} + e^{−2ik_L x})
    let dim = 2 * cutoff + 1;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let l = i as f64 - cutoff as f64;
        h[(i, i)] = (q + 2.0 * l).powi(2) + depth / 2.0;
        if i + 1 < dim {
            h[(i, i + 1)] = -depth / 4.0;
            h[(i + 1, i)] = -depth / 4.0;
        }
    }
    let mut levels: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.truncate(n_bands);
    levels
}

/// Bands from the Fourier representation of −d²/dx² + V sin²(k_L x) (energies in E_r).
pub fn band_structure(depth: f64, n_bands: usize, n_q: usize, plane_wave_cutoff: usize) -> Result<BandStructure> {
    ensure_positive("lattice depth", depth)?;
    if n_bands == 0 || n_q < 2 {
        return Err(domain("need at least one band and two quasimomenta"));
    }
    if plane_wave_cutoff < 2 * n_bands + 5 {
        return Err(domain(format!(
            "plane-wave cutoff {plane_wave_cutoff} below 2·bands+5 = {}",
            2 * n_bands + 5
        )));
    }
    for q in [0.0, 1.0] {
        let coarse = plane_wave_levels(depth, q, plane_wave_cutoff, n_bands);
        let fine = plane_wave_levels(depth, q, plane_wave_cutoff + 10, n_bands);
        let err = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err > CONVERGENCE_TOL {
            return Err(Error::Convergence(format!(
                "band energies change by {err:e} E_r when the cutoff grows past {plane_wave_cutoff}"
            )));
        }
    }
    let quasimomenta: Vec<f64> = (0..n_q).map(|i| -1.0 + 2.0 * i as f64 / (n_q - 1) as f64).collect();
    let mut energies = vec![Vec::with_capacity(n_q); n_bands];
    for &q in &quasimomenta {
        for (band, e) in plane_wave_levels(depth, q, plane_wave_cutoff, n_bands).into_iter().enumerate() {
            energies[band].push(e);
        }
    }
    let bound_band_count =
        energies.iter().take_while(|band| band.iter().copied().fold(f64::NEG_INFINITY, f64::max) < depth).count();
    Ok(BandStructure { depth, quasimomenta, energies, bound_band_count })
}

/// Tight-binding J = bandwidth/4.
pub fn band_tunneling(band: &[f64]) -> Result<f64> {
    if band.is_empty() {
        return Err(domain("empty band"));
    }
    let (lo, hi) = band.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    Ok((hi - lo) / 4.0)
}

/// h/J for J given in recoil energies.
pub fn tunneling_time(j_recoil: f64, constants: &Constants) -> Result<f64> {
    let er = constants.lattice_recoil_energy()?;
    Ok(constants.planck() / (j_recoil * er))
}

/// How bound bands are weighted in thermal averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandWeighting {
    /// exp(−b·ħω_Y/k_BT) for band index b.
    #[default]
    HarmonicLadder,
    /// exp(−(ε_b − ε_0)/k_BT) with ε_b the band-center energy.
    BandCenter,
}

fn band_weights(
    bands: &BandStructure,
    temp_y: f64,
    omega_y: f64,
    weighting: BandWeighting,
    constants: &Constants,
) -> Result<Vec<f64>> {
    ensure_positive("transverse temperature", temp_y)?;
    ensure_positive("transverse trap frequency", omega_y)?;
    let count = bands.bound_band_count.max(1);
    let er = constants.lattice_recoil_energy()?;
    let kt = constants.kb * temp_y;
    let centers: Vec<f64> = bands.energies[..count]
        .iter()
        .map(|b| {
            let (lo, hi) = b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
            0.5 * (lo + hi)
        })
        .collect();
    let raw: Vec<f64> = (0..count)
        .map(|b| match weighting {
            BandWeighting::HarmonicLadder => (-(b as f64) * constants.hbar * omega_y / kt).exp(),
            BandWeighting::BandCenter => (-(centers[b] - centers[0]) * er / kt).exp(),
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalTunneling {
    /// Thermal mean in recoil energies.
    pub mean_j: f64,
    /// h/⟨J⟩ in seconds.
    pub time: f64,
    pub band_weights: Vec<f64>,
}

/// Boltzmann average of J_b over the bound bands.
pub fn thermal_tunneling(
    bands: &BandStructure,
    temp_y: f64,
    omega_y: f64,
    weighting: BandWeighting,
    constants: &Constants,
) -> Result<ThermalTunneling> {
    average_over_bands(bands, temp_y, omega_y, weighting, constants, |j| j)
}

/// Boltzmann average of J_eff,b at the mean site offset of `tilt`.
pub fn thermal_effective_tunneling(
    bands: &BandStructure,
    temp_y: f64,
    omega_y: f64,
    weighting: BandWeighting,
    tilt: &TiltParams,
    constants: &Constants,
) -> Result<ThermalTunneling> {
    let offset = tilt.energy_offset(tilt.mean_site_index, constants)?;
    average_over_bands(bands, temp_y, omega_y, weighting, constants, |j| effective_from_offset(j, offset))
}

fn average_over_bands(
    bands: &BandStructure,
    temp_y: f64,
    omega_y: f64,
    weighting: BandWeighting,
    constants: &Constants,
    map: impl Fn(f64) -> f64,
) -> Result<ThermalTunneling> {
    let weights = band_weights(bands, temp_y, omega_y, weighting, constants)?;
    let mut mean_j = 0.0;
    for (w, band) in weights.iter().zip(&bands.energies) {
        mean_j += w * map(band_tunneling(band)?);
    }
    Ok(ThermalTunneling { mean_j, time: tunneling_time(mean_j, constants)?, band_weights: weights })
}

/// Linear tilt from the dipole-trap curvature across lattice sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltParams {
    /// Curvature frequency of the confinement along Y, rad/s.
    pub omega_dy: f64,
    pub mean_site_index: u32,
    /// Lattice spacing, m.
    pub lattice_spacing: f64,
}

impl TiltParams {
    pub fn new(omega_dy: f64, mean_site_index: u32, lattice_spacing: f64) -> Result<Self> {
        ensure_positive("tilt curvature frequency", omega_dy)?;
        ensure_positive("lattice spacing", lattice_spacing)?;
        if mean_site_index == 0 {
            return Err(domain("mean site index must be positive"));
        }
        Ok(Self { omega_dy, mean_site_index, lattice_spacing })
    }

    /// 2π·485 Hz, j̄ = 25, a = λ/2.
    pub fn default_for(constants: &Constants) -> Self {
        Self {
            omega_dy: 2.0 * std::f64::consts::PI * 485.0,
            mean_site_index: 25,
            lattice_spacing: constants.lattice_wavelength / 2.0,
        }
    }

    /// Δ_j = ½ m ω_DY² a² (j + ½), in recoil energies.
    pub fn energy_offset(&self, site_index: u32, constants: &Constants) -> Result<f64> {
        let er = constants.lattice_recoil_energy()?;
        Ok(0.5 * constants.m_sr * self.omega_dy.powi(2) * self.lattice_spacing.powi(2) * (site_index as f64 + 0.5) / er)
    }
}

fn effective_from_offset(j: f64, offset: f64) -> f64 {
    if j == 0.0 {
        return 0.0;
    }
    // J/√(1+(Δ/J)²) cannot round above J
    j / (offset / j).mul_add(offset / j, 1.0).sqrt()
}

/// J_eff = J²/√(J²+Δ_j²), all in recoil energies.
pub fn effective_tunneling(j_recoil: f64, tilt: &TiltParams, site_index: u32, constants: &Constants) -> Result<f64> {
    if !(j_recoil >= 0.0 && j_recoil.is_finite()) {
        return Err(domain(format!("tunneling energy must be finite and non-negative, got {j_recoil}")));
    }
    Ok(effective_from_offset(j_recoil, tilt.energy_offset(site_index, constants)?))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RegimeCheck {
    /// ⟨U⟩/ω_Y
    pub ratio: f64,
    pub negligible: bool,
}

pub const DEFAULT_REGIME_THRESHOLD: f64 = 0.05;

/// Whether interaction-assisted tunneling is negligible (⟨U⟩/ω_Y below `threshold`).
pub fn interaction_tunneling_regime_check(mean_u: f64, omega_y: f64, threshold: f64) -> Result<RegimeCheck> {
    ensure_positive("transverse trap frequency", omega_y)?;
    ensure_positive("regime threshold", threshold)?;
    let ratio = mean_u.abs() / omega_y;
    Ok(RegimeCheck { ratio, negligible: ratio < threshold })
}

/// CSV with columns band, q_over_kL, E_over_Er.
pub fn dispersion_csv(bands: &BandStructure) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| domain(format!("csv: {e}"));
    writer.write_record(["band", "q_over_kL", "E_over_Er"]).map_err(io)?;
    for (b, band) in bands.energies.iter().enumerate() {
        for (q, e) in bands.quasimomenta.iter().zip(band) {
            writer.write_record([b.to_string(), q.to_string(), e.to_string()]).map_err(io)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| domain(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| domain(format!("csv: {e}")))
}
