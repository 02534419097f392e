//! Physical constants, unit conversions and trap-derived parameters.
//!
//! Internally every frequency is angular (rad/s). Ordinary frequencies in Hz
//! only appear at the file and CLI boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, ensure_positive, Result};

pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Mass number of the fermionic isotope; its mass is taken as 87 u.
pub const SR87_MASS_NUMBER: f64 = 87.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub hbar: f64,
    pub kb: f64,
    pub m_sr: f64,
    pub a0: f64,
    pub lattice_wavelength: f64,
    pub clock_frequency_hz: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            kb: 1.380_649e-23,
            m_sr: SR87_MASS_NUMBER * ATOMIC_MASS_UNIT,
            a0: 5.291_772_109_03e-11,
            lattice_wavelength: 813.4e-9,
            clock_frequency_hz: 4.29e14,
        }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("hbar", self.hbar)?;
        ensure_positive("kB", self.kb)?;
        ensure_positive("mSr", self.m_sr)?;
        ensure_positive("a0", self.a0)?;
        ensure_positive("latticeWavelength", self.lattice_wavelength)?;
        ensure_positive("clockFrequency", self.clock_frequency_hz)?;
        let amu87 = SR87_MASS_NUMBER * ATOMIC_MASS_UNIT;
        if ((self.m_sr - amu87) / amu87).abs() > 1e-3 {
            return Err(domain(format!(
                "mSr = {} kg is not within 0.1% of 87 atomic mass units",
                self.m_sr
            )));
        }
        Ok(())
    }

    pub fn planck(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    /// Harmonic oscillator length √(ħ/(m ω)).
    pub fn oscillator_length(&self, omega: f64) -> Result<f64> {
        ensure_positive("trap frequency", omega)?;
        Ok((self.hbar / (self.m_sr * omega)).sqrt())
    }

    /// η = k·a_ho/√2.
    pub fn lamb_dicke(&self, wavenumber: f64, omega: f64) -> Result<f64> {
        let wavenumber = ensure_finite("wavenumber", wavenumber)?;
        if wavenumber < 0.0 {
            return Err(domain(format!("wavenumber must be non-negative, got {wavenumber}")));
        }
        Ok(wavenumber * self.oscillator_length(omega)? / std::f64::consts::SQRT_2)
    }

    /// Inverse of [`Constants::lamb_dicke`]: the wavenumber giving `eta` at `omega`.
    pub fn wavenumber_for_lamb_dicke(&self, eta: f64, omega: f64) -> Result<f64> {
        let eta = ensure_finite("Lamb-Dicke parameter", eta)?;
        if eta < 0.0 {
            return Err(domain(format!("Lamb-Dicke parameter must be non-negative, got {eta}")));
        }
        Ok(eta * std::f64::consts::SQRT_2 / self.oscillator_length(omega)?)
    }

    /// Photon recoil energy ħ²k_L²/(2m) in joules.
    pub fn recoil_energy(&self, wavelength: f64) -> Result<f64> {
        if wavelength.is_infinite() && wavelength > 0.0 {
            return Ok(0.0);
        }
        ensure_positive("wavelength", wavelength)?;
        let k = 2.0 * PI / wavelength;
        Ok(self.hbar * self.hbar * k * k / (2.0 * self.m_sr))
    }

    /// Recoil energy of the configured lattice wavelength.
    pub fn lattice_recoil_energy(&self) -> Result<f64> {
        self.recoil_energy(self.lattice_wavelength)
    }

    pub fn angular_to_energy(&self, omega: f64) -> f64 {
        self.hbar * omega
    }

    pub fn energy_to_angular(&self, energy: f64) -> f64 {
        energy / self.hbar
    }

    pub fn energy_to_hz(&self, energy: f64) -> f64 {
        energy / self.planck()
    }

    pub fn hz_to_energy(&self, freq_hz: f64) -> f64 {
        freq_hz * self.planck()
    }

    /// ħω/(k_B T), the inverse thermal occupation scale of a mode.
    pub fn reduced_inverse_temperature(&self, omega: f64, temperature: f64) -> Result<f64> {
        ensure_positive("trap frequency", omega)?;
        ensure_positive("temperature", temperature)?;
        Ok(self.hbar * omega / (self.kb * temperature))
    }

    /// Wavenumber of the clock laser.
    pub fn clock_wavenumber(&self) -> f64 {
        2.0 * PI * self.clock_frequency_hz / SPEED_OF_LIGHT
    }
}

pub fn hz_to_angular(freq_hz: f64) -> f64 {
    2.0 * PI * freq_hz
}

pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Trap frequencies, Lamb-Dicke parameters and the derived interaction scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapGeometry {
    omega_x: f64,
    omega_y: f64,
    omega_z: f64,
    eta_y: f64,
    eta_z: f64,
    a_ho: f64,
    omega_perp: f64,
    u: f64,
    scattering_length: f64,
}

/// Upper bound on η_Z accepted as the Lamb-Dicke regime.
pub const LAMB_DICKE_GUARD: f64 = 0.3;

impl TrapGeometry {
    pub fn new(
        constants: &Constants,
        omega_x: f64,
        omega_y: f64,
        omega_z: f64,
        eta_y: f64,
        eta_z: f64,
        scattering_length: f64,
    ) -> Result<Self> {
        ensure_positive("omegaX", omega_x)?;
        ensure_positive("omegaY", omega_y)?;
        ensure_positive("omegaZ", omega_z)?;
        check_eta("etaY", eta_y)?;
        check_eta("etaZ", eta_z)?;
        ensure_finite("scatteringLength", scattering_length)?;
        let a_ho = constants.oscillator_length(omega_z)?;
        let omega_perp = (omega_x * omega_y).sqrt();
        Ok(Self {
            omega_x,
            omega_y,
            omega_z,
            eta_y,
            eta_z,
            a_ho,
            omega_perp,
            u: 4.0 * omega_perp * scattering_length / a_ho,
            scattering_length,
        })
    }

    /// Same trap with the scattering length chosen so that u takes the given value.
    pub fn with_interaction(&self, u: f64) -> Result<Self> {
        ensure_finite("u", u)?;
        let scattering_length = u * self.a_ho / (4.0 * self.omega_perp);
        Ok(Self { u: 4.0 * self.omega_perp * scattering_length / self.a_ho, scattering_length, ..*self })
    }

    pub fn with_scattering_length(&self, scattering_length: f64) -> Result<Self> {
        ensure_finite("scatteringLength", scattering_length)?;
        Ok(Self { u: 4.0 * self.omega_perp * scattering_length / self.a_ho, scattering_length, ..*self })
    }

    pub fn with_eta_z(&self, eta_z: f64) -> Result<Self> {
        check_eta("etaZ", eta_z)?;
        Ok(Self { eta_z, ..*self })
    }

    pub fn omega_x(&self) -> f64 {
        self.omega_x
    }
    pub fn omega_y(&self) -> f64 {
        self.omega_y
    }
    pub fn omega_z(&self) -> f64 {
        self.omega_z
    }
    pub fn eta_y(&self) -> f64 {
        self.eta_y
    }
    pub fn eta_z(&self) -> f64 {
        self.eta_z
    }
    pub fn a_ho(&self) -> f64 {
        self.a_ho
    }
    pub fn omega_perp(&self) -> f64 {
        self.omega_perp
    }
    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn scattering_length(&self) -> f64 {
        self.scattering_length
    }
}

fn check_eta(label: &str, eta: f64) -> Result<()> {
    ensure_finite(label, eta)?;
    if !(0.0..LAMB_DICKE_GUARD).contains(&eta) {
        return Err(domain(format!(
            "{label} = {eta} outside the Lamb-Dicke regime [0, {LAMB_DICKE_GUARD})"
        )));
    }
    Ok(())
}

/// u = 4 ω⊥ a / a_ho.
pub fn interaction_parameter(geometry: &TrapGeometry) -> f64 {
    4.0 * geometry.omega_perp() * geometry.scattering_length() / geometry.a_ho()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_wavenumber_gives_zero_eta() {
        let c = Constants::default();
        assert_eq!(c.lamb_dicke(0.0, hz_to_angular(700.0)).unwrap(), 0.0);
    }

    #[test]
    fn eta_is_ka_over_root_two() {
        let c = Constants::default();
        let omega = hz_to_angular(700.0);
        let a = c.oscillator_length(omega).unwrap();
        let eta = c.lamb_dicke(0.1 / a, omega).unwrap();
        assert!((eta - 0.1 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lamb_dicke_round_trip() {
        let c = Constants::default();
        let omega = hz_to_angular(700.0);
        let k = c.wavenumber_for_lamb_dicke(0.046, omega).unwrap();
        let eta = c.lamb_dicke(k, omega).unwrap();
        let k_back = c.wavenumber_for_lamb_dicke(eta, omega).unwrap();
        assert!(rel(k_back, k) < 1e-12);
    }

    #[test]
    fn lamb_dicke_rejects_bad_frequency() {
        let c = Constants::default();
        assert!(c.lamb_dicke(1.0, 0.0).is_err());
        assert!(c.lamb_dicke(1.0, -3.0).is_err());
    }

    #[test]
    fn interaction_parameter_hand_value() {
        let c = Constants::default();
        let g = TrapGeometry::new(
            &c,
            hz_to_angular(90e3),
            hz_to_angular(55e3),
            hz_to_angular(700.0),
            0.0,
            0.06,
            -40.0 * c.a0,
        )
        .unwrap();
        // 4·2π·√(90e3·55e3)·(−40·a0)/√(ħ/(m·2π·700))
        let a_ho = (1.054_571_817e-34 / (87.0 * 1.660_539_066_60e-27 * 2.0 * PI * 700.0)).sqrt();
        let hand = 4.0 * 2.0 * PI * (90e3f64 * 55e3).sqrt() * (-40.0 * 5.291_772_109_03e-11) / a_ho;
        assert!(rel(interaction_parameter(&g), hand) < 1e-12);
        assert!(rel(g.u(), -9180.0) < 1e-3, "u = {}", g.u());
    }

    #[test]
    fn zero_scattering_length_zero_u() {
        let c = Constants::default();
        let g = TrapGeometry::new(&c, 1e5, 1e5, 4e3, 0.0, 0.05, 0.0).unwrap();
        assert_eq!(interaction_parameter(&g), 0.0);
    }

    #[test]
    fn doubling_transverse_frequencies_doubles_u() {
        let c = Constants::default();
        let a = -40.0 * c.a0;
        let g1 = TrapGeometry::new(&c, 3e5, 2e5, 4e3, 0.0, 0.05, a).unwrap();
        let g2 = TrapGeometry::new(&c, 6e5, 4e5, 4e3, 0.0, 0.05, a).unwrap();
        assert!(rel(g2.u(), 2.0 * g1.u()) < 1e-14);
    }

    #[test]
    fn u_times_aho_over_omega_perp_is_fixed_by_scattering_length() {
        let c = Constants::default();
        let a = 25.0 * c.a0;
        let g1 = TrapGeometry::new(&c, 3e5, 2e5, 4e3, 0.0, 0.05, a).unwrap();
        let g2 = TrapGeometry::new(&c, 3e5, 2e5, 9e3, 0.0, 0.05, a).unwrap();
        let inv1 = g1.u() * g1.a_ho() / g1.omega_perp();
        let inv2 = g2.u() * g2.a_ho() / g2.omega_perp();
        assert!(rel(inv1, inv2) < 1e-14);
        assert!(rel(inv1, 4.0 * a) < 1e-14);
        // u ∝ √ωZ at fixed transverse trap
        assert!(rel(g2.u() / g1.u(), 1.5) < 1e-14);
    }

    #[test]
    fn recoil_energy_values() {
        let c = Constants::default();
        let e1 = c.recoil_energy(813.4e-9).unwrap();
        let e2 = c.recoil_energy(2.0 * 813.4e-9).unwrap();
        assert!(rel(e2, e1 / 4.0) < 1e-14);
        let khz = c.energy_to_hz(e1) / 1e3;
        assert!((khz - 3.45).abs() < 0.05, "E_r/h = {khz} kHz");
        assert_eq!(c.recoil_energy(f64::INFINITY).unwrap(), 0.0);
        assert!(c.recoil_energy(1e3).unwrap() < 1e-45);
        assert!(c.recoil_energy(0.0).is_err());
    }

    #[test]
    fn lamb_dicke_guard() {
        let c = Constants::default();
        assert!(TrapGeometry::new(&c, 1e5, 1e5, 4e3, 0.0, 0.5, 0.0).is_err());
        assert!(TrapGeometry::new(&c, 1e5, 1e5, 4e3, 0.0, 0.29, 0.0).is_ok());
    }

    #[test]
    fn default_constants_valid() {
        Constants::default().validate().unwrap();
        let bad = Constants { m_sr: 88.0 * ATOMIC_MASS_UNIT, ..Constants::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn with_interaction_keeps_invariant() {
        let c = Constants::default();
        let g = TrapGeometry::new(&c, 3e5, 2e5, 4e3, 0.0, 0.05, 10.0 * c.a0).unwrap();
        let h = g.with_interaction(-123.0).unwrap();
        assert!((h.u() + 123.0).abs() < 1e-10);
        assert!(rel(interaction_parameter(&h), h.u()) < 1e-14);
        assert!(h.scattering_length() < 0.0);
    }
}
