//! Axial-mode machinery: per-mode Rabi frequencies, mode overlaps and
//! Boltzmann ensembles of occupied-mode configurations.

mod ensemble;
mod overlap;

pub use ensemble::{
    mean_interaction, thermal_ensemble, EnsemblePolicy, MeanInteraction, ModeConfig, ThermalEnsemble,
    DEFAULT_COVERAGE, DEFAULT_SAMPLES,
};
pub use overlap::{
    gauss_hermite, overlap_coefficient, overlap_coefficient_quadrature, pair_interaction, OverlapSeries,
};

/// Laguerre polynomial L_n(x) from the three-term recurrence.
pub fn laguerre(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let k = f64::from(k);
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Ω_n = Ω₀ L_n(η_Z²) L₀(η_Y²) exp(−(η_Y²+η_Z²)/2). L₀ ≡ 1.
pub fn rabi_frequency(n: u32, omega0b: f64, eta_y: f64, eta_z: f64) -> f64 {
    let x = eta_z * eta_z;
    omega0b * laguerre(n, x) * (-(eta_y * eta_y + x) / 2.0).exp()
}

/// Ω_n for n = 0..=n_max in a single recurrence pass.
pub fn rabi_frequencies(n_max: u32, omega0b: f64, eta_y: f64, eta_z: f64) -> Vec<f64> {
    let x = eta_z * eta_z;
    let scale = omega0b * (-(eta_y * eta_y + x) / 2.0).exp();
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    out.push(scale);
    for k in 1..=n_max {
        out.push(scale * cur);
        let kf = f64::from(k);
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    out
}
