//! Second-order perturbation theory in the Rabi-frequency spread ΔΩ for the
//! mean-U model, built on the Dicke (S = N/2) and spin-wave (S = N/2−1) multiplets.
//!
//! Conventions: H/ħ = −δS^z − Σ_j Ω_j s^x_j − Ū Σ_{j<k}(s_j·s_k − ¼). The rotated
//! axis is n = (sin θ, 0, cos θ) with sin θ = Ω̄/r, cos θ = δ/r, r = √(δ²+Ω̄²).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, ensure_finite, ensure_positive, Error, Result};
use crate::modes::{rabi_frequencies, OverlapSeries, ThermalEnsemble};
use crate::numeric::{brent, chunked_sum, linear_fit};
use crate::physunits::{angular_to_hz, TrapGeometry};
use crate::spinmodel::{DriveParams, SpinModel};

const I: Complex64 = Complex64::new(0.0, 1.0);
const MAX_COLLECTIVE_ATOMS: usize = 160;
const RESONANCE_GUARD: f64 = 1e-6;
const SLOPE_FLOOR: f64 = 1e-12;
const THERMAL_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveBasisParams {
    pub n_atoms: usize,
    pub theta: f64,
    pub mean_rabi: f64,
    pub delta_rabi_std: f64,
    pub mean_u: f64,
    pub detuning: f64,
}

impl CollectiveBasisParams {
    pub fn new(n_atoms: usize, mean_rabi: f64, delta_rabi_std: f64, mean_u: f64, detuning: f64) -> Result<Self> {
        if n_atoms == 0 || n_atoms > MAX_COLLECTIVE_ATOMS {
            return Err(domain(format!("atom number must lie in 1..={MAX_COLLECTIVE_ATOMS}, got {n_atoms}")));
        }
        ensure_finite("mean Rabi frequency", mean_rabi)?;
        ensure_finite("mean interaction", mean_u)?;
        ensure_finite("detuning", detuning)?;
        if !(delta_rabi_std >= 0.0 && delta_rabi_std.is_finite()) {
            return Err(domain(format!("Rabi spread must be finite and non-negative, got {delta_rabi_std}")));
        }
        if mean_rabi == 0.0 && detuning == 0.0 {
            return Err(domain("rotation axis undefined for Ω̄ = δ = 0"));
        }
        Ok(Self { n_atoms, theta: mean_rabi.atan2(detuning), mean_rabi, delta_rabi_std, mean_u, detuning })
    }

    /// Ω̄ and ΔΩ from an explicit per-atom Rabi list.
    pub fn from_rabi(rabi: &[f64], mean_u: f64, detuning: f64) -> Result<Self> {
        if rabi.is_empty() {
            return Err(domain("empty Rabi list"));
        }
        let n = rabi.len() as f64;
        let mean = rabi.iter().sum::<f64>() / n;
        let spread = (rabi.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
        Self::new(rabi.len(), mean, spread, mean_u, detuning)
    }

    pub fn with_detuning(&self, detuning: f64) -> Result<Self> {
        Self::new(self.n_atoms, self.mean_rabi, self.delta_rabi_std, self.mean_u, detuning)
    }

    pub fn generalized_rabi(&self) -> f64 {
        self.mean_rabi.hypot(self.detuning)
    }
}

/// Coefficients of |g…g⟩ in the rotated Dicke basis, entry i ↔ m = i − N/2,
/// √C(N, m+N/2)·cos^{N/2−m}(θ/2)·sin^{N/2+m}(θ/2).
pub fn wigner_initial_amplitudes(n_atoms: usize, theta: f64) -> Result<Vec<f64>> {
    if n_atoms == 0 || n_atoms > MAX_COLLECTIVE_ATOMS {
        return Err(domain(format!("atom number must lie in 1..={MAX_COLLECTIVE_ATOMS}, got {n_atoms}")));
    }
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Ok((0..=n_atoms)
        .map(|ups| binomial(n_atoms, ups).sqrt() * c.powi((n_atoms - ups) as i32) * s.powi(ups as i32))
        .collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Operator families between Dicke (D) and spin-wave (W) levels at a single site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinWaveOperator {
    /// ⟨D|2s^z_n|W⟩
    DickeWaveSz,
    /// ⟨D|s^+_n|W⟩
    DickeWaveRaise,
    /// ⟨D|s^-_n|W⟩
    DickeWaveLower,
    /// ⟨W|2s^z_n|W'⟩
    WaveWaveSz,
    /// ⟨W|s^+_n|W'⟩
    WaveWaveRaise,
    /// ⟨W|s^-_n|W'⟩
    WaveWaveLower,
}

/// A collective level |S, m, k⟩; `k` is ignored for Dicke levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinWaveLevel {
    pub twice_m: i32,
    pub k: usize,
}

impl SpinWaveLevel {
    pub fn new(twice_m: i32, k: usize) -> Self {
        Self { twice_m, k }
    }
}

/// Single-site matrix elements between the collective multiplets, with spin
/// waves defined as |N/2−1, m, k⟩ ∝ Σ_n e^{2πikn/N} s^+_n |N/2, m−1⟩, sites n = 1…N.
pub fn spin_wave_matrix_element(
    n_atoms: usize,
    site: usize,
    op: SpinWaveOperator,
    bra: SpinWaveLevel,
    ket: SpinWaveLevel,
) -> Result<Complex64> {
    use SpinWaveOperator::*;
    if n_atoms < 2 || n_atoms > MAX_COLLECTIVE_ATOMS {
        return Err(domain(format!("spin waves need 2 ≤ N ≤ {MAX_COLLECTIVE_ATOMS}, got {n_atoms}")));
    }
    if site == 0 || site > n_atoms {
        return Err(domain(format!("site {site} outside 1..={n_atoms}")));
    }
    let n = n_atoms as f64;
    let twice_dicke = n_atoms as i32;
    let bra_is_dicke = matches!(op, DickeWaveSz | DickeWaveRaise | DickeWaveLower);
    let check = |level: SpinWaveLevel, dicke: bool| -> Result<()> {
        let twice_s = if dicke { twice_dicke } else { twice_dicke - 2 };
        if level.twice_m.abs() > twice_s || (level.twice_m - twice_s) % 2 != 0 {
            return Err(domain(format!("2m = {} outside the 2S = {twice_s} multiplet", level.twice_m)));
        }
        if !dicke && (level.k == 0 || level.k >= n_atoms) {
            return Err(domain(format!("spin-wave index k = {} outside 1..N−1", level.k)));
        }
        Ok(())
    };
    check(bra, bra_is_dicke)?;
    check(ket, false)?;
    let m = bra.twice_m as f64 / 2.0;
    let dm = bra.twice_m - ket.twice_m;
    let half = n / 2.0;
    if bra_is_dicke {
        let phase = Complex64::from_polar(1.0, 2.0 * PI * (ket.k * site) as f64 / n);
        let denom = n * n * (n - 1.0);
        let value = match op {
            DickeWaveSz if dm == 0 => 2.0 * ((half * half - m * m) / denom).sqrt(),
            DickeWaveRaise if dm == 2 => -((half + m) * (half + m - 1.0) / denom).sqrt(),
            // The lowering element carries a positive sign for this spin-wave phase convention.
            DickeWaveLower if dm == -2 => ((half - m) * (half - m - 1.0) / denom).sqrt(),
            _ => 0.0,
        };
        return Ok(phase * value);
    }
    if n_atoms == 2 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let kdelta = if bra.k == ket.k { n } else { 0.0 };
    let mixing = -2.0 * Complex64::from_polar(1.0, 2.0 * PI * ((ket.k as f64 - bra.k as f64) * site as f64) / n) + kdelta;
    let scale = n * (n - 2.0);
    let value = match op {
        WaveWaveSz if dm == 0 => 2.0 * m / scale,
        WaveWaveRaise if dm == 2 => ((half + m - 1.0) * (half - m)).sqrt() / scale,
        WaveWaveLower if dm == -2 => ((half + m) * (half - m - 1.0)).sqrt() / scale,
        _ => 0.0,
    };
    Ok(mixing * value)
}

/// N·Ω̄²/(Ω̄²+δ²)·sin²(t√(Ω̄²+δ²)/2).
pub fn homogeneous_excitation(n_atoms: usize, mean_rabi: f64, detuning: f64, t: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(domain(format!("pulse time must be finite and non-negative, got {t}")));
    }
    let r2 = mean_rabi * mean_rabi + detuning * detuning;
    if r2 == 0.0 {
        return Ok(0.0);
    }
    Ok(n_atoms as f64 * mean_rabi * mean_rabi / r2 * (0.5 * t * r2.sqrt()).sin().powi(2))
}

/// Wigner small-d matrix d^J_{m'm}(β), rows m', columns m, both ordered from −J.
fn wigner_d(twice_j: usize, beta: f64) -> DMatrix<f64> {
    let dim = twice_j + 1;
    let mut ln_fact = vec![0.0f64; dim + 1];
    for i in 1..=dim {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let mut d = DMatrix::zeros(dim, dim);
    // with a = J+m', b = J+m: Σ_s (−1)^{m'−m+s} √(a!(2J−a)!b!(2J−b)!) / ((b−s)! s! (a−b+s)! (2J−a−s)!)
    for a in 0..dim {
        for b in 0..dim {
            let norm = 0.5 * (ln_fact[a] + ln_fact[twice_j - a] + ln_fact[b] + ln_fact[twice_j - b]);
            let s_min = b.saturating_sub(a);
            let s_max = b.min(twice_j - a);
            let mut sum = 0.0;
            for k in s_min..=s_max {
                let ln_den = ln_fact[b - k] + ln_fact[k] + ln_fact[a + k - b] + ln_fact[twice_j - a - k];
                let sign = if (a + k - b) % 2 == 0 { 1.0 } else { -1.0 };
                let cos_pow = (twice_j + b - a - 2 * k) as i32;
                let sin_pow = (a + 2 * k - b) as i32;
                sum += sign * (norm - ln_den).exp() * c.powi(cos_pow) * s.powi(sin_pow);
            }
            d[(a, b)] = sum;
        }
    }
    d
}

/// ∫₀¹ x^j e^{iαx} dx for j = 0…4.
fn moments(alpha: f64) -> [Complex64; 5] {
    let mut out = [Complex64::new(0.0, 0.0); 5];
    if alpha.abs() < 4.0 {
        for (j, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..80 {
                let contrib = term / (p + j + 1) as f64;
                acc += contrib;
                if contrib.norm() < 1e-18 * acc.norm() {
                    break;
                }
                term *= I * alpha / (p + 1) as f64;
            }
            *slot = acc;
        }
    } else {
        let e = Complex64::from_polar(1.0, alpha);
        out[0] = (e - 1.0) / (I * alpha);
        for j in 1..5 {
            out[j] = (e - j as f64 * out[j - 1]) / (I * alpha);
        }
    }
    out
}

/// ∫₀ᵗ e^{iβs} ds.
fn phase_integral(beta: f64, t: f64) -> Complex64 {
    let x = 0.5 * beta * t;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    Complex64::from_polar(t * sinc, x)
}

/// ∫₀ᵗ ds e^{iαs} ∫₀ˢ ds' e^{iβs'}.
fn nested_phase_integral(alpha: f64, beta: f64, t: f64) -> Complex64 {
    if (beta * t).abs() >= 1e-3 {
        return (phase_integral(alpha + beta, t) - phase_integral(alpha, t)) / (I * beta);
    }
    // Σ_j (iβ)^{j−1}/j! ∫₀ᵗ s^j e^{iαs} ds, truncated at j = 4
    let mom = moments(alpha * t);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut coeff = Complex64::new(t * t, 0.0);
    for (j, mj) in mom.iter().enumerate().skip(1) {
        acc += coeff * mj;
        coeff *= I * beta * t / (j + 1) as f64;
    }
    acc
}

/// Coefficient N^{e(2)} of ΔΩ² in the excited-atom number after a pulse of length t.
pub fn second_order_excitation(n_atoms: usize, mean_rabi: f64, mean_u: f64, detuning: f64, t: f64) -> Result<f64> {
    let params = CollectiveBasisParams::new(n_atoms, mean_rabi, 0.0, mean_u, detuning)?;
    if t < 0.0 || !t.is_finite() {
        return Err(domain(format!("pulse time must be finite and non-negative, got {t}")));
    }
    if n_atoms < 2 {
        return Ok(0.0);
    }
    Ok(second_order_unchecked(n_atoms, &params, t))
}

fn second_order_unchecked(n_atoms: usize, params: &CollectiveBasisParams, t: f64) -> f64 {
    let n = n_atoms as f64;
    let r = params.generalized_rabi();
    let d_dicke = wigner_d(n_atoms, params.theta);
    let d_wave = wigner_d(n_atoms - 2, params.theta);
    let (dim_d, dim_w) = (n_atoms + 1, n_atoms - 1);
    let m_dicke = |i: usize| i as f64 - n / 2.0;
    let m_wave = |i: usize| i as f64 - (n / 2.0 - 1.0);
    let e_dicke: Vec<f64> = (0..dim_d).map(|i| -r * m_dicke(i)).collect();
    let e_wave: Vec<f64> = (0..dim_w).map(|i| -r * m_wave(i) + 0.5 * n * params.mean_u).collect();

    // −Σ_n δΩ_n s^x_n between lab-frame levels, per unit Δ_k = Σ_n δΩ_n e^{−2πikn/N};
    // site N carries unit phase.
    let mut coupling_lab = DMatrix::<f64>::zeros(dim_w, dim_d);
    for (wi, wrow) in (0..dim_w).map(|i| (i, 2 * i as i32 - (n_atoms as i32 - 2))) {
        for (di, dm) in (0..dim_d).map(|i| (i, 2 * i as i32 - n_atoms as i32)) {
            if (wrow - dm).abs() != 2 {
                continue;
            }
            let dicke = SpinWaveLevel::new(dm, 0);
            let wave = SpinWaveLevel::new(wrow, 1);
            let raise = spin_wave_matrix_element(n_atoms, n_atoms, SpinWaveOperator::DickeWaveRaise, dicke, wave)
                .expect("levels in range");
            let lower = spin_wave_matrix_element(n_atoms, n_atoms, SpinWaveOperator::DickeWaveLower, dicke, wave)
                .expect("levels in range");
            coupling_lab[(wi, di)] = -0.5 * (raise + lower).re;
        }
    }
    let coupling = d_wave.transpose() * coupling_lab * &d_dicke;
    let number_op = |d: &DMatrix<f64>, offset: f64| {
        let dim = d.nrows();
        let diag = DMatrix::from_fn(dim, dim, |i, j| if i == j { i as f64 + offset } else { 0.0 });
        d.transpose() * diag * d
    };
    // N_e = S^z + N/2 = (index − S) + N/2
    let ne_dicke = number_op(&d_dicke, 0.0);
    let ne_wave = number_op(&d_wave, 1.0);
    let c0: Vec<f64> = (0..dim_d).map(|mu| d_dicke[(0, mu)]).collect();

    let first: Vec<Complex64> = (0..dim_w)
        .map(|nu| {
            -I * (0..dim_d)
                .map(|mu| coupling[(nu, mu)] * c0[mu] * phase_integral(e_wave[nu] - e_dicke[mu], t))
                .sum::<Complex64>()
        })
        .collect();
    let second: Vec<Complex64> = (0..dim_d)
        .map(|mu2| {
            let mut acc = Complex64::new(0.0, 0.0);
            for nu in 0..dim_w {
                let left = coupling[(nu, mu2)];
                if left == 0.0 {
                    continue;
                }
                for mu in 0..dim_d {
                    acc += left
                        * coupling[(nu, mu)]
                        * c0[mu]
                        * nested_phase_integral(e_dicke[mu2] - e_wave[nu], e_wave[nu] - e_dicke[mu], t);
                }
            }
            -acc
        })
        .collect();

    let mut wave_part = 0.0;
    for a in 0..dim_w {
        for b in 0..dim_w {
            let phase = Complex64::from_polar(1.0, (e_wave[a] - e_wave[b]) * t);
            wave_part += (first[a].conj() * first[b] * phase).re * ne_wave[(a, b)];
        }
    }
    let mut dicke_part = 0.0;
    for a in 0..dim_d {
        for b in 0..dim_d {
            let phase = Complex64::from_polar(1.0, (e_dicke[a] - e_dicke[b]) * t);
            dicke_part += 2.0 * (c0[a] * ne_dicke[(a, b)] * phase * second[b]).re;
        }
    }
    // Σ_k |Δ_k|² = N²ΔΩ²
    n * n * (wave_part + dicke_part)
}

/// D = (2/N)·∂N^{e(0)}/∂δ.
pub fn d_coefficient(mean_rabi: f64, detuning: f64, t: f64) -> f64 {
    let r2 = detuning * detuning + mean_rabi * mean_rabi;
    let r = r2.sqrt();
    detuning * mean_rabi * mean_rabi * (-2.0 + 2.0 * (t * r).cos() + t * r * (t * r).sin()) / (r2 * r2)
}

/// C = (2ΔΩ²/N)·[N^{e(2)}(−δ) − N^{e(2)}(δ)], so that the shift is C/(2D) in rad/s.
pub fn c_coefficient(params: &CollectiveBasisParams, t: f64) -> Result<f64> {
    if params.n_atoms < 2 || params.delta_rabi_std == 0.0 {
        return Ok(0.0);
    }
    let minus = params.with_detuning(-params.detuning)?;
    let diff = second_order_unchecked(params.n_atoms, &minus, t) - second_order_unchecked(params.n_atoms, params, t);
    Ok(2.0 * params.delta_rabi_std.powi(2) * diff / params.n_atoms as f64)
}

/// The long single-expression C in its commonly quoted closed form, kept for
/// comparison with [`c_coefficient`].
pub fn printed_c(params: &CollectiveBasisParams, t: f64) -> f64 {
    let n = params.n_atoms as f64;
    let (d, ob, u) = (params.detuning, params.mean_rabi, params.mean_u);
    let nu = n * u;
    let h = nu / 2.0;
    let q = h * h;
    let d2 = d * d;
    let ob2 = ob * ob;
    let r2 = d2 + ob2;
    let r = r2.sqrt();
    let (ct, st) = ((t * r).cos(), (t * r).sin());
    let (cu, su) = ((t * h).cos(), (t * h).sin());
    let pre = 2.0 * params.delta_rabi_std.powi(2) * d / (nu * nu * r2.powi(3) * (r2 - q).powi(2));
    let bracket = 2.0 * nu * ob2 * ob2 * r2 * r2 - 2.0 * nu * cu * ob2 * (ob - h) * (ob + h) * r2 * r2
        + nu.powi(5) * ob2 / 32.0 * (-7.0 * d2 + 2.0 * ob2)
        + nu.powi(3) / 8.0 * ct * ct * ob2 * (r2 - q) * (d2 + 2.0 * ob2)
        - nu.powi(3) / 8.0 * (8.0 * d2.powi(3) + 5.0 * d2 * d2 * ob2 + 3.0 * d2 * ob2 * ob2 + 6.0 * ob2.powi(3))
        + 2.0 * nu
            * ct
            * (-cu * (ob - h) * (ob + h) * r2 * r2 * (2.0 * d2 + ob2)
                + ob2 * (nu.powi(4) * d2 / 32.0 + r2 * r2 * (2.0 * d2 + ob2) - q * r2 * (5.0 * d2 + ob2)))
        + st * (-t * nu * ob2 * r * (r2 - q) * (q * (d2 - 2.0 * ob2) + 2.0 * ob2 * r2)
            + 4.0 * r2.powf(2.5) * (q * q + ob2 * ob2 + q * (d2 - 2.0 * ob2)) * su
            - nu.powi(3) / 8.0 * ob2 * (r2 - q) * (d2 + 2.0 * ob2) * st);
    pre * bracket
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderShift {
    pub c: f64,
    pub d: f64,
    /// C/(2D), rad/s.
    pub shift: f64,
    /// C/(4πD), Hz.
    pub shift_hz: f64,
}

/// Shift of the lock-point midpoint to order ΔΩ², evaluated at the zero-order
/// lock point `params.detuning` (either sign).
pub fn shift_second_order(params: &CollectiveBasisParams, t: f64) -> Result<SecondOrderShift> {
    ensure_positive("pulse time", t)?;
    let r2 = params.generalized_rabi().powi(2);
    let n = params.n_atoms as f64;
    let resonance = 0.25 * n * n * params.mean_u * params.mean_u;
    if (resonance - r2).abs() < RESONANCE_GUARD * r2 {
        return Err(Error::SingularConfiguration(format!(
            "N²U²/4 = {resonance} coincides with δ²+Ω̄² = {r2}"
        )));
    }
    let d = d_coefficient(params.mean_rabi, params.detuning, t);
    if d.abs() * r2.sqrt() < SLOPE_FLOOR {
        return Err(Error::SlopeDegenerate(format!("lineshape slope D = {d} vanishes at δ = {}", params.detuning)));
    }
    let c = c_coefficient(params, t)?;
    let shift = c / (2.0 * d);
    Ok(SecondOrderShift { c, d, shift, shift_hz: angular_to_hz(shift) })
}

/// Positive outermost detuning where `fraction(δ)` falls through `target`,
/// scanning [0, 4·scale] and refining with Brent.
fn outermost_crossing(fraction: impl Fn(f64) -> f64, scale: f64, target: f64, tol: f64) -> Result<f64> {
    let steps = 80;
    let h = 4.0 * scale / steps as f64;
    let values: Vec<f64> = (0..=steps).map(|i| fraction(i as f64 * h)).collect();
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= target {
        return Err(Error::UnreachableTarget { target, peak });
    }
    if values[steps] >= target {
        return Err(Error::Bracket("homogeneous lineshape exceeds the target at 4Ω̄".into()));
    }
    let last = values.iter().rposition(|&v| v >= target).expect("peak above target");
    let (a, b) = (last as f64 * h, (last + 1) as f64 * h);
    brent(|x| fraction(x) - target, a, b, values[last] - target, values[last + 1] - target, tol)
}

/// Zero-order lock point δ₁⁽⁰⁾ > 0 of the homogeneous lineshape.
pub fn zero_order_lock_point(mean_rabi: f64, t: f64, target: f64) -> Result<f64> {
    ensure_positive("mean Rabi frequency", mean_rabi)?;
    ensure_positive("pulse time", t)?;
    outermost_crossing(
        |d| homogeneous_excitation(1, mean_rabi, d, t).unwrap_or(f64::NAN),
        mean_rabi,
        target,
        1e-13 * mean_rabi,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SiteMoments {
    mean_rabi: f64,
    delta_rabi_std: f64,
    mean_u: f64,
    weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalShift {
    /// ⟨C⟩/(2⟨D⟩), rad/s.
    pub shift: f64,
    pub shift_hz: f64,
    pub lock_detuning: f64,
    pub mean_c: f64,
    pub mean_d: f64,
}

/// ⟨C⟩/(2⟨D⟩) with C and D averaged separately over the ensemble at the
/// thermal zero-order lock point.
pub fn thermal_shift(ensemble: &ThermalEnsemble, drive: &DriveParams, geometry: &TrapGeometry) -> Result<ThermalShift> {
    if ensemble.is_empty() {
        return Err(domain("empty ensemble"));
    }
    let n_atoms = ensemble.n_atoms();
    let rabi = rabi_frequencies(ensemble.n_max(), drive.omega0b(), geometry.eta_y(), geometry.eta_z());
    let series = OverlapSeries::new(ensemble.n_max());
    let u_scale = geometry.u() / PI;
    let sites: Vec<SiteMoments> = ensemble
        .configs()
        .iter()
        .map(|c| {
            let r: Vec<f64> = c.modes().iter().map(|&m| rabi[m as usize]).collect();
            let nf = r.len() as f64;
            let mean = r.iter().sum::<f64>() / nf;
            let spread = (r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf).sqrt();
            let modes = c.modes();
            let mut pair_sum = 0.0;
            for j in 0..modes.len() {
                for k in (j + 1)..modes.len() {
                    pair_sum += series.coefficient(modes[j], modes[k]);
                }
            }
            let pairs = (modes.len() * (modes.len() - 1) / 2).max(1) as f64;
            SiteMoments { mean_rabi: mean, delta_rabi_std: spread, mean_u: u_scale * pair_sum / pairs, weight: c.weight() }
        })
        .collect();
    let t = drive.pulse_time();
    let scale = sites.iter().map(|s| s.weight * s.mean_rabi).sum::<f64>();
    ensure_positive("mean Rabi frequency", scale)?;
    let fraction = |d: f64| {
        chunked_sum(&sites, THERMAL_CHUNK, |s| Ok(s.weight * homogeneous_excitation(1, s.mean_rabi, d, t)?))
            .unwrap_or(f64::NAN)
    };
    let lock = outermost_crossing(fraction, scale, drive.target_excitation(), 1e-13 * scale)?;
    let mean_d = chunked_sum(&sites, THERMAL_CHUNK, |s| Ok(s.weight * d_coefficient(s.mean_rabi, lock, t)))?;
    let mean_c = chunked_sum(&sites, THERMAL_CHUNK, |s| {
        let p = CollectiveBasisParams::new(n_atoms, s.mean_rabi, s.delta_rabi_std, s.mean_u, lock)?;
        Ok(s.weight * c_coefficient(&p, t)?)
    })?;
    if mean_d.abs() * scale < SLOPE_FLOOR {
        return Err(Error::SlopeDegenerate(format!("thermal lineshape slope ⟨D⟩ = {mean_d} vanishes")));
    }
    let shift = mean_c / (2.0 * mean_d);
    Ok(ThermalShift { shift, shift_hz: angular_to_hz(shift), lock_detuning: lock, mean_c, mean_d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingRegime {
    /// Δν ∝ u
    Weak,
    /// Δν ∝ 1/u
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub regime: ScalingRegime,
    pub exponent: f64,
    /// Signed prefactor A in Δν = A·x^p.
    pub prefactor: f64,
}

/// Least-squares power law through (x, y) on log|y| vs log x; all y must share one sign.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} points; a power law needs two", points.len())));
    }
    let sign = points[0].1.signum();
    if points.iter().any(|&(_, y)| y == 0.0 || !y.is_finite() || y.signum() != sign) {
        return Err(Error::SignInconsistency("power-law fit needs nonzero values of one sign".into()));
    }
    if points.iter().any(|&(x, _)| !(x > 0.0 && x.is_finite())) {
        return Err(domain("power-law abscissae must be positive"));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let (intercept, slope) = linear_fit(&lx, &ly);
    Ok((slope, sign * intercept.exp()))
}

/// Power-law exponent of shift vs u over a table spanning at least one decade.
pub fn scaling_fit(table: &[(f64, f64)], regime: ScalingRegime) -> Result<ScalingFit> {
    let (lo, hi) = table
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(u, _)| (lo.min(u.abs()), hi.max(u.abs())));
    if table.len() < 2 || hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InsufficientData("scaling fit needs at least one decade in u".into()));
    }
    let (exponent, prefactor) = power_law_fit(table)?;
    Ok(ScalingFit { regime, exponent, prefactor })
}

/// The rotated-frame Hamiltonian −rS^z − Σ_j δΩ_j(cos θ s^x_j + sin θ s^z_j) − Ū Σ_{j<k}(s_j·s_k − ¼)
/// in the product basis, where the s operators refer to the rotated axes.
pub fn rotated_frame_hamiltonian(rabi: &[f64], mean_u: f64, detuning: f64) -> Result<DMatrix<f64>> {
    let params = CollectiveBasisParams::from_rabi(rabi, mean_u, detuning)?;
    let (sin, cos) = params.theta.sin_cos();
    let spread: Vec<f64> = rabi.iter().map(|r| r - params.mean_rabi).collect();
    SpinModel::uniform(spread.iter().map(|x| x * cos).collect(), mean_u)?
        .with_detuning_offsets(spread.iter().map(|x| x * sin).collect())?
        .hamiltonian(params.generalized_rabi())
}
