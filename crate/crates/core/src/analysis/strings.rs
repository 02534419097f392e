use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::record::{Density, FrequencyRecord};
use crate::error::{domain, Error, Result};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Σ_{m=1}^{n} (−1)^m C(n−1, m−1) x_{m−1} / 2^{n−2}: annihilates polynomials of
/// degree ≤ n−2 and maps a low/high alternation of step s to ±s.
fn window_weights(n: usize) -> Vec<f64> {
    let norm = 2f64.powi(n as i32 - 2);
    (1..=n)
        .map(|m| if m % 2 == 0 { 1.0 } else { -1.0 } * binomial(n - 1, m - 1) / norm)
        .collect()
}

fn check_length(n: usize) -> Result<()> {
    if n < 2 {
        return Err(domain(format!("string length must be at least 2, got {n}")));
    }
    Ok(())
}

/// Sliding-window string values over a plain sequence whose first element is
/// low density; sign-aligned so a high-minus-low offset s gives +s.
fn aligned_strings(values: &[f64], first_is_low: bool, n: usize) -> Vec<f64> {
    let weights = window_weights(n);
    values
        .windows(n)
        .enumerate()
        .map(|(l, w)| {
            let raw: f64 = w.iter().zip(&weights).map(|(x, c)| x * c).sum();
            let low = first_is_low == (l % 2 == 0);
            if low { raw } else { -raw }
        })
        .collect()
}

/// Per-string shift sequence over the whole record, ignoring segment boundaries.
pub fn string_shift(record: &FrequencyRecord, n: usize) -> Result<Vec<f64>> {
    check_length(n)?;
    if record.len() < n {
        return Err(Error::InsufficientData(format!("record of {} points is shorter than the string length {n}", record.len())));
    }
    let values: Vec<f64> = record.points().iter().map(|p| p.frequency_hz).collect();
    Ok(aligned_strings(&values, record.points()[0].density == Density::Low, n))
}

/// Per-string ratio of the frequency strings to the same strings of an
/// accompanying density (or atom-number) series.
pub fn normalized_string_shift(record: &FrequencyRecord, densities: &[f64], n: usize) -> Result<Vec<f64>> {
    if densities.len() != record.len() {
        return Err(domain("one density value per record point required"));
    }
    let shifts = string_shift(record, n)?;
    let density_strings = aligned_strings(densities, record.points()[0].density == Density::Low, n);
    shifts
        .iter()
        .zip(&density_strings)
        .map(|(s, d)| {
            if *d == 0.0 {
                Err(domain("density string vanishes; cannot normalize"))
            } else {
                Ok(s / d)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringPoint {
    pub value: f64,
    pub run_id: u32,
    pub day_id: u32,
}

/// String values computed within each lock segment after dropping
/// `startup_cut` points at its start.
pub fn string_points(record: &FrequencyRecord, n: usize, startup_cut: usize) -> Result<Vec<StringPoint>> {
    check_length(n)?;
    let mut out = Vec::new();
    for seg in record.segments() {
        let pts = &record.points()[seg];
        if pts.len() < startup_cut + n {
            continue;
        }
        let pts = &pts[startup_cut..];
        // consecutive runs of unit index step only
        let mut start = 0;
        for i in 1..=pts.len() {
            if i == pts.len() || pts[i].index != pts[i - 1].index + 1 {
                let chunk = &pts[start..i];
                if chunk.len() >= n {
                    let values: Vec<f64> = chunk.iter().map(|p| p.frequency_hz).collect();
                    for v in aligned_strings(&values, chunk[0].density == Density::Low, n) {
                        out.push(StringPoint { value: v, run_id: chunk[0].run_id, day_id: chunk[0].day_id });
                    }
                }
                start = i;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("no lock segment holds {} usable points", startup_cut + n)));
    }
    Ok(out)
}

/// The closed form 2^{n−1}/√(Σ_{m=1}^{n} n!/((n−m)!(m+1)!)) as commonly quoted.
pub fn printed_correction_factor(n: usize) -> Result<f64> {
    check_length(n)?;
    let sum: f64 = (1..=n).map(|m| binomial(n, m) * (1..=m).product::<usize>() as f64 / (2..=m + 1).product::<usize>() as f64).sum();
    Ok(2f64.powi(n as i32 - 1) / sum.sqrt())
}

/// White-noise overlap factor of aligned overlapping strings, 2^{n−1}/√C(2n−2, n−1):
/// the long-run to single-string standard deviation ratio.
pub fn overlap_correction_factor(n: usize) -> Result<f64> {
    check_length(n)?;
    Ok(2f64.powi(n as i32 - 1) / binomial(2 * n - 2, n - 1).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionEstimate {
    pub factor: f64,
    /// One-sigma Monte Carlo uncertainty of `factor`.
    pub uncertainty: f64,
    pub trials: usize,
}

/// Ratio of the true standard error of the mean string value to the naive
/// standard error, for overlapping strings over unit white noise of length `m`.
pub fn monte_carlo_correction(n: usize, m: usize, trials: usize, seed: u64) -> Result<CorrectionEstimate> {
    monte_carlo_correction_with_stride(n, m, 1, trials, seed)
}

/// As [`monte_carlo_correction`] using every `stride`-th string; stride ≥ n gives disjoint strings.
pub fn monte_carlo_correction_with_stride(
    n: usize,
    m: usize,
    stride: usize,
    trials: usize,
    seed: u64,
) -> Result<CorrectionEstimate> {
    check_length(n)?;
    if m < n || stride == 0 {
        return Err(domain("record length must be at least n and stride positive"));
    }
    if trials < 10 {
        return Err(Error::InsufficientData("at least 10 Monte Carlo trials required".into()));
    }
    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let noise: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let strings: Vec<f64> = aligned_strings(&noise, true, n).into_iter().step_by(stride).collect();
            let k = strings.len() as f64;
            let mean = strings.iter().sum::<f64>() / k;
            let var = strings.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
            (mean, (var / k).sqrt())
        })
        .collect();
    let t = trials as f64;
    let grand = per_trial.iter().map(|p| p.0).sum::<f64>() / t;
    let true_var = per_trial.iter().map(|p| (p.0 - grand).powi(2)).sum::<f64>() / (t - 1.0);
    let naive = per_trial.iter().map(|p| p.1).sum::<f64>() / t;
    let factor = true_var.sqrt() / naive;
    Ok(CorrectionEstimate { factor, uncertainty: factor / (2.0 * (t - 1.0)).sqrt(), trials })
}
