use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::FrequencyRecord;
use super::strings::{overlap_correction_factor, string_points, StringPoint};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// All strings as one unit: simple mean, corrected standard error.
    Pooled,
    /// Fixed-size bins with the size tuned toward χ²_red = 1.
    Binned,
    /// One run per day of data taking.
    ByDay,
    /// One run per continuous lock segment.
    BySegment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub mean: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftEstimate {
    pub value_hz: f64,
    pub error_hz: f64,
    pub n_strings: usize,
    pub chi_red_sqrt: f64,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMean {
    pub mean: f64,
    pub error: f64,
    /// χ² per degree of freedom; 1 for a single run.
    pub chi_red: f64,
}

/// Inverse-variance weighted mean with its error and reduced χ².
pub fn weighted_mean(runs: &[RunSummary]) -> Result<WeightedMean> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs to combine".into()));
    }
    for r in runs {
        if !(r.error > 0.0 && r.error.is_finite()) || !r.mean.is_finite() {
            return Err(domain(format!("run error must be positive and finite, got {}", r.error)));
        }
    }
    let wsum: f64 = runs.iter().map(|r| r.error.powi(-2)).sum();
    let mean = runs.iter().map(|r| r.mean * r.error.powi(-2)).sum::<f64>() / wsum;
    let chi_red = if runs.len() > 1 {
        runs.iter().map(|r| ((r.mean - mean) / r.error).powi(2)).sum::<f64>() / (runs.len() - 1) as f64
    } else {
        1.0
    };
    Ok(WeightedMean { mean, error: wsum.sqrt().recip(), chi_red })
}

/// Weighted combination of per-run summaries; the error is scaled by √χ²_red
/// when χ²_red > 1.
pub fn aggregate(runs: &[RunSummary], protocol: Protocol) -> Result<ShiftEstimate> {
    let wm = weighted_mean(runs)?;
    let scale = wm.chi_red.sqrt().max(1.0);
    Ok(ShiftEstimate {
        value_hz: wm.mean,
        error_hz: wm.error * scale,
        n_strings: runs.len(),
        chi_red_sqrt: wm.chi_red.sqrt(),
        protocol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub string_length: usize,
    /// Points dropped at the start of every lock segment.
    pub startup_cut: usize,
    /// Multiplies every standard error of overlapping string points.
    pub correction_factor: f64,
    /// Target window for the binned protocol's χ²_red.
    pub chi_window: (f64, f64),
}

impl AnalysisOptions {
    pub fn new(string_length: usize) -> Result<Self> {
        Ok(Self {
            string_length,
            startup_cut: 0,
            correction_factor: overlap_correction_factor(string_length)?,
            chi_window: (0.9, 1.1),
        })
    }
}

fn summarize(points: &[f64], correction: f64) -> Option<RunSummary> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mean = points.iter().sum::<f64>() / k;
    let sd = (points.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    Some(RunSummary { mean, error: correction * sd / k.sqrt() })
}

fn grouped(points: &[StringPoint], key: impl Fn(&StringPoint) -> u32, correction: f64) -> Vec<RunSummary> {
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for p in points {
        groups.entry(key(p)).or_default().push(p.value);
    }
    groups.values().filter_map(|g| summarize(g, correction)).collect()
}

fn binned(points: &[f64], bin: usize, correction: f64) -> Vec<RunSummary> {
    points.chunks_exact(bin).filter_map(|c| summarize(c, correction)).collect()
}

/// Full pipeline: strings per lock segment, grouping per protocol, combination.
pub fn analyze(record: &FrequencyRecord, protocol: Protocol, options: &AnalysisOptions) -> Result<ShiftEstimate> {
    if !(options.correction_factor > 0.0) {
        return Err(domain("correction factor must be positive"));
    }
    let points = string_points(record, options.string_length, options.startup_cut)?;
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    let f = options.correction_factor;
    let estimate = match protocol {
        Protocol::Pooled => {
            let s = summarize(&values, f).ok_or_else(|| Error::InsufficientData("need two string points".into()))?;
            if !(s.error > 0.0) {
                return Err(domain("string points have zero scatter"));
            }
            ShiftEstimate { value_hz: s.mean, error_hz: s.error, n_strings: values.len(), chi_red_sqrt: 1.0, protocol }
        }
        Protocol::Binned => {
            let (lo, hi) = options.chi_window;
            let min_bin = (4 * options.string_length).max(8);
            let mut best: Option<(f64, WeightedMean)> = None;
            let mut bin = min_bin;
            while values.len() / bin >= 2 {
                let runs = binned(&values, bin, f);
                let wm = weighted_mean(&runs)?;
                let distance = (wm.chi_red - 1.0).abs();
                if best.is_none_or(|(d, _)| distance < d) {
                    best = Some((distance, wm));
                }
                if (lo..=hi).contains(&wm.chi_red) {
                    break;
                }
                bin = (bin as f64 * 1.25).ceil() as usize;
            }
            let (_, wm) = best.ok_or_else(|| Error::InsufficientData("too few strings for two bins".into()))?;
            ShiftEstimate {
                value_hz: wm.mean,
                error_hz: wm.error,
                n_strings: values.len(),
                chi_red_sqrt: wm.chi_red.sqrt(),
                protocol,
            }
        }
        Protocol::ByDay | Protocol::BySegment => {
            let runs = if protocol == Protocol::ByDay {
                grouped(&points, |p| p.day_id, f)
            } else {
                grouped(&points, |p| p.run_id, f)
            };
            ShiftEstimate { n_strings: values.len(), ..aggregate(&runs, protocol)? }
        }
    };
    Ok(estimate)
}
