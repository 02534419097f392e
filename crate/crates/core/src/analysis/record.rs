use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Low,
    High,
}

impl Density {
    pub fn flipped(self) -> Self {
        match self {
            Density::Low => Density::High,
            Density::High => Density::Low,
        }
    }
}

/// One center-frequency estimate (two interrogations) of the clock laser lock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordPoint {
    pub index: u64,
    pub frequency_hz: f64,
    pub density: Density,
    pub run_id: u32,
    pub day_id: u32,
}

/// Ordered frequency points; a lock segment is a maximal stretch of equal `run_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRecord {
    points: Vec<RecordPoint>,
}

impl FrequencyRecord {
    /// Indices must increase strictly, and the density tag must flip between
    /// points whose indices differ by an odd number.
    pub fn new(points: Vec<RecordPoint>) -> Result<Self> {
        for p in &points {
            if !p.frequency_hz.is_finite() {
                return Err(domain(format!("non-finite frequency at index {}", p.index)));
            }
        }
        for w in points.windows(2) {
            let gap = w[1].index.checked_sub(w[0].index).filter(|&g| g > 0).ok_or_else(|| {
                domain(format!("record indices must increase strictly ({} then {})", w[0].index, w[1].index))
            })?;
            let should_flip = gap % 2 == 1;
            if (w[0].density != w[1].density) != should_flip {
                return Err(domain(format!("density tag does not alternate at index {}", w[1].index)));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[RecordPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lock segments as index ranges into `points`.
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.points.len() {
            if i == self.points.len() || self.points[i].run_id != self.points[start].run_id {
                if i > start {
                    out.push(start..i);
                }
                start = i;
            }
        }
        out
    }

    /// Same record with every density tag swapped.
    pub fn with_swapped_density(&self) -> Self {
        let points = self.points.iter().map(|p| RecordPoint { density: p.density.flipped(), ..*p }).collect();
        Self { points }
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| domain(format!("record header: {e}")))?.clone();
        let expected = ["index", "frequency_hz", "density", "run_id", "day_id"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(domain(format!("record header must be {}", expected.join(","))));
        }
        let mut points = Vec::new();
        for (line, row) in rdr.deserialize::<RecordPoint>().enumerate() {
            points.push(row.map_err(|e| domain(format!("record row {}: {e}", line + 1)))?);
        }
        Self::new(points)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for p in &self.points {
            writer.serialize(p).map_err(|e| domain(format!("csv: {e}")))?;
        }
        let bytes = writer.into_inner().map_err(|e| domain(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| domain(format!("csv: {e}")))
    }
}

/// Parameters of a synthetic alternating-density record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    /// High-minus-low frequency offset, Hz.
    pub true_shift: f64,
    /// Drift polynomial coefficients c_k of Σ c_k l^k, Hz.
    pub drift: Vec<f64>,
    pub noise_sigma: f64,
    pub length: usize,
    /// Points per lock segment (the last segment may be shorter).
    pub run_length: usize,
    pub runs_per_day: usize,
}

impl SynthesisSpec {
    pub fn new(true_shift: f64, drift: Vec<f64>, noise_sigma: f64, length: usize) -> Self {
        Self { true_shift, drift, noise_sigma, length, run_length: length.max(1), runs_per_day: 1 }
    }
}

/// Even indices are low density, odd indices high.
pub fn synthesize_record(spec: &SynthesisSpec, seed: u64) -> Result<FrequencyRecord> {
    if spec.length == 0 || spec.length % 2 != 0 {
        return Err(domain(format!("record length must be positive and even, got {}", spec.length)));
    }
    if spec.run_length == 0 || spec.runs_per_day == 0 {
        return Err(domain("run length and runs per day must be positive"));
    }
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| domain(format!("noise sigma {}: {e}", spec.noise_sigma)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..spec.length)
        .map(|l| {
            let x = l as f64;
            let drift = spec.drift.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let density = if l % 2 == 0 { Density::Low } else { Density::High };
            let offset = if density == Density::High { spec.true_shift } else { 0.0 };
            let run = (l / spec.run_length) as u32;
            RecordPoint {
                index: l as u64,
                frequency_hz: drift + offset + noise.sample(&mut rng),
                density,
                run_id: run,
                day_id: run / spec.runs_per_day as u32,
            }
        })
        .collect();
    FrequencyRecord::new(points)
}
