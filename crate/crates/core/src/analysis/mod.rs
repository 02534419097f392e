//! Frequency-record statistics: overlapping string analysis with drift
//! removal, overlap correction, Allan deviation and run aggregation.

mod aggregate;
mod allan;
mod record;
mod strings;

pub use aggregate::{aggregate, analyze, weighted_mean, AnalysisOptions, Protocol, RunSummary, ShiftEstimate, WeightedMean};
pub use allan::allan_deviation;
pub use record::{synthesize_record, Density, FrequencyRecord, RecordPoint, SynthesisSpec};
pub use strings::{
    monte_carlo_correction, monte_carlo_correction_with_stride, normalized_string_shift, overlap_correction_factor,
    printed_correction_factor, string_points, string_shift, CorrectionEstimate, StringPoint,
};
