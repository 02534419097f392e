use crate::error::{domain, Error, Result};

/// Overlapping Allan deviation of an equally spaced series at averaging
/// factors `taus` (in samples).
pub fn allan_deviation(series: &[f64], taus: &[usize]) -> Result<Vec<f64>> {
    let len = series.len();
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    for x in series {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + x);
    }
    taus.iter()
        .map(|&m| {
            if m == 0 {
                return Err(domain("averaging factor must be positive"));
            }
            if len < 2 * m + 1 {
                return Err(Error::InsufficientData(format!("{len} samples cannot support τ = {m} (need {})", 2 * m + 1)));
            }
            let terms = len - 2 * m + 1;
            let mut acc = 0.0;
            for j in 0..terms {
                let second = prefix[j + 2 * m] - prefix[j + m];
                let first = prefix[j + m] - prefix[j];
                acc += (second - first).powi(2);
            }
            Ok((acc / (2.0 * (m * m) as f64 * terms as f64)).sqrt())
        })
        .collect()
}
