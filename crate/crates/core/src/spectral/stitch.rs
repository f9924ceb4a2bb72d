use serde::{Deserialize, Serialize};

use super::SpectrumEstimate;
use crate::error::{arg, Result};

/// Agreement of two adjacent parts around their shared boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StitchConsistency {
    pub boundary: f64,
    /// Band over which the medians were taken: one decade centred on the
    /// boundary, clipped to the overlap of the two parts.
    pub f_lo: f64,
    pub f_hi: f64,
    pub lower_median: Option<f64>,
    pub upper_median: Option<f64>,
    /// `10·log10(upper / lower)`.
    pub ratio_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Stitched {
    pub spectrum: SpectrumEstimate,
    pub consistency: Vec<StitchConsistency>,
}

/// Concatenates spectra ordered by increasing coverage. Part `i` supplies the
/// bins in `[boundaries[i-1], boundaries[i])`; the first part starts at its
/// lowest bin and the last runs to its highest. Values are never rescaled.
pub fn stitch_spectra(parts: &[SpectrumEstimate], boundaries: &[f64]) -> Result<Stitched> {
    let Some(first) = parts.first() else {
        return arg("no spectra to stitch");
    };
    if boundaries.len() + 1 != parts.len() {
        return arg(format!(
            "{} parts need {} boundaries, got {}",
            parts.len(),
            parts.len() - 1,
            boundaries.len()
        ));
    }
    if parts.iter().any(|p| p.unit() != first.unit()) {
        return arg("cannot stitch spectra with different units");
    }
    if parts.iter().any(|p| p.is_empty()) {
        return arg("cannot stitch an empty spectrum");
    }
    if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
        return arg("stitch boundaries must be strictly increasing");
    }

    let mut consistency = Vec::with_capacity(boundaries.len());
    for (i, &b) in boundaries.iter().enumerate() {
        let (lower, upper) = (&parts[i], &parts[i + 1]);
        let overlap_lo = upper.freqs()[0];
        let overlap_hi = *lower.freqs().last().expect("non-empty");
        if !(overlap_lo <= b && b <= overlap_hi) {
            return arg(format!(
                "boundary {b} Hz is outside the overlap [{overlap_lo}, {overlap_hi}] Hz of parts {i} and {}",
                i + 1
            ));
        }
        let span = 10f64.sqrt();
        let f_lo = (b / span).max(overlap_lo);
        let f_hi = (b * span).min(overlap_hi);
        let lower_median = lower.median_in(f_lo, f_hi);
        let upper_median = upper.median_in(f_lo, f_hi);
        let ratio_db = match (lower_median, upper_median) {
            (Some(l), Some(u)) if l > 0.0 && u > 0.0 => Some(10.0 * (u / l).log10()),
            _ => None,
        };
        consistency.push(StitchConsistency {
            boundary: b,
            f_lo,
            f_hi,
            lower_median,
            upper_median,
            ratio_db,
        });
    }

    let mut freqs = Vec::new();
    let mut values = Vec::new();
    let mut valid = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        let lo = if i == 0 { f64::NEG_INFINITY } else { boundaries[i - 1] };
        let hi = boundaries.get(i).copied().unwrap_or(f64::INFINITY);
        for ((&f, &v), &ok) in p.freqs().iter().zip(p.values()).zip(p.valid()) {
            if f >= lo && f < hi {
                freqs.push(f);
                values.push(v);
                valid.push(ok);
            }
        }
    }
    let meta = parts.iter().flat_map(|p| p.meta().iter().copied()).collect();
    Ok(Stitched {
        spectrum: SpectrumEstimate::new(freqs, values, first.unit(), valid, meta)?,
        consistency,
    })
}
