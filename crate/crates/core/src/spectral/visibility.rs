use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::interferometer::{Fringe, VoltageTrace};
use crate::synth::{PhaseTrace, Provenance};
use crate::trace::Sampled;

/// Default moving-average length [samples].
pub const DEFAULT_SMOOTH_WINDOW: usize = 512;
/// Default extrema-search window [samples].
pub const DEFAULT_EXTREMA_WINDOW: usize = 1 << 17;

/// Fringe contrast estimate and the extrema it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub visibility: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub window_samples: usize,
}

impl VisibilityEstimate {
    /// `(S, D)` built from the recorded extrema.
    pub fn fringe(&self) -> Fringe {
        Fringe {
            s: self.p_max + self.p_min,
            d: self.p_max - self.p_min,
        }
    }
}

fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1 - w);
    let mut sum: f64 = x[..w].iter().sum();
    out.push(sum / w as f64);
    for i in w..x.len() {
        sum += x[i] - x[i - w];
        out.push(sum / w as f64);
    }
    out
}

/// Conservative visibility: smooth with a `smooth_window` moving average,
/// split the smoothed record into consecutive `extrema_window` tiles, compute
/// `(max − min)/(max + min)` in each and keep the smallest.
///
/// When the smoothed record is shorter than one tile the whole record is used.
pub fn moving_extrema_visibility<T: Sampled + ?Sized>(
    trace: &T,
    smooth_window: usize,
    extrema_window: usize,
) -> Result<VisibilityEstimate> {
    let x = trace.samples();
    if smooth_window == 0 {
        return arg("smoothing window must be >= 1");
    }
    if extrema_window <= smooth_window {
        return arg(format!(
            "extrema window {extrema_window} must exceed smoothing window {smooth_window}"
        ));
    }
    if extrema_window > x.len() {
        return arg(format!(
            "extrema window {extrema_window} exceeds trace length {}",
            x.len()
        ));
    }
    let smooth = moving_average(x, smooth_window);
    let tile = extrema_window.min(smooth.len());
    let mut best: Option<VisibilityEstimate> = None;
    for chunk in smooth.chunks_exact(tile) {
        let (lo, hi) = chunk
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let v = if hi + lo > 0.0 {
            ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if best.is_none_or(|b| v < b.visibility) {
            best = Some(VisibilityEstimate {
                visibility: v,
                p_max: hi,
                p_min: lo,
                window_samples: tile,
            });
        }
    }
    // chunks_exact yields at least one tile because tile <= smooth.len().
    Ok(best.expect("at least one extrema tile"))
}

/// Phase recovered from an interference record.
#[derive(Debug, Clone)]
pub struct PhaseExtraction {
    pub phase: PhaseTrace,
    /// Fraction of samples whose normalised value fell outside [-1, 1].
    pub clamped_fraction: f64,
}

/// Inverts the fringe law: `Δφ = arccos(clamp((2V − s)/d, −1, 1))`, in `[0, π]`.
///
/// Excursions beyond `[0, π]` fold back into it; no unwrapping is attempted.
pub fn extract_phase(trace: &VoltageTrace, s: f64, d: f64) -> Result<PhaseExtraction> {
    if !(d.is_finite() && d > 0.0) {
        return arg(format!("fringe difference d must be > 0, got {d}"));
    }
    if !(s.is_finite() && s >= d) {
        return arg(format!("fringe sum s must be >= d, got s = {s}, d = {d}"));
    }
    let mut clamped = 0usize;
    let samples: Vec<f64> = trace
        .samples()
        .iter()
        .map(|&v| {
            let c = (2.0 * v - s) / d;
            if !(-1.0..=1.0).contains(&c) {
                clamped += 1;
            }
            c.clamp(-1.0, 1.0).acos()
        })
        .collect();
    let n = samples.len();
    Ok(PhaseExtraction {
        phase: PhaseTrace::with_provenance(samples, trace.fs(), trace.t0(), Provenance::derived_from(None))?,
        clamped_fraction: clamped as f64 / n as f64,
    })
}
