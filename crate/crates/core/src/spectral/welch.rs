//! Welch PSD with periodic Hann windows.
//!
//! Normalisation is the variance-preserving density convention: bins
//! `1..L/2` are doubled, `P_k = 2|X_k|² / (fs·Σw²)`, so that `Σ P_k·Δf`
//! approximates the variance of the (mean-removed) series. The DC bin is
//! dropped from the output.

use std::f64::consts::PI;

use rayon::prelude::*;
use realfft::RealFftPlanner;

use super::{SpectrumEstimate, SpectrumUnit, WelchMeta, WindowKind};
use crate::error::{arg, Error, Result};
use crate::trace::Sampled;

/// Window length used when none is given.
pub const DEFAULT_WINDOW_LEN: usize = 1_000_000;
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// Upper bound on concurrently accumulated partial spectra. The partition of
/// segments into groups depends only on the segment count, so results do not
/// depend on the thread count.
const MAX_GROUPS: usize = 16;

pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Number of segments and hop for a record of `n` samples.
pub fn segmentation(n: usize, window_len: usize, overlap: f64) -> (usize, usize) {
    let hop = ((window_len as f64 * (1.0 - overlap)).floor() as usize).max(1);
    let segments = if n < window_len { 0 } else { (n - window_len) / hop + 1 };
    (segments, hop)
}

/// One-sided PSD of `trace` by averaged Hann-windowed periodograms.
pub fn welch_psd<T: Sampled + ?Sized>(trace: &T, window_len: usize, overlap: f64) -> Result<SpectrumEstimate> {
    let x = trace.samples();
    let fs = trace.fs();
    if window_len < 2 {
        return arg(format!("window length must be >= 2, got {window_len}"));
    }
    if window_len > x.len() {
        return arg(format!(
            "window length {window_len} exceeds trace length {}",
            x.len()
        ));
    }
    if !(0.0..1.0).contains(&overlap) {
        return arg(format!("overlap must lie in [0, 1), got {overlap}"));
    }
    let (segments, hop) = segmentation(x.len(), window_len, overlap);
    let window = hann(window_len);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(window_len);
    let bins = window_len / 2 + 1;

    let groups = segments.min(MAX_GROUPS);
    let per_group = segments.div_ceil(groups);
    let partials: Vec<Vec<f64>> = (0..groups)
        .into_par_iter()
        .map(|g| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; bins];
            let mut buf = fft.make_input_vec();
            let mut spec = fft.make_output_vec();
            let mut scratch = fft.make_scratch_vec();
            let first = g * per_group;
            let last = ((g + 1) * per_group).min(segments);
            for s in first..last {
                let seg = &x[s * hop..s * hop + window_len];
                let mean = seg.iter().sum::<f64>() / window_len as f64;
                for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
                    *b = (v - mean) * w;
                }
                fft.process_with_scratch(&mut buf, &mut spec, &mut scratch)
                    .map_err(|e| Error::Model(format!("forward transform failed: {e}")))?;
                for (a, c) in acc.iter_mut().zip(&spec) {
                    *a += c.norm_sqr();
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![0.0; bins];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let scale = 1.0 / (fs * window_power * segments as f64);
    let nyquist_bin = window_len.is_multiple_of(2).then_some(window_len / 2);
    let df = fs / window_len as f64;
    let (freqs, values): (Vec<f64>, Vec<f64>) = (1..bins)
        .map(|k| {
            let one_sided = if Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            (k as f64 * df, one_sided * total[k] * scale)
        })
        .unzip();
    let valid = vec![true; freqs.len()];
    SpectrumEstimate::new(
        freqs,
        values,
        SpectrumUnit::PhasePsd,
        valid,
        vec![WelchMeta {
            fs,
            window_len,
            overlap,
            window: WindowKind::Hann,
            segments,
        }],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::PhaseTrace;

    #[test]
    fn segment_count() {
        assert_eq!(segmentation(1024, 256, 0.5), (7, 128));
        assert_eq!(segmentation(1024, 256, 0.0), (4, 256));
        assert_eq!(segmentation(255, 256, 0.5).0, 0);
    }

    #[test]
    fn zero_trace_gives_zero_psd() {
        let z = PhaseTrace::zeros(4096, 100.0).unwrap();
        let p = welch_psd(&z, 512, 0.5).unwrap();
        assert_eq!(p.len(), 256);
        assert!(p.values().iter().all(|&v| v == 0.0));
        assert_eq!(p.freqs()[0], 100.0 / 512.0);
        assert_eq!(*p.freqs().last().unwrap(), 50.0);
    }

    #[test]
    fn rejects_bad_windows() {
        let z = PhaseTrace::zeros(100, 1.0).unwrap();
        assert!(welch_psd(&z, 101, 0.5).is_err());
        assert!(welch_psd(&z, 50, 1.0).is_err());
        assert!(welch_psd(&z, 50, -0.1).is_err());
    }

    #[test]
    fn tone_power_integrates_to_half_amplitude_squared() {
        let (fs, n, a) = (1000.0, 1 << 16, 0.7);
        // Frequency between bins so the tone leaks over several of them.
        let f0 = 123.37;
        let x: Vec<f64> = (0..n)
            .map(|i| a * (2.0 * PI * f0 * i as f64 / fs).sin())
            .collect();
        let p = welch_psd(&PhaseTrace::new(x, fs, 0.0).unwrap(), 4096, 0.5).unwrap();
        let df = p.freqs()[0];
        let power: f64 = p
            .freqs()
            .iter()
            .zip(p.values())
            .filter(|(f, _)| (**f - f0).abs() < 10.0 * df)
            .map(|(_, v)| v * df)
            .sum();
        let expected = a * a / 2.0;
        assert!(((power - expected) / expected).abs() < 0.02, "{power}");
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let x: Vec<f64> = (0..50_000).map(|i| ((i * 7919) % 1013) as f64 / 1013.0).collect();
        let t = PhaseTrace::new(x, 10.0, 0.0).unwrap();
        let a = welch_psd(&t, 1000, 0.5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| welch_psd(&t, 1000, 0.5).unwrap());
        assert_eq!(a.values(), b.values());
    }
}
