//! Analysis chain for interference records: fringe visibility, phase
//! extraction, Welch PSD, delay transfer-function compensation, frequency-PSD
//! conversion and multi-rate stitching.
//!
//! An AMZI with delay `τ` sees `Δφ(t) = φ(t+τ) − φ(t)`, whose PSD is
//! `S_Δφ(f) = 4 sin²(πfτ)·S_φ(f)`. [`compensate_delay`] divides that factor out
//! except near its nulls at `k/τ`, where bins are masked instead. The
//! frequency-noise PSD is `S_ν(f) = f²·S_φ(f)`.

mod stitch;
mod visibility;
mod welch;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

pub use stitch::{stitch_spectra, StitchConsistency, Stitched};
pub use visibility::{
    extract_phase, moving_extrema_visibility, PhaseExtraction, VisibilityEstimate,
    DEFAULT_EXTREMA_WINDOW, DEFAULT_SMOOTH_WINDOW,
};
pub use welch::{hann, segmentation, welch_psd, DEFAULT_OVERLAP, DEFAULT_WINDOW_LEN};

/// Default masking threshold on `sin²(πfτ)` (about 13 dB of maximum gain).
pub const DEFAULT_NULL_GUARD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumUnit {
    /// rad²/Hz
    PhasePsd,
    /// Hz²/Hz
    FreqPsd,
}

impl SpectrumUnit {
    pub fn label(self) -> &'static str {
        match self {
            Self::PhasePsd => "rad^2/Hz",
            Self::FreqPsd => "Hz^2/Hz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
}

/// Parameters of the Welch estimate behind a spectrum (one entry per
/// stitched part).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchMeta {
    pub fs: f64,
    pub window_len: usize,
    pub overlap: f64,
    pub window: WindowKind,
    pub segments: usize,
}

/// One-sided PSD on a strictly increasing, DC-free frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    freqs: Vec<f64>,
    values: Vec<f64>,
    unit: SpectrumUnit,
    valid: Vec<bool>,
    meta: Vec<WelchMeta>,
}

impl SpectrumEstimate {
    pub fn new(
        freqs: Vec<f64>,
        values: Vec<f64>,
        unit: SpectrumUnit,
        valid: Vec<bool>,
        meta: Vec<WelchMeta>,
    ) -> Result<Self> {
        if freqs.len() != values.len() || valid.len() != values.len() {
            return arg(format!(
                "spectrum arrays differ in length: {} freqs, {} values, {} mask",
                freqs.len(),
                values.len(),
                valid.len()
            ));
        }
        if freqs.first().is_some_and(|&f| !(f > 0.0)) {
            return arg("spectrum frequencies must be > 0");
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return arg("spectrum frequencies must be strictly increasing");
        }
        if values
            .iter()
            .zip(&valid)
            .any(|(v, &ok)| ok && !(v.is_finite() && *v >= 0.0))
        {
            return arg("valid spectrum bins must be finite and >= 0");
        }
        Ok(Self {
            freqs,
            values,
            unit,
            valid,
            meta,
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn unit(&self) -> SpectrumUnit {
        self.unit
    }

    pub fn meta(&self) -> &[WelchMeta] {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Bin spacing of a single-part estimate.
    pub fn resolution(&self) -> Option<f64> {
        match self.meta.as_slice() {
            [m] => Some(m.fs / m.window_len as f64),
            _ => None,
        }
    }

    /// `(freq, value)` pairs of valid bins.
    pub fn valid_bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs
            .iter()
            .zip(&self.values)
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|((&f, &v), _)| (f, v))
    }

    /// Bins with `lo <= f <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> Result<SpectrumEstimate> {
        if !(lo <= hi) {
            return arg(format!("empty band [{lo}, {hi}] Hz"));
        }
        let keep: Vec<usize> = (0..self.freqs.len())
            .filter(|&i| self.freqs[i] >= lo && self.freqs[i] <= hi)
            .collect();
        Self::new(
            keep.iter().map(|&i| self.freqs[i]).collect(),
            keep.iter().map(|&i| self.values[i]).collect(),
            self.unit,
            keep.iter().map(|&i| self.valid[i]).collect(),
            self.meta.clone(),
        )
    }

    /// Median of valid values with `lo <= f <= hi`.
    pub fn median_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .valid_bins()
            .filter(|(f, _)| *f >= lo && *f <= hi)
            .map(|(_, v)| v)
            .collect();
        median(vals)
    }

    /// Per-decade statistics of the valid bins.
    pub fn band_stats(&self) -> Vec<BandStat> {
        let Some((&first, &last)) = self.freqs.first().zip(self.freqs.last()) else {
            return Vec::new();
        };
        let lo = first.log10().floor() as i32;
        let hi = last.log10().floor() as i32;
        (lo..=hi)
            .filter_map(|d| {
                let (f_lo, f_hi) = (10f64.powi(d), 10f64.powi(d + 1));
                let vals: Vec<f64> = self
                    .valid_bins()
                    .filter(|(f, _)| *f >= f_lo && *f < f_hi)
                    .map(|(_, v)| v)
                    .collect();
                let bins = vals.len();
                let mean = vals.iter().sum::<f64>() / bins.max(1) as f64;
                median(vals).map(|m| BandStat {
                    f_lo,
                    f_hi,
                    bins,
                    median: m,
                    mean,
                })
            })
            .collect()
    }
}

/// Summary of one decade of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandStat {
    pub f_lo: f64,
    pub f_hi: f64,
    pub bins: usize,
    pub median: f64,
    pub mean: f64,
}

pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// `4 sin²(πfτ)`.
pub fn delay_transfer(f: f64, tau: f64) -> f64 {
    4.0 * (PI * f * tau).sin().powi(2)
}

/// Recovers `S_φ = S_Δφ / (4 sin²(πfτ))`. Bins with `sin²(πfτ) < null_guard`
/// are marked invalid and set to zero.
pub fn compensate_delay(s_dphi: &SpectrumEstimate, tau: f64, null_guard: f64) -> Result<SpectrumEstimate> {
    if s_dphi.unit != SpectrumUnit::PhasePsd {
        return arg("delay compensation needs a phase PSD");
    }
    if !(tau.is_finite() && tau > 0.0) {
        return arg(format!("delay must be > 0, got {tau}"));
    }
    if !(null_guard > 0.0 && null_guard < 1.0) {
        return arg(format!("null_guard must lie in (0, 1), got {null_guard}"));
    }
    let mut values = Vec::with_capacity(s_dphi.len());
    let mut valid = Vec::with_capacity(s_dphi.len());
    for ((&f, &v), &ok) in s_dphi.freqs.iter().zip(&s_dphi.values).zip(&s_dphi.valid) {
        let g = delay_transfer(f, tau);
        if ok && g >= 4.0 * null_guard {
            values.push(v / g);
            valid.push(true);
        } else {
            values.push(0.0);
            valid.push(false);
        }
    }
    SpectrumEstimate::new(
        s_dphi.freqs.clone(),
        values,
        SpectrumUnit::PhasePsd,
        valid,
        s_dphi.meta.clone(),
    )
}

/// `S_ν(f) = f²·S_φ(f)`.
pub fn to_frequency_psd(s_phi: &SpectrumEstimate) -> Result<SpectrumEstimate> {
    if s_phi.unit != SpectrumUnit::PhasePsd {
        return arg("frequency-PSD conversion needs a phase PSD");
    }
    let values = s_phi
        .freqs
        .iter()
        .zip(&s_phi.values)
        .map(|(f, v)| f * f * v)
        .collect();
    SpectrumEstimate::new(
        s_phi.freqs.clone(),
        values,
        SpectrumUnit::FreqPsd,
        s_phi.valid.clone(),
        s_phi.meta.clone(),
    )
}
