//! Seeded phase-noise synthesis.
//!
//! [`synth_colored`] draws independent circular Gaussian coefficients per
//! positive-frequency bin, scaled so the expected one-sided periodogram equals
//! the model PSD, and inverse-transforms to a real series. The DC bin is
//! always zero and nothing below the lowest bin `fs/n` is generated, so
//! `f^-2` terms are truncated there.
//!
//! All generators use ChaCha8 seeded from a `u64`; identical arguments give
//! bit-identical output.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use realfft::num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::noisemodel::PsdModel;
use crate::seed;
use crate::trace::{check_series, same_rate, Sampled};

/// Generator that produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Colored,
    ColoredChunked,
    Wiener,
    /// Computed from other traces (sums, patterns, delay differences).
    Derived,
    /// Loaded from a file or built by hand.
    External,
}

impl Algorithm {
    pub fn tag(self) -> u8 {
        match self {
            Self::Colored => 1,
            Self::ColoredChunked => 2,
            Self::Wiener => 3,
            Self::Derived => 4,
            Self::External => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Self::External,
            1 => Self::Colored,
            2 => Self::ColoredChunked,
            3 => Self::Wiener,
            4 => Self::Derived,
            _ => return None,
        })
    }
}

/// Seed and generator behind a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub seed: Option<u64>,
}

impl Provenance {
    pub const EXTERNAL: Self = Self {
        algorithm: Algorithm::External,
        seed: None,
    };

    pub fn derived_from(seed: Option<u64>) -> Self {
        Self {
            algorithm: Algorithm::Derived,
            seed,
        }
    }
}

/// Uniformly sampled optical phase [rad].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    samples: Vec<f64>,
    fs: f64,
    t0: f64,
    provenance: Provenance,
}

impl PhaseTrace {
    pub fn new(samples: Vec<f64>, fs: f64, t0: f64) -> Result<Self> {
        Self::with_provenance(samples, fs, t0, Provenance::EXTERNAL)
    }

    pub fn with_provenance(
        samples: Vec<f64>,
        fs: f64,
        t0: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        check_series(&samples, fs, "phase trace")?;
        if !t0.is_finite() {
            return arg("phase trace: t0 must be finite");
        }
        Ok(Self {
            samples,
            fs,
            t0,
            provenance,
        })
    }

    pub fn zeros(n: usize, fs: f64) -> Result<Self> {
        Self::new(vec![0.0; n], fs, 0.0)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Applies `f` to every sample in place.
    pub fn map(mut self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        self.samples.par_iter_mut().for_each(|v| *v = f(*v));
        self
    }

    /// Builds a trace from samples the caller knows to be valid.
    pub(crate) fn from_parts(samples: Vec<f64>, fs: f64, t0: f64, provenance: Provenance) -> Self {
        debug_assert!(!samples.is_empty() && fs > 0.0);
        Self {
            samples,
            fs,
            t0,
            provenance,
        }
    }
}

impl Sampled for PhaseTrace {
    fn samples(&self) -> &[f64] {
        &self.samples
    }
    fn fs(&self) -> f64 {
        self.fs
    }
    fn t0(&self) -> f64 {
        self.t0
    }
}

fn check_colored_args(model: &PsdModel, fs: f64, n: usize) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return arg(format!("sampling rate must be > 0, got {fs}"));
    }
    if n < 2 || !n.is_power_of_two() {
        return arg(format!("trace length must be a power of two >= 2, got {n}"));
    }
    if fs / 2.0 > model.f_max() {
        return Err(Error::Range(format!(
            "Nyquist frequency {} Hz exceeds model f_max {} Hz",
            fs / 2.0,
            model.f_max()
        )));
    }
    if fs / (n as f64) < model.f_min() {
        return Err(Error::Range(format!(
            "lowest bin {} Hz is below model f_min {} Hz",
            fs / n as f64,
            model.f_min()
        )));
    }
    Ok(())
}

fn colored_samples(model: &PsdModel, fs: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let df = fs / n as f64;
    let half = n / 2;
    let nf = n as f64;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); half + 1];
    for (k, bin) in spectrum.iter_mut().enumerate().take(half).skip(1) {
        let s = model.bin_mean(k as f64 * df, df)?;
        let amp = (s * fs * nf / 4.0).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *bin = Complex64::new(amp * re, amp * im);
    }
    let s_nyq = model.bin_mean(fs / 2.0, df)?;
    let g: f64 = StandardNormal.sample(&mut rng);
    spectrum[half] = Complex64::new((s_nyq * fs * nf).sqrt() * g, 0.0);

    let mut planner = RealFftPlanner::<f64>::new();
    let c2r = planner.plan_fft_inverse(n);
    let mut out = c2r.make_output_vec();
    c2r.process(&mut spectrum, &mut out)
        .map_err(|e| Error::Model(format!("inverse transform failed: {e}")))?;
    let scale = 1.0 / nf;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Gaussian phase noise of length `n` (a power of two) whose expected
/// one-sided PSD equals `model` on the bins `k·fs/n`, `k = 1..=n/2`.
pub fn synth_colored(model: &PsdModel, fs: f64, n: usize, seed: u64) -> Result<PhaseTrace> {
    check_colored_args(model, fs, n)?;
    let samples = colored_samples(model, fs, n, seed)?;
    Ok(PhaseTrace::from_parts(
        samples,
        fs,
        0.0,
        Provenance {
            algorithm: Algorithm::Colored,
            seed: Some(seed),
        },
    ))
}

/// Long-trace variant of [`synth_colored`]: concatenates independent
/// segments of `chunk_len` samples (a power of two), segment `c` seeded with
/// `seed::derive(seed, c)`, truncated to `len` samples.
///
/// Each segment resolves down to `fs / chunk_len`; content of the model below
/// that frequency is not generated.
pub fn synth_colored_chunked(
    model: &PsdModel,
    fs: f64,
    len: usize,
    chunk_len: usize,
    seed: u64,
) -> Result<PhaseTrace> {
    check_colored_args(model, fs, chunk_len)?;
    if len == 0 {
        return arg("trace length must be > 0");
    }
    let mut samples = vec![0.0; len];
    samples
        .par_chunks_mut(chunk_len)
        .enumerate()
        .try_for_each(|(c, out)| -> Result<()> {
            let chunk = colored_samples(model, fs, chunk_len, seed::derive(seed, c as u64))?;
            out.copy_from_slice(&chunk[..out.len()]);
            Ok(())
        })?;
    Ok(PhaseTrace::from_parts(
        samples,
        fs,
        0.0,
        Provenance {
            algorithm: Algorithm::ColoredChunked,
            seed: Some(seed),
        },
    ))
}

/// Infinite stream of Wiener-process samples starting at zero, with
/// Gaussian increments of variance `diffusion / fs`.
#[derive(Debug, Clone)]
pub struct WienerSteps {
    rng: ChaCha8Rng,
    step: Normal<f64>,
    value: f64,
    started: bool,
}

impl WienerSteps {
    pub fn new(diffusion: f64, fs: f64, seed: u64) -> Result<Self> {
        if !(diffusion.is_finite() && diffusion >= 0.0) {
            return arg(format!("diffusion must be >= 0, got {diffusion}"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return arg(format!("sampling rate must be > 0, got {fs}"));
        }
        let step = Normal::new(0.0, (diffusion / fs).sqrt())
            .map_err(|e| Error::Argument(e.to_string()))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            step,
            value: 0.0,
            started: false,
        })
    }
}

impl Iterator for WienerSteps {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.started {
            self.value += self.step.sample(&mut self.rng);
        } else {
            self.started = true;
        }
        Some(self.value)
    }
}

/// Wiener phase process: cumulative sum of i.i.d. `N(0, diffusion/fs)`
/// increments, starting at 0.
pub fn synth_wiener(diffusion: f64, fs: f64, n: usize, seed: u64) -> Result<PhaseTrace> {
    if n < 2 {
        return arg(format!("Wiener trace needs n >= 2, got {n}"));
    }
    let samples: Vec<f64> = WienerSteps::new(diffusion, fs, seed)?.take(n).collect();
    Ok(PhaseTrace::from_parts(
        samples,
        fs,
        0.0,
        Provenance {
            algorithm: Algorithm::Wiener,
            seed: Some(seed),
        },
    ))
}

/// Binary phase key of the TF-QKD coding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKey {
    Zero,
    Pi,
}

impl PhaseKey {
    pub fn radians(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Pi => PI,
        }
    }
}

/// Adds `pattern[k mod len]` to every sample of the `k`-th dwell interval.
pub fn apply_phase_pattern(trace: &PhaseTrace, pattern: &[PhaseKey], dwell: f64) -> Result<PhaseTrace> {
    if pattern.is_empty() {
        return arg("phase pattern is empty");
    }
    let per_dwell = dwell * trace.fs;
    if !(per_dwell.is_finite() && per_dwell >= 1.0 - 1e-9) {
        return arg(format!(
            "dwell {dwell} s is shorter than one sample at {} Hz",
            trace.fs
        ));
    }
    let samples = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            // Tolerates dwell·fs landing a hair below an integer.
            let k = (i as f64 / per_dwell + 1e-9).floor() as usize;
            v + pattern[k % pattern.len()].radians()
        })
        .collect();
    Ok(PhaseTrace::from_parts(
        samples,
        trace.fs,
        trace.t0,
        Provenance::derived_from(trace.provenance.seed),
    ))
}

/// Elementwise sum of two traces with identical rate, start time and length.
pub fn sum_traces(a: &PhaseTrace, b: &PhaseTrace) -> Result<PhaseTrace> {
    if !same_rate(a.fs, b.fs) {
        return arg(format!("sampling rates differ: {} vs {} Hz", a.fs, b.fs));
    }
    if a.len() != b.len() {
        return arg(format!("lengths differ: {} vs {}", a.len(), b.len()));
    }
    if (a.t0 - b.t0).abs() > 0.5 / a.fs {
        return arg(format!("start times differ: {} vs {} s", a.t0, b.t0));
    }
    let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect();
    Ok(PhaseTrace::from_parts(
        samples,
        a.fs,
        a.t0,
        Provenance::derived_from(None),
    ))
}

/// In-place `a += b`; same checks as [`sum_traces`].
pub fn add_into(a: &mut PhaseTrace, b: &PhaseTrace) -> Result<()> {
    if !same_rate(a.fs, b.fs) || a.len() != b.len() {
        return arg("traces to add must share sampling rate and length");
    }
    a.samples.iter_mut().zip(&b.samples).for_each(|(x, y)| *x += y);
    a.provenance = Provenance::derived_from(None);
    Ok(())
}
