//! Asymmetric Mach-Zehnder interferometer and classical detection chain.
//!
//! The output port power follows the two-beam fringe law
//! `P = ½{S + D·cos Δφ}` with `S = P_max + P_min` and `D = P_max − P_min`.
//! For arm powers `P1`, `P2` arriving at a 50:50 output coupler the ideal
//! extrema are `P_max,min = ½(√P1 ± √P2)²`, so `S = P1 + P2` and
//! `D = 2√(P1·P2)`, giving an ideal visibility `2√(P1·P2)/(P1 + P2)`.
//! `visibility_cap` scales `D` to lump polarisation mismatch and residual
//! imbalance into one number.
//!
//! Detector bandwidth is not modelled: simulated rates stay far below the
//! 5 GHz photodetector bandwidth.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::interp::FractionalDelay;
use crate::noisemodel::PsdModel;
use crate::seed;
use crate::synth::{self, PhaseTrace, Provenance};
use crate::trace::{check_series, same_rate, Sampled};

/// Relative tolerance under which `tau·fs` counts as a whole number of samples.
const INTEGER_DELAY_TOL: f64 = 1e-9;

/// `Δφ(t) = φ(t+τ) − φ(t)`.
///
/// Whole-sample delays are exact; fractional delays use a 64-tap
/// Kaiser-windowed sinc interpolator. The result is `ceil(τ·fs)` samples
/// shorter than the input.
pub fn delay_difference(phase: &PhaseTrace, tau: f64) -> Result<PhaseTrace> {
    if !(tau.is_finite() && tau >= 0.0) {
        return arg(format!("delay must be >= 0, got {tau}"));
    }
    let x = phase.samples();
    let n = x.len();
    let delay = tau * phase.fs();
    let rounded = delay.round();
    let delay = if (delay - rounded).abs() <= INTEGER_DELAY_TOL * rounded.max(1.0) {
        rounded
    } else {
        delay
    };
    let shift = delay.ceil();
    if tau >= phase.duration() || shift >= n as f64 {
        return arg(format!(
            "delay {tau} s leaves no samples of a {} s trace",
            phase.duration()
        ));
    }
    let shift = shift as usize;
    let whole = delay.floor() as usize;
    let out_len = n - shift;
    let mut out = vec![0.0; out_len];
    if whole == shift {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = x[i + whole] - x[i]);
    } else {
        let interp = FractionalDelay::new(delay - whole as f64);
        out.par_chunks_mut(1 << 16)
            .enumerate()
            .for_each(|(c, chunk)| {
                let start = c << 16;
                for (k, o) in chunk.iter_mut().enumerate() {
                    let i = start + k;
                    *o = interp.at(x, i + whole) - x[i];
                }
            });
    }
    Ok(PhaseTrace::from_parts(
        out,
        phase.fs(),
        phase.t0(),
        Provenance::derived_from(phase.provenance().seed),
    ))
}

/// Optical power at the monitored output port [W].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    samples: Vec<f64>,
    fs: f64,
    t0: f64,
}

impl PowerTrace {
    pub fn new(samples: Vec<f64>, fs: f64, t0: f64) -> Result<Self> {
        check_series(&samples, fs, "power trace")?;
        Ok(Self { samples, fs, t0 })
    }
}

impl Sampled for PowerTrace {
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

/// Detector output [V].
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    samples: Vec<f64>,
    fs: f64,
    t0: f64,
}

impl VoltageTrace {
    pub fn new(samples: Vec<f64>, fs: f64, t0: f64) -> Result<Self> {
        check_series(&samples, fs, "voltage trace")?;
        Ok(Self { samples, fs, t0 })
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

impl Sampled for VoltageTrace {
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

/// Fringe sum and difference `(S, D)` in the units of the trace they describe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fringe {
    pub s: f64,
    pub d: f64,
}

impl Fringe {
    pub fn visibility(&self) -> f64 {
        self.d / self.s
    }

    pub fn p_max(&self) -> f64 {
        0.5 * (self.s + self.d)
    }

    pub fn p_min(&self) -> f64 {
        0.5 * (self.s - self.d)
    }

    /// Fringe as seen through a linear detector `V = r·P + offset`.
    pub fn through_detector(&self, responsivity: f64, offset: f64) -> Fringe {
        Fringe {
            s: responsivity * self.s + 2.0 * offset,
            d: responsivity * self.d,
        }
    }
}

/// Interferometer description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmziConfig {
    /// Arm delay difference [s].
    pub tau: f64,
    /// [dB]
    pub insertion_loss_arm1: f64,
    /// [dB]
    pub insertion_loss_arm2: f64,
    pub visibility_cap: f64,
    /// [W]
    pub input_power: f64,
}

impl AmziConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return arg(format!("tau must be >= 0, got {}", self.tau));
        }
        for (name, l) in [
            ("insertion_loss_arm1", self.insertion_loss_arm1),
            ("insertion_loss_arm2", self.insertion_loss_arm2),
        ] {
            if !(l.is_finite() && l >= 0.0) {
                return arg(format!("{name} must be >= 0 dB, got {l}"));
            }
        }
        if !(self.visibility_cap > 0.0 && self.visibility_cap <= 1.0) {
            return arg(format!(
                "visibility_cap must lie in (0, 1], got {}",
                self.visibility_cap
            ));
        }
        if !(self.input_power.is_finite() && self.input_power > 0.0) {
            return arg(format!("input_power must be > 0, got {}", self.input_power));
        }
        Ok(())
    }

    /// Powers reaching the output coupler from each arm after an ideal 50:50 split [W].
    pub fn arm_powers(&self) -> (f64, f64) {
        let half = 0.5 * self.input_power;
        (
            half * 10f64.powf(-self.insertion_loss_arm1 / 10.0),
            half * 10f64.powf(-self.insertion_loss_arm2 / 10.0),
        )
    }

    /// Fringe sum and (visibility-capped) difference [W].
    pub fn fringe(&self) -> Fringe {
        let (p1, p2) = self.arm_powers();
        Fringe {
            s: p1 + p2,
            d: 2.0 * (p1 * p2).sqrt() * self.visibility_cap,
        }
    }
}

/// `P(t) = ½{S + D·cos Δφ(t)}` per sample.
pub fn interference_power(dphi: &PhaseTrace, cfg: &AmziConfig) -> Result<PowerTrace> {
    cfg.validate()?;
    let Fringe { s, d } = cfg.fringe();
    let samples = dphi
        .samples()
        .par_iter()
        .map(|&p| 0.5 * (s + d * p.cos()))
        .collect();
    Ok(PowerTrace {
        samples,
        fs: dphi.fs(),
        t0: dphi.t0(),
    })
}

/// Fast classical photodetector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// [V/W]
    pub responsivity: f64,
    /// [V]
    pub dc_offset: f64,
    /// [V/s]
    pub offset_drift_rate: f64,
    /// [V]
    pub additive_noise_rms: f64,
    /// [Hz]
    pub fs: f64,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity.is_finite() && self.responsivity > 0.0) {
            return arg(format!("responsivity must be > 0, got {}", self.responsivity));
        }
        if !(self.additive_noise_rms.is_finite() && self.additive_noise_rms >= 0.0) {
            return arg(format!(
                "additive_noise_rms must be >= 0, got {}",
                self.additive_noise_rms
            ));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return arg(format!("detector fs must be > 0, got {}", self.fs));
        }
        if !(self.dc_offset.is_finite() && self.offset_drift_rate.is_finite()) {
            return arg("detector offset terms must be finite");
        }
        Ok(())
    }
}

/// `V(t) = r·P(t) + offset + drift·t + n(t)`, `n ~ N(0, rms²)` i.i.d.
pub fn detect_classical(power: &PowerTrace, det: &DetectorConfig, seed: u64) -> Result<VoltageTrace> {
    det.validate()?;
    if !same_rate(power.fs, det.fs) {
        return arg(format!(
            "power trace sampled at {} Hz but detector runs at {} Hz",
            power.fs, det.fs
        ));
    }
    let mut samples: Vec<f64> = power
        .samples
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            det.responsivity * p + det.dc_offset + det.offset_drift_rate * power.time(i)
        })
        .collect();
    if det.additive_noise_rms > 0.0 {
        let noise = Normal::new(0.0, det.additive_noise_rms)
            .map_err(|e| Error::Argument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        samples.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(VoltageTrace {
        samples,
        fs: power.fs,
        t0: power.t0,
    })
}

/// Default cap on samples per synthesised trace (512 MiB of `f64`).
pub const DEFAULT_MAX_SAMPLES: usize = 1 << 26;
/// Segment length used for long-trace synthesis.
pub const SYNTH_CHUNK: usize = 1 << 22;

/// One interferometer of a parallel-AMZI scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub name: String,
    pub fibre: PsdModel,
    pub amzi: AmziConfig,
    /// Static phase bias added to `Δφ` [rad]; `π/2` puts the fringe at quadrature.
    pub operating_phase: f64,
    /// Selects the fibre and detector sub-streams; channels with equal
    /// streams and configs produce identical traces.
    pub seed_stream: u64,
}

/// Parallel AMZIs fed by one laser.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelScenario {
    pub laser: PsdModel,
    pub channels: Vec<ChannelSpec>,
    pub detector: DetectorConfig,
    /// [s]
    pub duration: f64,
    /// [Hz]
    pub fs: f64,
    pub seed: u64,
    pub max_samples: usize,
    /// Keep the true `Δφ` (including the operating phase) alongside the voltage.
    pub keep_phase: bool,
}

/// Output of one channel.
#[derive(Debug, Clone)]
pub struct ChannelRun {
    pub voltage: VoltageTrace,
    /// Detector-referred fringe `(S, D)` [V].
    pub fringe: Fringe,
    pub dphi: Option<PhaseTrace>,
}

impl ParallelScenario {
    pub fn samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0 && self.duration.is_finite() && self.duration > 0.0) {
            return arg("scenario needs positive fs and duration");
        }
        if !same_rate(self.fs, self.detector.fs) {
            return arg(format!(
                "scenario fs {} Hz differs from detector fs {} Hz",
                self.fs, self.detector.fs
            ));
        }
        let n = self.samples();
        if n < 2 {
            return arg("scenario yields fewer than two samples");
        }
        if n > self.max_samples {
            return arg(format!(
                "scenario needs {n} samples per trace, above the budget of {}",
                self.max_samples
            ));
        }
        if self.channels.is_empty() {
            return arg("scenario has no channels");
        }
        for c in &self.channels {
            c.amzi.validate()?;
        }
        self.detector.validate()
    }
}

fn synth_len(model: &PsdModel, fs: f64, n: usize, seed: u64) -> Result<PhaseTrace> {
    let chunk = n.next_power_of_two().min(SYNTH_CHUNK);
    synth::synth_colored_chunked(model, fs, n, chunk, seed)
}

/// Simulates every channel: shared laser phase plus per-channel fibre phase,
/// delay difference, fringe, detector.
pub fn run_parallel_amzis(scenario: &ParallelScenario) -> Result<BTreeMap<String, ChannelRun>> {
    scenario.validate()?;
    let n = scenario.samples();
    let fs = scenario.fs;
    let laser = synth_len(&scenario.laser, fs, n, seed::derive(scenario.seed, seed::stream::LASER))?;
    let fibre_base = seed::derive(scenario.seed, seed::stream::FIBRE);
    let detector_base = seed::derive(scenario.seed, seed::stream::DETECTOR);

    let runs: Vec<(String, ChannelRun)> = scenario
        .channels
        .par_iter()
        .map(|ch| -> Result<(String, ChannelRun)> {
            let mut phase = synth_len(&ch.fibre, fs, n, seed::derive(fibre_base, ch.seed_stream))?;
            synth::add_into(&mut phase, &laser)?;
            let mut dphi = delay_difference(&phase, ch.amzi.tau)?;
            drop(phase);
            if ch.operating_phase != 0.0 {
                dphi = dphi.map(|v| v + ch.operating_phase);
            }
            let power = interference_power(&dphi, &ch.amzi)?;
            let voltage = detect_classical(
                &power,
                &scenario.detector,
                seed::derive(detector_base, ch.seed_stream),
            )?;
            let fringe = ch
                .amzi
                .fringe()
                .through_detector(scenario.detector.responsivity, scenario.detector.dc_offset);
            Ok((
                ch.name.clone(),
                ChannelRun {
                    voltage,
                    fringe,
                    dphi: scenario.keep_phase.then_some(dphi),
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().collect())
}
