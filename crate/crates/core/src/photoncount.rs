//! Single-photon-level interference of a weak-coherent pulse train.
//!
//! Per pulse the monitored port of the interferometer carries a Poissonian
//! mean photon number `µ_eff·(1 + V·cos Δφ)/2` with `µ_eff = µ·η`. Light that
//! leaks through the intensity modulator between pulses is an incoherent
//! background `p_leak = µ_eff·10^(−ER/10)` added to that mean. A threshold
//! detector then clicks with
//!
//! ```text
//! p = 1 − exp(−µ_eff·(1 + V·cos Δφ)/2 − p_leak)
//! p_total = 1 − (1 − p)(1 − dark_rate/rep_rate)
//! ```
//!
//! Detector dead time is ignored, and only one output port is simulated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::synth::{PhaseKey, PhaseTrace, WienerSteps};
use crate::trace::{same_rate, Sampled};

/// Largest `µ·η` accepted by the weak-signal click model.
pub const MAX_MEAN_DETECTED: f64 = 0.5;

/// Pulsed source and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTrainConfig {
    /// [Hz]
    pub rep_rate: f64,
    /// [s]
    pub pulse_width: f64,
    /// Intensity-modulator extinction ratio [dB]; `inf` disables leakage.
    pub extinction_ratio: f64,
    /// Mean photon number per pulse at the interferometer output.
    pub mean_photons: f64,
    pub detector_efficiency: f64,
    /// [counts/s]
    pub dark_rate: f64,
    /// [s]
    pub bin_duration: f64,
}

impl PulseTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate.is_finite() && self.rep_rate > 0.0) {
            return arg(format!("rep_rate must be > 0, got {}", self.rep_rate));
        }
        if !(self.pulse_width > 0.0 && self.rep_rate * self.pulse_width < 1.0) {
            return arg(format!(
                "pulse_width {} s does not fit a {} Hz train",
                self.pulse_width, self.rep_rate
            ));
        }
        if !(self.extinction_ratio >= 0.0) {
            return arg(format!("extinction_ratio must be >= 0 dB, got {}", self.extinction_ratio));
        }
        if !(self.mean_photons.is_finite() && self.mean_photons >= 0.0) {
            return arg(format!("mean_photons must be >= 0, got {}", self.mean_photons));
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return arg(format!(
                "detector_efficiency must lie in [0, 1], got {}",
                self.detector_efficiency
            ));
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0 && self.dark_rate <= self.rep_rate) {
            return arg(format!("dark_rate must lie in [0, rep_rate], got {}", self.dark_rate));
        }
        if !(self.bin_duration.is_finite() && self.bin_duration * self.rep_rate >= 1.0 - 1e-9) {
            return arg(format!(
                "bin_duration {} s holds less than one pulse",
                self.bin_duration
            ));
        }
        Ok(())
    }

    /// `µ·η`.
    pub fn mean_detected(&self) -> f64 {
        self.mean_photons * self.detector_efficiency
    }

    pub fn dark_probability(&self) -> f64 {
        self.dark_rate / self.rep_rate
    }

    pub fn leak_probability(&self) -> f64 {
        self.mean_detected() * 10f64.powf(-self.extinction_ratio / 10.0)
    }

    /// Whole pulses per count bin; errors if the bin is not a whole number of
    /// pulse periods.
    pub fn pulses_per_bin(&self) -> Result<usize> {
        let m = self.bin_duration * self.rep_rate;
        let r = m.round();
        if r < 1.0 || (m - r).abs() > 1e-6 * r {
            return arg(format!(
                "bin_duration {} s is not a whole number of {} Hz pulse periods",
                self.bin_duration, self.rep_rate
            ));
        }
        Ok(r as usize)
    }
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return arg(format!("visibility must lie in [0, 1], got {v}"));
    }
    Ok(())
}

/// Click probability per pulse at phase `dphi`.
pub fn click_probability(dphi: f64, visibility: f64, cfg: &PulseTrainConfig) -> Result<f64> {
    check_visibility(visibility)?;
    let mu = cfg.mean_detected();
    if !(mu <= MAX_MEAN_DETECTED) {
        return arg(format!(
            "µ·η = {mu} exceeds the weak-signal limit {MAX_MEAN_DETECTED}"
        ));
    }
    Ok(click_unchecked(dphi, visibility, mu, cfg.leak_probability(), cfg.dark_probability()))
}

fn click_unchecked(dphi: f64, visibility: f64, mu: f64, leak: f64, dark: f64) -> f64 {
    let signal = -(-(0.5 * mu * (1.0 + visibility * dphi.cos()) + leak)).exp_m1();
    1.0 - (1.0 - signal) * (1.0 - dark)
}

/// Label attached to a count bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinLabel {
    Zero,
    Pi,
    Unmodulated,
}

impl BinLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Pi => "pi",
            Self::Unmodulated => "unmodulated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(Self::Zero),
            "pi" => Some(Self::Pi),
            "unmodulated" => Some(Self::Unmodulated),
            _ => None,
        }
    }

    fn offset(self) -> f64 {
        match self {
            Self::Zero | Self::Unmodulated => 0.0,
            Self::Pi => std::f64::consts::PI,
        }
    }
}

impl From<PhaseKey> for BinLabel {
    fn from(k: PhaseKey) -> Self {
        match k {
            PhaseKey::Zero => Self::Zero,
            PhaseKey::Pi => Self::Pi,
        }
    }
}

/// Phase modulation applied by the sender: one key per count bin, cycling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPattern {
    Unmodulated,
    Keyed(Vec<PhaseKey>),
}

impl KeyPattern {
    fn label(&self, bin: usize) -> BinLabel {
        match self {
            Self::Unmodulated => BinLabel::Unmodulated,
            Self::Keyed(keys) => keys[bin % keys.len()].into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBin {
    pub count: u64,
    pub label: BinLabel,
}

/// Per-bin detector counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagSeries {
    bins: Vec<TimeBin>,
    bin_duration: f64,
    t0: f64,
}

impl TimeTagSeries {
    pub fn new(bins: Vec<TimeBin>, bin_duration: f64, t0: f64) -> Result<Self> {
        if !(bin_duration.is_finite() && bin_duration > 0.0) {
            return arg(format!("bin_duration must be > 0, got {bin_duration}"));
        }
        if !t0.is_finite() {
            return arg("t0 must be finite");
        }
        Ok(Self {
            bins,
            bin_duration,
            t0,
        })
    }

    pub fn bins(&self) -> &[TimeBin] {
        &self.bins
    }

    pub fn bin_duration(&self) -> f64 {
        self.bin_duration
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.bin_duration
    }

    pub fn total_counts(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Counts plus the true (unkeyed) phase, folded into [0, π] pulse by pulse
/// and averaged over each bin.
#[derive(Debug, Clone)]
pub struct CountRun {
    pub series: TimeTagSeries,
    pub mean_folded_phase: Vec<f64>,
}

/// Core of [`simulate_counts`] over any per-pulse phase source. Simulates
/// `bins` whole bins; fails if `phases` runs out first.
pub fn simulate_counts_from<I>(
    phases: I,
    t0: f64,
    visibility: f64,
    cfg: &PulseTrainConfig,
    pattern: &KeyPattern,
    seed: u64,
    bins: usize,
) -> Result<CountRun>
where
    I: IntoIterator<Item = f64>,
{
    cfg.validate()?;
    check_visibility(visibility)?;
    if let KeyPattern::Keyed(k) = pattern {
        if k.is_empty() {
            return arg("key pattern is empty");
        }
    }
    // Validates the weak-signal guard once.
    click_probability(0.0, visibility, cfg)?;
    let per_bin = cfg.pulses_per_bin()?;
    let (mu, leak, dark) = (cfg.mean_detected(), cfg.leak_probability(), cfg.dark_probability());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases = phases.into_iter();
    let mut out = Vec::with_capacity(bins);
    let mut mean_folded_phase = Vec::with_capacity(bins);
    for b in 0..bins {
        let label = pattern.label(b);
        let offset = label.offset();
        let mut count = 0u64;
        let mut phase_sum = 0.0;
        for _ in 0..per_bin {
            let phi = phases
                .next()
                .ok_or_else(|| Error::Argument(format!("phase source ended inside bin {b}")))?;
            phase_sum += fold_phase(phi);
            let p = click_unchecked(phi + offset, visibility, mu, leak, dark);
            if rng.random::<f64>() < p {
                count += 1;
            }
        }
        out.push(TimeBin { count, label });
        mean_folded_phase.push(phase_sum / per_bin as f64);
    }
    Ok(CountRun {
        series: TimeTagSeries::new(out, cfg.bin_duration, t0)?,
        mean_folded_phase,
    })
}

/// Bernoulli click per pulse of `dphi` (sampled at the repetition rate),
/// accumulated into bins of `bin_duration`. Trailing pulses that do not fill
/// a bin are dropped.
pub fn simulate_counts(
    dphi: &PhaseTrace,
    visibility: f64,
    cfg: &PulseTrainConfig,
    pattern: &KeyPattern,
    seed: u64,
) -> Result<TimeTagSeries> {
    cfg.validate()?;
    if !same_rate(dphi.fs(), cfg.rep_rate) {
        return arg(format!(
            "phase trace sampled at {} Hz, pulse train runs at {} Hz",
            dphi.fs(),
            cfg.rep_rate
        ));
    }
    let bins = dphi.len() / cfg.pulses_per_bin()?;
    Ok(simulate_counts_from(
        dphi.samples().iter().copied(),
        dphi.t0(),
        visibility,
        cfg,
        pattern,
        seed,
        bins,
    )?
    .series)
}

/// Drift of the interferometer phase recovered from counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    /// Per-bin phase in [0, π] [rad].
    pub drift_trace: Vec<f64>,
    /// [rad/ms]
    pub rate_trace: Vec<f64>,
    /// Sample standard deviation of `rate_trace` [rad/ms].
    pub rate_std: f64,
    /// `max |rate_trace|` [rad/ms].
    pub rate_max_abs: f64,
}

/// Centred differences in the interior, one-sided at the ends, in rad/ms.
pub fn drift_from_phase(phase: Vec<f64>, bin_duration: f64) -> Result<DriftStats> {
    let n = phase.len();
    if n < 2 {
        return arg("drift statistics need at least two bins");
    }
    let to_ms = 1e-3 / bin_duration;
    let rate_trace: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => (phase[1] - phase[0]) * to_ms,
            i if i == n - 1 => (phase[n - 1] - phase[n - 2]) * to_ms,
            i => 0.5 * (phase[i + 1] - phase[i - 1]) * to_ms,
        })
        .collect();
    let mean = rate_trace.iter().sum::<f64>() / n as f64;
    let var = rate_trace.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let rate_max_abs = rate_trace.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(DriftStats {
        drift_trace: phase,
        rate_trace,
        rate_std: var.sqrt(),
        rate_max_abs,
    })
}

/// Reflects any phase into [0, π] the way the fringe inversion does.
pub fn fold_phase(phi: f64) -> f64 {
    phi.cos().clamp(-1.0, 1.0).acos()
}

/// Fringe inversion of counts: `φ = arccos(clamp((2c − (r_max + r_min))/(r_max − r_min), −1, 1))`.
/// Missing extrema default to the observed maximum and minimum count.
pub fn counts_to_phase(
    series: &TimeTagSeries,
    r_max: Option<f64>,
    r_min: Option<f64>,
) -> Result<DriftStats> {
    let counts = series.bins.iter().map(|b| b.count as f64);
    let observed = r_max.is_none() || r_min.is_none();
    let r_max = r_max.unwrap_or_else(|| counts.clone().fold(f64::NEG_INFINITY, f64::max));
    let r_min = r_min.unwrap_or_else(|| counts.clone().fold(f64::INFINITY, f64::min));
    if observed && !(r_max > r_min) {
        return Err(Error::Undefined(format!(
            "counts show no fringe contrast (max {r_max}, min {r_min})"
        )));
    }
    if !(r_min >= 0.0 && r_max > r_min && r_max.is_finite()) {
        return arg(format!(
            "degenerate count extrema: r_max = {r_max}, r_min = {r_min}"
        ));
    }
    let (s, d) = (r_max + r_min, r_max - r_min);
    let phase = counts
        .map(|c| ((2.0 * c - s) / d).clamp(-1.0, 1.0).acos())
        .collect();
    drift_from_phase(phase, series.bin_duration)
}

/// QBER under the single-port rule: clicks in zero-labelled bins are
/// correct, clicks in pi-labelled bins are errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberResult {
    pub qber: f64,
    pub n_correct: u64,
    pub n_error: u64,
}

impl QberResult {
    /// Binomial standard error of `qber`.
    pub fn std_error(&self) -> f64 {
        let n = (self.n_correct + self.n_error) as f64;
        (self.qber * (1.0 - self.qber) / n).sqrt()
    }
}

pub fn qber(series: &TimeTagSeries) -> Result<QberResult> {
    let (mut has_zero, mut has_pi) = (false, false);
    let (mut n_correct, mut n_error) = (0u64, 0u64);
    for b in &series.bins {
        match b.label {
            BinLabel::Zero => {
                has_zero = true;
                n_correct += b.count;
            }
            BinLabel::Pi => {
                has_pi = true;
                n_error += b.count;
            }
            BinLabel::Unmodulated => {}
        }
    }
    if !(has_zero && has_pi) {
        return arg("QBER needs both zero- and pi-labelled bins");
    }
    let total = n_correct + n_error;
    if total == 0 {
        return Err(Error::Undefined("no clicks in keyed bins".into()));
    }
    Ok(QberResult {
        qber: n_error as f64 / total as f64,
        n_correct,
        n_error,
    })
}

/// Expected QBER at a phase held on the fringe maximum, built up one
/// imperfection at a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberBreakdown {
    /// `(1 − V)/2`, the linear-regime visibility floor.
    pub visibility_floor: f64,
    /// Click model with visibility only.
    pub visibility: f64,
    /// Added by dark counts.
    pub dark_counts: f64,
    /// Added by intensity-modulator leakage.
    pub im_leakage: f64,
    /// All of the above.
    pub expected: f64,
}

pub fn qber_breakdown(visibility: f64, cfg: &PulseTrainConfig) -> Result<QberBreakdown> {
    click_probability(0.0, visibility, cfg)?;
    let mu = cfg.mean_detected();
    let q = |leak: f64, dark: f64| {
        let good = click_unchecked(0.0, visibility, mu, leak, dark);
        let bad = click_unchecked(std::f64::consts::PI, visibility, mu, leak, dark);
        bad / (good + bad)
    };
    let (leak, dark) = (cfg.leak_probability(), cfg.dark_probability());
    let base = q(0.0, 0.0);
    let with_dark = q(0.0, dark);
    let expected = q(leak, dark);
    Ok(QberBreakdown {
        visibility_floor: 0.5 * (1.0 - visibility),
        visibility: base,
        dark_counts: with_dark - base,
        im_leakage: expected - with_dark,
        expected,
    })
}

/// Mean counts per bin at the fringe maximum and minimum. Using these instead
/// of the observed extrema avoids the upward bias of a noisy maximum.
pub fn expected_count_extrema(visibility: f64, cfg: &PulseTrainConfig) -> Result<(f64, f64)> {
    let m = cfg.pulses_per_bin()? as f64;
    Ok((
        m * click_probability(0.0, visibility, cfg)?,
        m * click_probability(std::f64::consts::PI, visibility, cfg)?,
    ))
}

/// Free-running drift acquisition: Wiener phase at the pulse rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftScenario {
    pub pulse: PulseTrainConfig,
    pub visibility: f64,
    /// Wiener diffusion coefficient [rad²/s].
    pub diffusion: f64,
    /// [s]
    pub duration: f64,
}

/// Shipped drift preset: a 1 GHz, 200 ps pulse train through a 60 dB
/// modulator with `µ·η = 0.01` and 50 µs count bins. For bin means of a
/// Wiener process the centred two-bin difference has variance `5·D·Δt/3`;
/// folding into [0, π] cancels part of it near the fringe extrema, so the
/// diffusion was tuned by simulation until the folded, bin-averaged true
/// phase gave a rate standard deviation near 7 rad/ms.
pub fn drift_preset() -> DriftScenario {
    DriftScenario {
        pulse: PulseTrainConfig {
            rep_rate: 1e9,
            pulse_width: 200e-12,
            extinction_ratio: 60.0,
            mean_photons: 0.0125,
            detector_efficiency: 0.8,
            dark_rate: 100.0,
            bin_duration: 50e-6,
        },
        visibility: 0.99,
        diffusion: 9300.0,
        duration: 0.25,
    }
}

/// Result of a drift acquisition.
#[derive(Debug, Clone)]
pub struct DriftRun {
    pub series: TimeTagSeries,
    /// Drift recovered from the counts.
    pub recovered: DriftStats,
    /// Same statistics computed from the folded, bin-averaged true phase.
    pub truth: DriftStats,
}

/// Simulates an unmodulated acquisition and recovers its drift.
pub fn run_drift(scenario: &DriftScenario, seed: u64) -> Result<DriftRun> {
    let cfg = &scenario.pulse;
    cfg.validate()?;
    let bins = (scenario.duration / cfg.bin_duration).round() as usize;
    let phases = WienerSteps::new(
        scenario.diffusion,
        cfg.rep_rate,
        crate::seed::derive(seed, crate::seed::stream::DRIFT),
    )?;
    let run = simulate_counts_from(
        phases,
        0.0,
        scenario.visibility,
        cfg,
        &KeyPattern::Unmodulated,
        crate::seed::derive(seed, crate::seed::stream::CLICKS),
        bins,
    )?;
    let (r_max, r_min) = expected_count_extrema(scenario.visibility, cfg)?;
    if !(r_max > r_min) {
        return Err(Error::Undefined(
            "no fringe contrast in the click model; drift is unobservable".into(),
        ));
    }
    let recovered = counts_to_phase(&run.series, Some(r_max), Some(r_min))?;
    let truth = drift_from_phase(run.mean_folded_phase, cfg.bin_duration)?;
    Ok(DriftRun {
        series: run.series,
        recovered,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn cfg(mu: f64, dark: f64, er: f64) -> PulseTrainConfig {
        PulseTrainConfig {
            rep_rate: 1e9,
            pulse_width: 200e-12,
            extinction_ratio: er,
            mean_photons: mu,
            detector_efficiency: 1.0,
            dark_rate: dark,
            bin_duration: 1e-6,
        }
    }

    #[test]
    fn click_examples() {
        let c = cfg(0.1, 0.0, f64::INFINITY);
        assert_eq!(click_probability(PI, 1.0, &c).unwrap(), 0.0);
        let p = click_probability(0.0, 1.0, &c).unwrap();
        assert!((p - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((p - 0.0952).abs() < 1e-4);
        let dark = cfg(0.0, 1e3, 60.0);
        let p = click_probability(0.3, 1.0, &dark).unwrap();
        assert!((p / 1e-6 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn click_guard() {
        assert!(click_probability(0.0, 1.0, &cfg(0.6, 0.0, 60.0)).is_err());
        assert!(click_probability(0.0, 1.1, &cfg(0.1, 0.0, 60.0)).is_err());
    }

    #[test]
    fn click_monotone_on_half_fringe() {
        let c = cfg(0.3, 1e4, 30.0);
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let p = click_probability(PI * i as f64 / 100.0, 0.9, &c).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn config_validation() {
        let good = cfg(0.1, 0.0, 60.0);
        assert!(good.validate().is_ok());
        assert!(PulseTrainConfig { pulse_width: 1e-9, ..good }.validate().is_err());
        assert!(PulseTrainConfig { bin_duration: 5e-10, ..good }.validate().is_err());
        assert!(PulseTrainConfig { extinction_ratio: -1.0, ..good }.validate().is_err());
        assert!(PulseTrainConfig { bin_duration: 2.5e-9, ..good }.pulses_per_bin().is_err());
        assert_eq!(good.pulses_per_bin().unwrap(), 1000);
    }

    #[test]
    fn zero_mean_photons_gives_no_counts() {
        let c = cfg(0.0, 0.0, 60.0);
        let phase = PhaseTrace::zeros(10_000, 1e9).unwrap();
        let s = simulate_counts(&phase, 1.0, &c, &KeyPattern::Unmodulated, 1).unwrap();
        assert_eq!(s.bins().len(), 10);
        assert_eq!(s.total_counts(), 0);
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let phase = PhaseTrace::zeros(10_000, 2e9).unwrap();
        assert!(simulate_counts(&phase, 1.0, &cfg(0.1, 0.0, 60.0), &KeyPattern::Unmodulated, 1).is_err());
    }

    #[test]
    fn static_phase_mean_counts() {
        let c = cfg(0.1, 0.0, f64::INFINITY);
        let phase = PhaseTrace::zeros(1_000_000, 1e9).unwrap();
        let s = simulate_counts(&phase, 1.0, &c, &KeyPattern::Unmodulated, 2).unwrap();
        let p = click_probability(0.0, 1.0, &c).unwrap();
        let n = s.bins().len() as f64;
        let mean = s.total_counts() as f64 / n;
        let m = 1000.0;
        // Standard error of the mean of n binomial(m, p) bins.
        let se = (m * p * (1.0 - p) / n).sqrt();
        assert!((mean - m * p).abs() < 3.0 * se, "{mean} vs {}", m * p);
    }

    #[test]
    fn pi_bins_are_dark_only() {
        let c = cfg(0.1, 0.0, f64::INFINITY);
        let phase = PhaseTrace::zeros(100_000, 1e9).unwrap();
        let pat = KeyPattern::Keyed(vec![PhaseKey::Zero, PhaseKey::Pi]);
        let s = simulate_counts(&phase, 1.0, &c, &pat, 3).unwrap();
        for b in s.bins() {
            match b.label {
                BinLabel::Pi => assert_eq!(b.count, 0),
                BinLabel::Zero => assert!(b.count > 0),
                BinLabel::Unmodulated => unreachable!(),
            }
        }
        let q = qber(&s).unwrap();
        assert_eq!(q.qber, 0.0);
        assert_eq!(q.n_error, 0);
    }

    #[test]
    fn counts_inversion_fixed_points() {
        let bins = [10u64, 0, 5, 5]
            .iter()
            .map(|&count| TimeBin {
                count,
                label: BinLabel::Unmodulated,
            })
            .collect();
        let s = TimeTagSeries::new(bins, 1e-3, 0.0).unwrap();
        let d = counts_to_phase(&s, None, None).unwrap();
        assert!(d.drift_trace[0].abs() < 1e-12);
        assert!((d.drift_trace[1] - PI).abs() < 1e-12);
        assert!((d.drift_trace[2] - PI / 2.0).abs() < 1e-12);
        // One-sided at the ends, centred inside; 1 ms bins.
        assert!((d.rate_trace[0] - PI).abs() < 1e-12);
        assert!((d.rate_trace[1] - PI / 4.0).abs() < 1e-12);
        assert!((d.rate_trace[3] - 0.0).abs() < 1e-12);
        let max = d.rate_trace.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert_eq!(d.rate_max_abs, max);
    }

    #[test]
    fn constant_midpoint_counts() {
        let bins = vec![
            TimeBin {
                count: 7,
                label: BinLabel::Unmodulated
            };
            50
        ];
        let s = TimeTagSeries::new(bins, 1e-4, 0.0).unwrap();
        let d = counts_to_phase(&s, Some(10.0), Some(4.0)).unwrap();
        assert!(d.drift_trace.iter().all(|p| (p - PI / 2.0).abs() < 1e-12));
        assert_eq!(d.rate_std, 0.0);
        assert!(matches!(counts_to_phase(&s, None, None), Err(Error::Undefined(_))));
        assert!(counts_to_phase(&s, Some(3.0), Some(4.0)).is_err());
    }

    #[test]
    fn qber_errors() {
        let keyed = |count: u64| {
            TimeTagSeries::new(
                vec![
                    TimeBin { count, label: BinLabel::Zero },
                    TimeBin { count, label: BinLabel::Pi },
                ],
                1.0,
                0.0,
            )
            .unwrap()
        };
        assert!(matches!(qber(&keyed(0)), Err(Error::Undefined(_))));
        assert_eq!(qber(&keyed(3)).unwrap().qber, 0.5);
        let unkeyed = TimeTagSeries::new(
            vec![TimeBin { count: 3, label: BinLabel::Unmodulated }],
            1.0,
            0.0,
        )
        .unwrap();
        assert!(qber(&unkeyed).is_err());
    }

    #[test]
    fn breakdown_matches_floor() {
        let b = qber_breakdown(0.965, &cfg(0.01, 0.0, f64::INFINITY)).unwrap();
        assert!((b.visibility_floor - 0.0175).abs() < 1e-15);
        assert!((b.expected - 0.0175).abs() < 1e-4);
        assert_eq!(b.dark_counts, 0.0);
        assert_eq!(b.im_leakage, 0.0);
        let noisy = qber_breakdown(0.965, &cfg(0.01, 1e4, 30.0)).unwrap();
        assert!(noisy.dark_counts > 0.0 && noisy.im_leakage > 0.0);
    }

    #[test]
    fn fold_reflects() {
        assert!((fold_phase(0.5) - 0.5).abs() < 1e-12);
        assert!((fold_phase(-0.5) - 0.5).abs() < 1e-12);
        assert!((fold_phase(PI + 0.5) - (PI - 0.5)).abs() < 1e-12);
        assert!((fold_phase(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }
}
