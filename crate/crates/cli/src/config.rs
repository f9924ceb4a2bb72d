//! Scenario configuration files (TOML).
//!
//! ```toml
//! seed = 20240611              # required unless --seed is given
//! output_dir = "out/full"     # optional
//!
//! [laser]                      # a PSD model block, see below
//! preset = "laser"
//! linewidth = 1000.0
//!
//! [[channel]]
//! name = "smf"
//! tau = 9.9e-6
//! input_power = 1e-3
//! insertion_loss_arm1 = 0.5    # dB, default 0
//! insertion_loss_arm2 = 0.5    # dB, default 0
//! visibility_cap = 0.995       # default 1
//! operating_phase = 1.5707963  # rad, default π/2
//! seed_stream = 0              # default: channel index
//! fibre = { preset = "smf_like" }
//!
//! [detector]
//! responsivity = 500.0         # V/W
//! dc_offset = 0.0              # V
//! offset_drift_rate = 0.0      # V/s
//! additive_noise_rms = 0.0     # V
//!
//! [[sampling]]
//! fs = 200e3
//! duration = 20.0
//! welch_window = 1000000       # default analysis.welch_window
//!
//! [analysis]
//! welch_window = 1000000
//! overlap = 0.5
//! null_guard = 0.05
//! smooth_window = 512
//! extrema_window = 131072
//! stitch_boundaries = [1e3, 1e6]   # one fewer than sampling sets
//! fringe_reference = "estimate"    # or "model"
//! report_band = [1.0, 2e6]         # optional trim of stitched outputs
//! max_samples = 67108864
//!
//! [output]
//! traces = "binary"            # or "none"
//! csv_excerpt = 10000          # samples per voltage CSV excerpt
//!
//! [tfqkd]
//! visibility = 0.965
//! diffusion = 9300.0           # rad²/s, drift acquisition
//! drift_duration = 0.25        # s
//! key_diffusion = 0.0          # rad²/s, keyed acquisition; default `diffusion`
//! key_duration = 0.01          # s
//! key_phase = 0.0              # rad, static phase during keyed acquisition
//! pattern = ["zero", "pi"]     # one key per count bin, cycling
//! [tfqkd.pulse]
//! rep_rate = 1e9
//! pulse_width = 200e-12
//! extinction_ratio = 60.0      # dB; `inf` disables leakage
//! mean_photons = 0.0125
//! detector_efficiency = 0.8
//! dark_rate = 100.0
//! bin_duration = 50e-6
//! ```
//!
//! A PSD model block is either a preset (`laser` with `linewidth`,
//! `smf_like`, `hcf_like`), a list of `[[...component]]` tables, or both, in
//! which case the components are added to the preset. Components are
//!
//! ```toml
//! [[laser.component]]
//! kind = "power_law"           # amplitude_at_ref · (f/ref_freq)^exponent
//! amplitude_at_ref = 1e-6
//! ref_freq = 100.0
//! exponent = -1.5
//! [[laser.component]]
//! kind = "lorentzian_tone"
//! center = 3.0
//! fwhm = 1.0
//! integrated_power = 1.0
//! [[laser.component]]
//! kind = "white_floor"
//! level = 1e-12
//! ```
//!
//! with optional `f_min`/`f_max` [Hz] bounding the model.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use interferospec::interferometer::{AmziConfig, ChannelSpec, DetectorConfig, DEFAULT_MAX_SAMPLES};
use interferospec::noisemodel::{
    preset_fibre, preset_laser, FibreKind, PsdComponent, PsdModel, PRESET_F_MAX, PRESET_F_MIN,
};
use interferospec::photoncount::PulseTrainConfig;
use interferospec::spectral::{
    DEFAULT_EXTREMA_WINDOW, DEFAULT_NULL_GUARD, DEFAULT_OVERLAP, DEFAULT_SMOOTH_WINDOW,
    DEFAULT_WINDOW_LEN,
};
use interferospec::synth::PhaseKey;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub laser: Option<ModelSpec>,
    #[serde(default, rename = "channel")]
    pub channels: Vec<ChannelConfig>,
    pub detector: Option<DetectorSection>,
    #[serde(default)]
    pub sampling: Vec<SamplingSet>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub tfqkd: Option<TfqkdConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Laser,
    SmfLike,
    HcfLike,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: Option<Preset>,
    pub linewidth: Option<f64>,
    #[serde(default)]
    pub component: Vec<PsdComponent>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
}

impl ModelSpec {
    pub fn resolve(&self, key: &str) -> CliResult<PsdModel> {
        let bad = |msg: String| CliError::input(format!("{key}: {msg}"));
        let mut components = match (self.preset, self.linewidth) {
            (Some(Preset::Laser), Some(lw)) => preset_laser(lw)
                .map_err(|e| bad(e.to_string()))?
                .components()
                .to_vec(),
            (Some(Preset::Laser), None) => return Err(bad("preset `laser` needs `linewidth`".into())),
            (Some(_), Some(_)) => return Err(bad("`linewidth` only applies to preset `laser`".into())),
            (Some(Preset::SmfLike), None) => preset_fibre(FibreKind::SmfLike).components().to_vec(),
            (Some(Preset::HcfLike), None) => preset_fibre(FibreKind::HcfLike).components().to_vec(),
            (None, Some(_)) => return Err(bad("`linewidth` needs `preset = \"laser\"`".into())),
            (None, None) => Vec::new(),
        };
        components.extend_from_slice(&self.component);
        if components.is_empty() {
            return Err(bad("model needs a preset or at least one component".into()));
        }
        PsdModel::new(
            components,
            self.f_min.unwrap_or(PRESET_F_MIN),
            self.f_max.unwrap_or(PRESET_F_MAX),
        )
        .map_err(|e| bad(e.to_string()))
    }
}

fn default_operating_phase() -> f64 {
    FRAC_PI_2
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub name: String,
    pub fibre: ModelSpec,
    pub tau: f64,
    pub input_power: f64,
    #[serde(default)]
    pub insertion_loss_arm1: f64,
    #[serde(default)]
    pub insertion_loss_arm2: f64,
    #[serde(default = "one")]
    pub visibility_cap: f64,
    #[serde(default = "default_operating_phase")]
    pub operating_phase: f64,
    pub seed_stream: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub responsivity: f64,
    #[serde(default)]
    pub dc_offset: f64,
    #[serde(default)]
    pub offset_drift_rate: f64,
    #[serde(default)]
    pub additive_noise_rms: f64,
}

impl DetectorSection {
    pub fn at(&self, fs: f64) -> DetectorConfig {
        DetectorConfig {
            responsivity: self.responsivity,
            dc_offset: self.dc_offset,
            offset_drift_rate: self.offset_drift_rate,
            additive_noise_rms: self.additive_noise_rms,
            fs,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSet {
    pub fs: f64,
    pub duration: f64,
    pub welch_window: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FringeReference {
    /// Moving-extrema visibility estimate from the voltage record.
    Estimate,
    /// The configured interferometer and detector.
    Model,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub welch_window: usize,
    pub overlap: f64,
    pub null_guard: f64,
    pub smooth_window: usize,
    pub extrema_window: usize,
    pub stitch_boundaries: Vec<f64>,
    pub fringe_reference: FringeReference,
    pub report_band: Option<[f64; 2]>,
    pub max_samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            welch_window: DEFAULT_WINDOW_LEN,
            overlap: DEFAULT_OVERLAP,
            null_guard: DEFAULT_NULL_GUARD,
            smooth_window: DEFAULT_SMOOTH_WINDOW,
            extrema_window: DEFAULT_EXTREMA_WINDOW,
            stitch_boundaries: Vec::new(),
            fringe_reference: FringeReference::Estimate,
            report_band: None,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutput {
    Binary,
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub traces: TraceOutput,
    pub csv_excerpt: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            traces: TraceOutput::Binary,
            csv_excerpt: 10_000,
        }
    }
}

fn default_pattern() -> Vec<PhaseKey> {
    vec![PhaseKey::Zero, PhaseKey::Pi]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfqkdConfig {
    pub pulse: PulseTrainConfig,
    pub visibility: f64,
    pub diffusion: f64,
    pub drift_duration: f64,
    pub key_diffusion: Option<f64>,
    pub key_duration: f64,
    #[serde(default)]
    pub key_phase: f64,
    #[serde(default = "default_pattern")]
    pub pattern: Vec<PhaseKey>,
}

/// Parses a config file; TOML errors carry line and column.
pub fn parse(text: &str, path: &str) -> CliResult<ScenarioConfig> {
    toml::from_str(text).map_err(|e| CliError::input(format!("{path}: {e}")))
}

impl ScenarioConfig {
    /// Seed from the command line if given, else from the file.
    pub fn effective_seed(&self, cli_seed: Option<u64>) -> CliResult<u64> {
        cli_seed
            .or(self.seed)
            .ok_or_else(|| CliError::input("missing required key `seed` (or pass --seed)"))
    }

    /// Validated AMZI experiment.
    pub fn amzi(&self) -> CliResult<AmziPlan> {
        let laser = self
            .laser
            .as_ref()
            .ok_or_else(|| CliError::input("missing [laser] section"))?
            .resolve("laser")?;
        if self.channels.is_empty() {
            return Err(CliError::input("no [[channel]] sections"));
        }
        let mut names = BTreeSet::new();
        let mut channels = Vec::with_capacity(self.channels.len());
        for (i, c) in self.channels.iter().enumerate() {
            let key = format!("channel[{i}]");
            let name_ok = !c.name.is_empty()
                && c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
            if !name_ok {
                return Err(CliError::input(format!(
                    "{key}.name `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                    c.name
                )));
            }
            if !names.insert(c.name.clone()) {
                return Err(CliError::input(format!("{key}.name `{}` is not unique", c.name)));
            }
            let amzi = AmziConfig {
                tau: c.tau,
                insertion_loss_arm1: c.insertion_loss_arm1,
                insertion_loss_arm2: c.insertion_loss_arm2,
                visibility_cap: c.visibility_cap,
                input_power: c.input_power,
            };
            amzi.validate().map_err(|e| CliError::input(format!("{key}: {e}")))?;
            if !c.operating_phase.is_finite() {
                return Err(CliError::input(format!("{key}.operating_phase must be finite")));
            }
            channels.push(ChannelSpec {
                name: c.name.clone(),
                fibre: c.fibre.resolve(&format!("{key}.fibre"))?,
                amzi,
                operating_phase: c.operating_phase,
                seed_stream: c.seed_stream.unwrap_or(i as u64),
            });
        }
        let detector = self
            .detector
            .ok_or_else(|| CliError::input("missing [detector] section"))?;
        if self.sampling.is_empty() {
            return Err(CliError::input("no [[sampling]] sets"));
        }
        let a = &self.analysis;
        let mut sets: Vec<(usize, SamplingSet)> = self.sampling.iter().copied().enumerate().collect();
        for (i, s) in &sets {
            let key = format!("sampling[{i}]");
            if !(s.fs.is_finite() && s.fs > 0.0 && s.duration.is_finite() && s.duration > 0.0) {
                return Err(CliError::input(format!("{key}: fs and duration must be > 0")));
            }
            detector
                .at(s.fs)
                .validate()
                .map_err(|e| CliError::input(format!("detector: {e}")))?;
            let n = (s.fs * s.duration).round() as usize;
            if n > a.max_samples {
                return Err(CliError::input(format!(
                    "{key}: {n} samples exceed analysis.max_samples = {}",
                    a.max_samples
                )));
            }
            let w = s.welch_window.unwrap_or(a.welch_window);
            if w < 2 || w > n {
                return Err(CliError::input(format!(
                    "{key}: welch window {w} must lie in [2, {n}] samples"
                )));
            }
            if a.fringe_reference == FringeReference::Estimate && a.extrema_window > n {
                return Err(CliError::input(format!(
                    "{key}: analysis.extrema_window {} exceeds the {n}-sample record",
                    a.extrema_window
                )));
            }
        }
        sets.sort_by(|x, y| x.1.fs.total_cmp(&y.1.fs));
        if sets.windows(2).any(|w| w[0].1.fs == w[1].1.fs) {
            return Err(CliError::input("sampling sets must have distinct fs"));
        }
        if a.stitch_boundaries.len() + 1 != sets.len() {
            return Err(CliError::input(format!(
                "analysis.stitch_boundaries needs {} entries for {} sampling sets",
                sets.len() - 1,
                sets.len()
            )));
        }
        if !(0.0..1.0).contains(&a.overlap) {
            return Err(CliError::input("analysis.overlap must lie in [0, 1)"));
        }
        if !(a.null_guard >= 0.0 && a.null_guard < 1.0) {
            return Err(CliError::input("analysis.null_guard must lie in [0, 1)"));
        }
        if a.smooth_window == 0 || a.extrema_window <= a.smooth_window {
            return Err(CliError::input(
                "analysis.extrema_window must exceed analysis.smooth_window >= 1",
            ));
        }
        if let Some([lo, hi]) = a.report_band {
            if !(lo < hi) {
                return Err(CliError::input("analysis.report_band must be [low, high] with low < high"));
            }
        }
        Ok(AmziPlan {
            laser,
            channels,
            detector,
            sets,
        })
    }

    pub fn tfqkd(&self) -> CliResult<&TfqkdConfig> {
        let t = self
            .tfqkd
            .as_ref()
            .ok_or_else(|| CliError::input("missing [tfqkd] section"))?;
        t.pulse
            .validate()
            .map_err(|e| CliError::input(format!("tfqkd.pulse: {e}")))?;
        t.pulse
            .pulses_per_bin()
            .map_err(|e| CliError::input(format!("tfqkd.pulse: {e}")))?;
        if !(0.0..=1.0).contains(&t.visibility) {
            return Err(CliError::input("tfqkd.visibility must lie in [0, 1]"));
        }
        let diffusions = [t.diffusion, t.key_diffusion.unwrap_or(t.diffusion)];
        if diffusions.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(CliError::input("tfqkd diffusion values must be >= 0"));
        }
        for (key, d) in [("drift_duration", t.drift_duration), ("key_duration", t.key_duration)] {
            if !(d.is_finite() && d >= 2.0 * t.pulse.bin_duration) {
                return Err(CliError::input(format!(
                    "tfqkd.{key} must cover at least two count bins"
                )));
            }
        }
        if t.pattern.is_empty() {
            return Err(CliError::input("tfqkd.pattern must not be empty"));
        }
        if !t.key_phase.is_finite() {
            return Err(CliError::input("tfqkd.key_phase must be finite"));
        }
        Ok(t)
    }
}

/// Resolved AMZI experiment; sampling sets sorted by increasing fs, each with
/// its index in the file.
#[derive(Debug, Clone)]
pub struct AmziPlan {
    pub laser: PsdModel,
    pub channels: Vec<ChannelSpec>,
    pub detector: DetectorSection,
    pub sets: Vec<(usize, SamplingSet)>,
}
