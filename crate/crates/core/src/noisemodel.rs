//! Analytic one-sided phase-noise PSD models.
//!
//! A [`PsdModel`] is an ordered sum of [`PsdComponent`]s evaluated in rad²/Hz
//! over a closed frequency band. Evaluation outside the band is an error:
//! `f^-2` terms diverge toward DC and silently extrapolating them is never
//! what a caller wants.
//!
//! The presets reproduce the qualitative features of measured fibre and laser
//! noise (peak positions, region boundaries). Their amplitudes are stand-in
//! values, not calibrated fits; each is documented next to its constant.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Largest accepted `|exponent|` for a power-law component.
pub const MAX_EXPONENT: f64 = 6.0;

/// Lower band edge used by the presets [Hz]. Low enough for 20 s records.
pub const PRESET_F_MIN: f64 = 1e-3;
/// Upper band edge used by the presets [Hz]. Covers a 500 MS/s Nyquist band.
pub const PRESET_F_MAX: f64 = 1e9;

/// Laser preset: centre of the tonal feature [Hz].
pub const LASER_TONE_CENTER: f64 = 30e3;
/// Laser preset: FWHM of the tonal feature [Hz].
pub const LASER_TONE_FWHM: f64 = 100.0;
/// Laser preset: integrated power of the tonal feature [rad²]. Stand-in value;
/// puts the tone roughly 10 dB above a 1 kHz-linewidth floor for a
/// 76 Hz-resolution estimate.
pub const LASER_TONE_POWER: f64 = 7e-4;

/// One additive term of a phase PSD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsdComponent {
    /// `amplitude_at_ref · (f / ref_freq)^exponent`.
    PowerLaw {
        amplitude_at_ref: f64,
        ref_freq: f64,
        exponent: f64,
    },
    /// Lorentzian line normalised by its integrated power.
    LorentzianTone {
        center: f64,
        fwhm: f64,
        integrated_power: f64,
    },
    /// Frequency-independent level.
    WhiteFloor { level: f64 },
}

impl PsdComponent {
    pub fn power_law(amplitude_at_ref: f64, ref_freq: f64, exponent: f64) -> Result<Self> {
        let c = Self::PowerLaw {
            amplitude_at_ref,
            ref_freq,
            exponent,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn lorentzian(center: f64, fwhm: f64, integrated_power: f64) -> Result<Self> {
        let c = Self::LorentzianTone {
            center,
            fwhm,
            integrated_power,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn white(level: f64) -> Result<Self> {
        let c = Self::WhiteFloor { level };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                arg(format!("{name} must be finite and >= 0, got {v}"))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                arg(format!("{name} must be finite and > 0, got {v}"))
            }
        };
        match *self {
            Self::PowerLaw {
                amplitude_at_ref,
                ref_freq,
                exponent,
            } => {
                nonneg("amplitude_at_ref", amplitude_at_ref)?;
                positive("ref_freq", ref_freq)?;
                if !exponent.is_finite() || exponent.abs() > MAX_EXPONENT {
                    return arg(format!(
                        "power-law exponent must be finite with |exponent| <= {MAX_EXPONENT}, got {exponent}"
                    ));
                }
                Ok(())
            }
            Self::LorentzianTone {
                center,
                fwhm,
                integrated_power,
            } => {
                positive("center", center)?;
                positive("fwhm", fwhm)?;
                nonneg("integrated_power", integrated_power)
            }
            Self::WhiteFloor { level } => nonneg("level", level),
        }
    }

    /// Point value at `f` [rad²/Hz]. No range check.
    pub fn eval(&self, f: f64) -> f64 {
        match *self {
            Self::PowerLaw {
                amplitude_at_ref,
                ref_freq,
                exponent,
            } => amplitude_at_ref * (f / ref_freq).powf(exponent),
            Self::LorentzianTone {
                center,
                fwhm,
                integrated_power,
            } => {
                let half = 0.5 * fwhm;
                let df = f - center;
                integrated_power * (fwhm / (2.0 * PI)) / (df * df + half * half)
            }
            Self::WhiteFloor { level } => level,
        }
    }

    /// Mean value over the band `[f - width/2, f + width/2]`.
    ///
    /// Lorentzian tones are integrated exactly, so a tone narrower than the
    /// band still contributes its full power. Other kinds are point-sampled
    /// at `f`.
    pub fn bin_mean(&self, f: f64, width: f64) -> f64 {
        match *self {
            Self::LorentzianTone {
                center,
                fwhm,
                integrated_power,
            } if width > 0.0 => {
                let half = 0.5 * fwhm;
                let lo = (f - 0.5 * width - center) / half;
                let hi = (f + 0.5 * width - center) / half;
                integrated_power * (hi.atan() - lo.atan()) / (PI * width)
            }
            _ => self.eval(f),
        }
    }
}

/// Sum of PSD components valid on `[f_min, f_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdModel {
    #[serde(rename = "component", default)]
    components: Vec<PsdComponent>,
    f_min: f64,
    f_max: f64,
}

impl PsdModel {
    pub fn new(components: Vec<PsdComponent>, f_min: f64, f_max: f64) -> Result<Self> {
        if !(f_min.is_finite() && f_min > 0.0) {
            return arg(format!("f_min must be > 0, got {f_min}"));
        }
        if !(f_max.is_finite() && f_max > f_min) {
            return arg(format!("f_max must exceed f_min, got [{f_min}, {f_max}]"));
        }
        for c in &components {
            c.validate()?;
        }
        let model = Self {
            components,
            f_min,
            f_max,
        };
        // Power laws are monotone and tones are bounded, so the band edges
        // carry the extreme values.
        for f in [f_min, f_max] {
            let v = model.eval_unchecked(f);
            if !v.is_finite() {
                return Err(Error::Model(format!("model is not finite at {f} Hz")));
            }
        }
        Ok(model)
    }

    pub fn components(&self) -> &[PsdComponent] {
        &self.components
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Re-checks every invariant; used after deserialisation.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.components, self.f_min, self.f_max)
    }

    fn check_range(&self, f: f64) -> Result<()> {
        if f.is_nan() || f < self.f_min || f > self.f_max {
            return Err(Error::Range(format!(
                "{f} Hz outside model band [{}, {}] Hz",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }

    fn eval_unchecked(&self, f: f64) -> f64 {
        self.components.iter().map(|c| c.eval(f)).sum()
    }

    /// One-sided phase PSD at `f` [rad²/Hz].
    pub fn eval(&self, f: f64) -> Result<f64> {
        self.check_range(f)?;
        let v = self.eval_unchecked(f);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Model(format!("PSD evaluates to {v} at {f} Hz")));
        }
        Ok(v)
    }

    /// Mean PSD over a frequency bin centred on `f`; see [`PsdComponent::bin_mean`].
    pub fn bin_mean(&self, f: f64, width: f64) -> Result<f64> {
        self.check_range(f)?;
        let v: f64 = self.components.iter().map(|c| c.bin_mean(f, width)).sum();
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Model(format!("PSD bin mean is {v} at {f} Hz")));
        }
        Ok(v)
    }

    /// Frequency-noise form `f² · S_φ(f)` [Hz²/Hz].
    pub fn eval_frequency_psd(&self, f: f64) -> Result<f64> {
        Ok(f * f * self.eval(f)?)
    }
}

/// Lorentzian-lineshape laser: white frequency noise of level
/// `linewidth / π` Hz²/Hz, i.e. `S_φ(f) = linewidth / (π f²)`, plus a
/// phase-modulation tone at 30 kHz ([`LASER_TONE_CENTER`], [`LASER_TONE_FWHM`],
/// [`LASER_TONE_POWER`]).
///
/// The origin of the 30 kHz feature (FM or AM) is not known; it is modelled
/// as phase noise.
pub fn preset_laser(linewidth: f64) -> Result<PsdModel> {
    if !(linewidth.is_finite() && linewidth > 0.0 && linewidth <= 1e6) {
        return arg(format!("linewidth must lie in (0, 1e6] Hz, got {linewidth}"));
    }
    PsdModel::new(
        vec![
            PsdComponent::power_law(linewidth / PI, 1.0, -2.0)?,
            PsdComponent::lorentzian(LASER_TONE_CENTER, LASER_TONE_FWHM, LASER_TONE_POWER)?,
        ],
        PRESET_F_MIN,
        PRESET_F_MAX,
    )
}

/// Fibre preset selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FibreKind {
    SmfLike,
    HcfLike,
}

/// Stand-in amplitudes for one fibre preset.
struct FibreParams {
    thermal_center: f64,
    thermal_fwhm: f64,
    thermal_power: f64,
    acoustic_amplitude: f64,
    floor: f64,
}

const SMF: FibreParams = FibreParams {
    thermal_center: 3.0,
    thermal_fwhm: 1.0,
    thermal_power: 1.0,
    acoustic_amplitude: 1e-6,
    floor: 1e-13,
};

const HCF: FibreParams = FibreParams {
    thermal_center: 1.5,
    thermal_fwhm: 0.5,
    thermal_power: 0.2,
    acoustic_amplitude: 8e-7,
    floor: 1e-13,
};

/// Reference frequency of the acoustic shoulder [Hz].
const ACOUSTIC_REF: f64 = 100.0;
/// Slope of the acoustic shoulder.
const ACOUSTIC_EXPONENT: f64 = -1.5;

/// Fibre phase-noise stand-in: a thermal Lorentzian (3 Hz for SMF, weaker and
/// at 1.5 Hz for HCF), an `f^-1.5` acoustic shoulder referenced at 100 Hz that
/// dominates the 10 Hz to 1 kHz region, and a white floor.
pub fn preset_fibre(kind: FibreKind) -> PsdModel {
    let p = match kind {
        FibreKind::SmfLike => &SMF,
        FibreKind::HcfLike => &HCF,
    };
    PsdModel {
        components: vec![
            PsdComponent::LorentzianTone {
                center: p.thermal_center,
                fwhm: p.thermal_fwhm,
                integrated_power: p.thermal_power,
            },
            PsdComponent::PowerLaw {
                amplitude_at_ref: p.acoustic_amplitude,
                ref_freq: ACOUSTIC_REF,
                exponent: ACOUSTIC_EXPONENT,
            },
            PsdComponent::WhiteFloor { level: p.floor },
        ],
        f_min: PRESET_F_MIN,
        f_max: PRESET_F_MAX,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn white_floor_is_constant() {
        let m = PsdModel::new(vec![PsdComponent::white(1e-9).unwrap()], 1.0, 1e6).unwrap();
        assert_eq!(m.eval(100.0).unwrap(), 1e-9);
    }

    #[test]
    fn power_law_scaling() {
        let m = PsdModel::new(
            vec![PsdComponent::power_law(1e-6, 1.0, -2.0).unwrap()],
            0.1,
            1e3,
        )
        .unwrap();
        assert!(rel(m.eval(10.0).unwrap(), 1e-8) < 1e-12);
    }

    #[test]
    fn lorentzian_peak_value() {
        let (q, w) = (0.3, 2.5);
        let m = PsdModel::new(vec![PsdComponent::lorentzian(50.0, w, q).unwrap()], 1.0, 1e3)
            .unwrap();
        assert!(rel(m.eval(50.0).unwrap(), 2.0 * q / (PI * w)) < 1e-12);
    }

    #[test]
    fn lorentzian_bin_mean_keeps_power() {
        // A tone far narrower than the bin still integrates to its power,
        // minus the tails beyond the bin edges: (2/π)·atan(2 half-widths / bin).
        let c = PsdComponent::lorentzian(1000.0, 0.01, 2.0).unwrap();
        let width: f64 = 50.0;
        let inside = 2.0 * (2.0 / PI) * (width / 0.01_f64).atan();
        assert!(rel(c.bin_mean(1000.0, width) * width, inside) < 1e-12);
        assert!(rel(inside, 2.0) < 3e-4);
    }

    #[test]
    fn out_of_band_is_range_error() {
        let m = preset_fibre(FibreKind::SmfLike);
        assert!(matches!(m.eval(1e-6), Err(Error::Range(_))));
        assert!(matches!(m.eval(2e9), Err(Error::Range(_))));
    }

    #[test]
    fn component_validation() {
        assert!(PsdComponent::white(-1.0).is_err());
        assert!(PsdComponent::power_law(1.0, 1.0, 6.5).is_err());
        assert!(PsdComponent::power_law(1.0, 0.0, -2.0).is_err());
        assert!(PsdComponent::lorentzian(10.0, 0.0, 1.0).is_err());
        assert!(PsdComponent::lorentzian(10.0, 1.0, f64::NAN).is_err());
        assert!(PsdModel::new(vec![], 0.0, 1.0).is_err());
        assert!(PsdModel::new(vec![], 2.0, 1.0).is_err());
    }

    #[test]
    fn laser_preset_values() {
        let m = preset_laser(1e3).unwrap();
        let s = m.eval(1e3).unwrap();
        assert!(rel(s, 1000.0 / (PI * 1e6)) < 1e-6, "{s}");
        let nu = m.eval_frequency_psd(1e3).unwrap();
        assert!(rel(nu, 1000.0 / PI) < 1e-6);
        assert!(preset_laser(0.0).is_err());
        assert!(preset_laser(-5.0).is_err());
        assert!(preset_laser(2e6).is_err());
    }

    #[test]
    fn laser_frequency_psd_is_flat_below_the_tone() {
        let m = preset_laser(1e3).unwrap();
        let reference = m.eval_frequency_psd(1.0).unwrap();
        for f in [1.0, 3.0, 10.0, 47.0, 100.0, 316.0, 1000.0] {
            assert!(rel(m.eval_frequency_psd(f).unwrap(), reference) < 1e-6, "{f}");
        }
    }

    #[test]
    fn fibre_presets_shape() {
        let smf = preset_fibre(FibreKind::SmfLike);
        let hcf = preset_fibre(FibreKind::HcfLike);
        assert!(smf.eval(3.0).unwrap() > smf.eval(8.0).unwrap());
        let thermal = |m: &PsdModel| match m.components()[0] {
            PsdComponent::LorentzianTone {
                center,
                integrated_power,
                ..
            } => (center, integrated_power),
            _ => unreachable!(),
        };
        let (c_smf, q_smf) = thermal(&smf);
        let (c_hcf, q_hcf) = thermal(&hcf);
        assert_eq!(c_smf, 3.0);
        assert!(c_hcf < 2.0);
        assert!(q_hcf < q_smf);
        let mut f = 1.0;
        while f <= 2e6 {
            for m in [&smf, &hcf] {
                let v = m.eval(f).unwrap();
                assert!(v.is_finite() && v > 0.0);
            }
            f *= 1.07;
        }
    }

    #[test]
    fn toml_section_round_trip() {
        let m = preset_fibre(FibreKind::HcfLike);
        let text = toml::to_string(&m).unwrap();
        assert!(text.contains("[[component]]"));
        assert!(text.contains("kind = \"lorentzian_tone\""));
        let back: PsdModel = toml::from_str(&text).unwrap();
        assert_eq!(back.validated().unwrap(), m);
    }
}
