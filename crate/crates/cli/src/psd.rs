use std::path::PathBuf;

use interferospec::io::{decode_trace, Stamp, TraceKind};
use interferospec::spectral::{
    compensate_delay, extract_phase, moving_extrema_visibility, to_frequency_psd, welch_psd,
    DEFAULT_EXTREMA_WINDOW, DEFAULT_NULL_GUARD, DEFAULT_OVERLAP, DEFAULT_SMOOTH_WINDOW,
    DEFAULT_WINDOW_LEN,
};
use interferospec::trace::Sampled;
use interferospec::Error as CoreError;
use serde::Serialize;

use crate::error::{CliError, CliResult, Stage};
use crate::output::{sha256, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Unit {
    Phase,
    Freq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Phase,
    Voltage,
}

#[derive(Debug, clap::Args)]
pub struct PsdArgs {
    /// Trace file, binary (.ifstrace) or CSV (time,value).
    pub trace: PathBuf,
    /// Kind of a CSV trace without a `# kind=` line; binary traces record it.
    #[arg(long, value_enum, default_value = "voltage")]
    pub kind: Kind,
    /// Fringe sum S [V] for phase extraction; with --d skips the visibility estimate.
    #[arg(long, requires = "d")]
    pub s: Option<f64>,
    /// Fringe difference D [V].
    #[arg(long, requires = "s")]
    pub d: Option<f64>,
    /// Welch window [samples]; default 1e6, or the largest power of two <= n/8
    /// for shorter records.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    pub overlap: f64,
    /// Compensate the delay transfer 4 sin²(πfτ) for this τ [s].
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NULL_GUARD)]
    pub null_guard: f64,
    /// Output unit: phase PSD or frequency-noise PSD (f²·S).
    #[arg(long, value_enum, default_value = "phase")]
    pub unit: Unit,
}

#[derive(Serialize)]
struct Extraction {
    fringe_s: f64,
    fringe_d: f64,
    from_estimate: bool,
    clamped_fraction: f64,
}

#[derive(Serialize)]
struct Run {
    input: String,
    samples: usize,
    fs: f64,
    extraction: Option<Extraction>,
    tau: Option<f64>,
    unit: &'static str,
}

/// Stamp of a standalone analysis: hash over the input bytes and the flags.
pub fn stamp(args: &PsdArgs, input: &[u8], seed: Option<u64>) -> Stamp {
    let flags = format!(
        "kind={:?} s={:?} d={:?} window={:?} overlap={} tau={:?} null_guard={} unit={:?}",
        args.kind, args.s, args.d, args.window, args.overlap, args.tau, args.null_guard, args.unit
    );
    Stamp {
        config_sha256: sha256(&[&sha256(&[input]), flags.as_bytes()]),
        seed,
    }
}

fn input_error(e: CoreError) -> CliError {
    CliError::input(e.to_string())
}

fn default_window(n: usize) -> usize {
    if n / 8 >= DEFAULT_WINDOW_LEN {
        DEFAULT_WINDOW_LEN
    } else {
        // Largest power of two <= n/8.
        ((n / 8).max(2) + 1).next_power_of_two() / 2
    }
}

pub fn run(args: &PsdArgs, out: PathBuf) -> CliResult<()> {
    let bytes = std::fs::read(&args.trace)
        .map_err(|e| CliError::input(format!("{}: {e}", args.trace.display())))?;
    let default_kind = match args.kind {
        Kind::Phase => TraceKind::Phase,
        Kind::Voltage => TraceKind::Voltage,
    };
    let file = decode_trace(&bytes, default_kind)
        .map_err(|e| CliError::input(format!("{}: {e}", args.trace.display())))?;
    let art = Artifacts::new(out, stamp(args, &bytes, file.provenance.seed));
    drop(bytes);
    let (fs, n) = (file.fs, file.samples.len());

    let (phase, extraction) = match file.kind {
        TraceKind::Phase => (file.into_phase().map_err(input_error)?, None),
        TraceKind::Voltage => {
            let v = file.into_voltage().map_err(input_error)?;
            let (s, d, from_estimate) = match (args.s, args.d) {
                (Some(s), Some(d)) => (s, d, false),
                _ => {
                    let extrema = DEFAULT_EXTREMA_WINDOW.min(v.len());
                    let smooth = DEFAULT_SMOOTH_WINDOW.min(extrema / 4).max(1);
                    let est = moving_extrema_visibility(&v, smooth, extrema)
                        .stage(|| "visibility estimate".into())?;
                    let f = est.fringe();
                    (f.s, f.d, true)
                }
            };
            let e = extract_phase(&v, s, d).stage(|| "extract phase".into())?;
            (
                e.phase,
                Some(Extraction {
                    fringe_s: s,
                    fringe_d: d,
                    from_estimate,
                    clamped_fraction: e.clamped_fraction,
                }),
            )
        }
        TraceKind::Power => return Err(CliError::input("power traces are not analysed; convert to voltage or phase")),
    };
    let window = args.window.unwrap_or_else(|| default_window(n));
    let mut spectrum = welch_psd(&phase, window, args.overlap).stage(|| "welch".into())?;
    if let Some(tau) = args.tau {
        spectrum = compensate_delay(&spectrum, tau, args.null_guard).stage(|| "compensate delay".into())?;
    }
    if args.unit == Unit::Freq {
        spectrum = to_frequency_psd(&spectrum).stage(|| "frequency PSD".into())?;
    }
    art.spectrum("psd", &spectrum)?;
    art.json(
        "psd_run.json",
        &Run {
            input: args.trace.display().to_string(),
            samples: n,
            fs,
            extraction,
            tau: args.tau,
            unit: spectrum.unit().label(),
        },
    )?;
    art.gnuplot(
        "plot_psd.gp",
        "set logscale xy\nset xlabel 'Frequency [Hz]'\nset output 'psd.png'\n\
         plot 'psd.csv' using 1:($3 > 0 ? $2 : NaN) with lines title 'PSD'\n",
    )
}
