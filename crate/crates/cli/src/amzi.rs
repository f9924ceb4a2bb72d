use std::fmt::Write as _;

use interferospec::interferometer::{run_parallel_amzis, ParallelScenario};
use interferospec::io::{TraceKind, TraceView};
use interferospec::seed;
use interferospec::spectral::{
    compensate_delay, extract_phase, moving_extrema_visibility, stitch_spectra, to_frequency_psd,
    welch_psd, SpectrumEstimate, StitchConsistency, VisibilityEstimate,
};
use interferospec::synth::Provenance;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AmziPlan, FringeReference, SamplingSet, ScenarioConfig, TraceOutput};
use crate::error::{CliResult, Stage};
use crate::output::Artifacts;

#[derive(Serialize)]
struct ChannelSet {
    name: String,
    /// Moving-extrema estimate; absent when the record is shorter than one
    /// extrema window.
    visibility_estimate: Option<VisibilityEstimate>,
    model_visibility: f64,
    fringe_s: f64,
    fringe_d: f64,
    clamped_fraction: f64,
    #[serde(skip)]
    sdphi: SpectrumEstimate,
}

#[derive(Serialize)]
struct SetSummary {
    index: usize,
    fs: f64,
    duration: f64,
    samples: usize,
    welch_window: usize,
    channels: Vec<ChannelSet>,
}

#[derive(Serialize)]
struct ChannelSummary {
    name: String,
    tau: f64,
    /// `1/τ` [Hz].
    null_spacing: f64,
    stitch: Vec<StitchConsistency>,
    stitched_bins: usize,
    compensated_valid_bins: usize,
}

#[derive(Serialize)]
struct Summary {
    config_sha256: String,
    seed: String,
    fringe_reference: &'static str,
    sets: Vec<SetSummary>,
    channels: Vec<ChannelSummary>,
}

fn run_set(
    cfg: &ScenarioConfig,
    plan: &AmziPlan,
    base_seed: u64,
    index: usize,
    set: &SamplingSet,
    art: &Artifacts,
) -> CliResult<SetSummary> {
    let a = &cfg.analysis;
    let label = format!("set {index} ({} Hz)", set.fs);
    let scenario = ParallelScenario {
        laser: plan.laser.clone(),
        channels: plan.channels.clone(),
        detector: plan.detector.at(set.fs),
        duration: set.duration,
        fs: set.fs,
        seed: seed::derive(seed::derive(base_seed, seed::stream::SAMPLING_SET), index as u64),
        max_samples: a.max_samples,
        keep_phase: false,
    };
    let samples = scenario.samples();
    let window = set.welch_window.unwrap_or(a.welch_window);
    let runs = run_parallel_amzis(&scenario).stage(|| format!("{label}: simulate"))?;

    let mut channels = Vec::with_capacity(runs.len());
    for (name, run) in runs {
        let stage = |what: &str| format!("{label} channel {name}: {what}");
        let prefix = format!("set{index}_{name}");
        // Trace headers carry the run seed, matching the stamp on every other artifact.
        let prov = Provenance::derived_from(art.stamp.seed);
        let vt = TraceView::of(TraceKind::Voltage, &run.voltage, prov);
        if cfg.output.traces == TraceOutput::Binary {
            art.trace_binary(&format!("{prefix}_voltage.ifstrace"), &vt)?;
        }
        if cfg.output.csv_excerpt > 0 {
            art.trace_csv(&format!("{prefix}_voltage_excerpt.csv"), &vt, Some(cfg.output.csv_excerpt))?;
        }

        let visibility_estimate = if a.extrema_window <= samples {
            Some(
                moving_extrema_visibility(&run.voltage, a.smooth_window, a.extrema_window)
                    .stage(|| stage("visibility"))?,
            )
        } else {
            None
        };
        let fringe = match (a.fringe_reference, visibility_estimate) {
            (FringeReference::Estimate, Some(v)) => v.fringe(),
            _ => run.fringe,
        };
        let extracted = extract_phase(&run.voltage, fringe.s, fringe.d).stage(|| stage("extract phase"))?;
        drop(run.voltage);
        if cfg.output.traces == TraceOutput::Binary {
            art.trace_binary(&format!("{prefix}_dphi.ifstrace"), &TraceView::of(TraceKind::Phase, &extracted.phase, prov))?;
        }
        let sdphi = welch_psd(&extracted.phase, window, a.overlap).stage(|| stage("welch"))?;
        art.spectrum(&format!("{prefix}_sdphi"), &sdphi)?;
        channels.push(ChannelSet {
            name,
            visibility_estimate,
            model_visibility: run.fringe.visibility(),
            fringe_s: fringe.s,
            fringe_d: fringe.d,
            clamped_fraction: extracted.clamped_fraction,
            sdphi,
        });
    }
    Ok(SetSummary {
        index,
        fs: set.fs,
        duration: set.duration,
        samples,
        welch_window: window,
        channels,
    })
}

fn trim(s: SpectrumEstimate, band: Option<[f64; 2]>, stage: &str) -> CliResult<SpectrumEstimate> {
    match band {
        Some([lo, hi]) => s.band(lo, hi).stage(|| stage.to_owned()),
        None => Ok(s),
    }
}

pub fn run(cfg: &ScenarioConfig, plan: &AmziPlan, seed: u64, art: &Artifacts) -> CliResult<()> {
    let a = &cfg.analysis;
    let sets: Vec<SetSummary> = plan
        .sets
        .par_iter()
        .map(|(i, s)| run_set(cfg, plan, seed, *i, s, art))
        .collect::<CliResult<_>>()?;

    let mut channels = Vec::with_capacity(plan.channels.len());
    for (c, spec) in plan.channels.iter().enumerate() {
        let name = &spec.name;
        let parts: Vec<SpectrumEstimate> = sets.iter().map(|s| s.channels[c].sdphi.clone()).collect();
        let stitched = stitch_spectra(&parts, &a.stitch_boundaries).stage(|| format!("channel {name}: stitch"))?;
        let sdphi = trim(stitched.spectrum, a.report_band, &format!("channel {name}: report band"))?;
        let sphi = compensate_delay(&sdphi, spec.amzi.tau, a.null_guard)
            .stage(|| format!("channel {name}: compensate delay"))?;
        let snu = to_frequency_psd(&sphi).stage(|| format!("channel {name}: frequency PSD"))?;
        art.spectrum(&format!("{name}_sdphi_stitched"), &sdphi)?;
        art.spectrum(&format!("{name}_sphi"), &sphi)?;
        art.spectrum(&format!("{name}_snu"), &snu)?;
        channels.push(ChannelSummary {
            name: name.clone(),
            tau: spec.amzi.tau,
            null_spacing: 1.0 / spec.amzi.tau,
            stitch: stitched.consistency,
            stitched_bins: sdphi.len(),
            compensated_valid_bins: sphi.valid().iter().filter(|v| **v).count(),
        });
    }

    art.json(
        "summary.json",
        &Summary {
            config_sha256: art.stamp.hex(),
            seed: art.stamp.seed_text(),
            fringe_reference: match a.fringe_reference {
                FringeReference::Estimate => "estimate",
                FringeReference::Model => "model",
            },
            sets,
            channels,
        },
    )?;
    art.gnuplot("plot_amzi.gp", &plot_script(plan, cfg.output.csv_excerpt > 0))
}

fn plot_script(plan: &AmziPlan, excerpts: bool) -> String {
    let mut s = String::from("set logscale xy\nset format y '%.0e'\nset xlabel 'Frequency [Hz]'\n");
    let series = |stem: &str| -> String {
        plan.channels
            .iter()
            .map(|c| format!("'{}_{stem}.csv' using 1:($3 > 0 ? $2 : NaN) with lines title '{}'", c.name, c.name))
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    let _ = writeln!(s, "set output 'sdphi.png'\nset ylabel 'S_{{dphi}} [rad^2/Hz]'\nplot {}", series("sdphi_stitched"));
    let _ = writeln!(s, "set output 'sphi.png'\nset ylabel 'S_{{phi}} [rad^2/Hz]'\nplot {}", series("sphi"));
    let _ = writeln!(s, "set output 'snu.png'\nset ylabel 'S_{{nu}} [Hz^2/Hz]'\nplot {}", series("snu"));
    if !excerpts {
        return s;
    }
    s.push_str("unset logscale xy\nset xlabel 'Time [s]'\nset ylabel 'Voltage [V]'\nset format y '%g'\n");
    for (i, _) in &plan.sets {
        let plots: Vec<String> = plan
            .channels
            .iter()
            .map(|c| format!("'set{i}_{}_voltage_excerpt.csv' using 1:2 with lines title '{}'", c.name, c.name))
            .collect();
        let _ = writeln!(s, "set output 'set{i}_voltage.png'\nplot {}", plots.join(", \\\n     "));
    }
    s
}
