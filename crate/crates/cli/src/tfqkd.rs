use std::fmt::Write as _;

use interferospec::io::encode_counts_csv;
use interferospec::photoncount::{
    qber, qber_breakdown, run_drift, simulate_counts_from, DriftScenario, DriftStats, KeyPattern,
    QberBreakdown, TimeTagSeries,
};
use interferospec::seed;
use interferospec::synth::WienerSteps;
use serde::Serialize;

use crate::config::TfqkdConfig;
use crate::error::{CliResult, Stage};
use crate::output::Artifacts;

#[derive(Serialize)]
struct DriftSummary {
    bins: usize,
    bin_duration: f64,
    total_counts: u64,
    /// From counts inverted with the expected extrema at phase 0 and π.
    rate_std: f64,
    rate_max_abs: f64,
    /// Same statistics on the folded, bin-averaged simulated phase.
    truth_rate_std: f64,
    truth_rate_max_abs: f64,
}

#[derive(Serialize)]
struct KeyedSummary {
    bins: usize,
    qber: f64,
    n_correct: u64,
    n_error: u64,
    qber_std_error: f64,
    expected: QberBreakdown,
    /// Measured minus expected-at-fixed-phase: errors attributed to drift
    /// during keyed acquisition.
    drift_contribution: f64,
}

#[derive(Serialize)]
struct Summary {
    config_sha256: String,
    seed: String,
    qber: f64,
    rate_std: f64,
    rate_max_abs: f64,
    drift: DriftSummary,
    keyed: KeyedSummary,
}

fn drift_csv(art: &Artifacts, series: &TimeTagSeries, d: &DriftStats) -> String {
    let mut s = art.stamp.comment_line();
    s.push_str("bin_start_s,phase_rad,rate_rad_per_ms\n");
    for (i, (p, r)) in d.drift_trace.iter().zip(&d.rate_trace).enumerate() {
        let _ = writeln!(s, "{},{p},{r}", series.bin_start(i));
    }
    s
}

pub fn run(t: &TfqkdConfig, seed: u64, art: &Artifacts) -> CliResult<()> {
    let drift = run_drift(
        &DriftScenario {
            pulse: t.pulse,
            visibility: t.visibility,
            diffusion: t.diffusion,
            duration: t.drift_duration,
        },
        seed,
    )
    .stage(|| "drift acquisition".into())?;
    art.write("counts_drift.csv", encode_counts_csv(&drift.series, &art.stamp).as_bytes())?;
    art.write("drift.csv", drift_csv(art, &drift.series, &drift.recovered).as_bytes())?;

    let bins = (t.key_duration / t.pulse.bin_duration).round() as usize;
    let key_phase = t.key_phase;
    let phases = WienerSteps::new(
        t.key_diffusion.unwrap_or(t.diffusion),
        t.pulse.rep_rate,
        seed::derive(seed, seed::stream::KEY_DRIFT),
    )
    .stage(|| "keyed acquisition: phase drift".into())?
    .map(|p| p + key_phase);
    let keyed = simulate_counts_from(
        phases,
        0.0,
        t.visibility,
        &t.pulse,
        &KeyPattern::Keyed(t.pattern.clone()),
        seed::derive(seed, seed::stream::KEY_CLICKS),
        bins,
    )
    .stage(|| "keyed acquisition: counts".into())?
    .series;
    art.write("counts_keyed.csv", encode_counts_csv(&keyed, &art.stamp).as_bytes())?;
    let q = qber(&keyed).stage(|| "keyed acquisition: qber".into())?;
    let expected = qber_breakdown(t.visibility, &t.pulse).stage(|| "keyed acquisition: expected qber".into())?;

    art.json(
        "summary.json",
        &Summary {
            config_sha256: art.stamp.hex(),
            seed: art.stamp.seed_text(),
            qber: q.qber,
            rate_std: drift.recovered.rate_std,
            rate_max_abs: drift.recovered.rate_max_abs,
            drift: DriftSummary {
                bins: drift.series.bins().len(),
                bin_duration: t.pulse.bin_duration,
                total_counts: drift.series.total_counts(),
                rate_std: drift.recovered.rate_std,
                rate_max_abs: drift.recovered.rate_max_abs,
                truth_rate_std: drift.truth.rate_std,
                truth_rate_max_abs: drift.truth.rate_max_abs,
            },
            keyed: KeyedSummary {
                bins,
                qber: q.qber,
                n_correct: q.n_correct,
                n_error: q.n_error,
                qber_std_error: q.std_error(),
                expected,
                drift_contribution: q.qber - expected.expected,
            },
        },
    )?;
    art.gnuplot(
        "plot_tfqkd.gp",
        "set xlabel 'Time [s]'\n\
         set output 'counts_drift.png'\nset ylabel 'Counts per bin'\n\
         plot 'counts_drift.csv' using 1:2 with lines title 'unmodulated'\n\
         set output 'drift_phase.png'\nset ylabel 'Phase [rad]'\n\
         plot 'drift.csv' using 1:2 with lines title 'phase'\n\
         set output 'drift_rate.png'\nset ylabel 'Drift rate [rad/ms]'\n\
         plot 'drift.csv' using 1:3 with lines title 'rate'\n\
         set output 'counts_keyed.png'\nset ylabel 'Counts per bin'\n\
         plot 'counts_keyed.csv' using 1:(stringcolumn(3) eq 'zero' ? $2 : NaN) with points title '0', \\\n\
         \x20    'counts_keyed.csv' using 1:(stringcolumn(3) eq 'pi' ? $2 : NaN) with points title 'pi'\n",
    )
}
