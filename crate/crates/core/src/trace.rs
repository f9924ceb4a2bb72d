//! Uniformly sampled series shared by the synthesis, interferometer and
//! analysis stages.

/// Read access to a uniformly sampled series.
pub trait Sampled {
    fn samples(&self) -> &[f64];
    /// Sampling rate [Hz].
    fn fs(&self) -> f64;
    /// Time of the first sample [s].
    fn t0(&self) -> f64;

    fn len(&self) -> usize {
        self.samples().len()
    }

    fn is_empty(&self) -> bool {
        self.samples().is_empty()
    }

    /// Record length `len / fs` [s].
    fn duration(&self) -> f64 {
        self.len() as f64 / self.fs()
    }

    /// Time of sample `i` [s].
    fn time(&self, i: usize) -> f64 {
        self.t0() + i as f64 / self.fs()
    }
}

pub(crate) fn check_series(samples: &[f64], fs: f64, what: &str) -> crate::Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return crate::error::arg(format!("{what}: sampling rate must be > 0, got {fs}"));
    }
    if samples.is_empty() {
        return crate::error::arg(format!("{what}: no samples"));
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return crate::error::arg(format!("{what}: sample {i} is not finite"));
    }
    Ok(())
}

/// Relative comparison used for sampling-rate metadata.
pub(crate) fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
