use std::path::{Path, PathBuf};

use interferospec::io::{
    encode_spectrum_csv, encode_trace_csv, spectrum_summary, to_json, write_atomic,
    write_atomic_with, write_binary, Stamp, TraceView,
};
use interferospec::spectral::SpectrumEstimate;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliResult, Stage};

pub const OUT_ENV: &str = "INTERFEROSPEC_OUT";

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// `--out`, then `INTERFEROSPEC_OUT`, then the config's `output_dir`.
pub fn resolve_dir(flag: Option<PathBuf>, config: Option<&Path>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
}

/// Artifact directory; every file written through it carries the stamp.
pub struct Artifacts {
    dir: PathBuf,
    pub stamp: Stamp,
}

impl Artifacts {
    pub fn new(dir: PathBuf, stamp: Stamp) -> Self {
        Self { dir, stamp }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.path(name), bytes).stage(|| format!("write {name}"))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let text = to_json(value).stage(|| format!("serialise {name}"))?;
        self.write(name, text.as_bytes())
    }

    pub fn spectrum(&self, stem: &str, s: &SpectrumEstimate) -> CliResult<()> {
        self.write(&format!("{stem}.csv"), encode_spectrum_csv(s, &self.stamp).as_bytes())?;
        self.json(&format!("{stem}.json"), &spectrum_summary(s, &self.stamp))
    }

    pub fn trace_binary(&self, name: &str, t: &TraceView<'_>) -> CliResult<()> {
        write_atomic_with(&self.path(name), |w| write_binary(w, t, &self.stamp))
            .stage(|| format!("write {name}"))
    }

    pub fn trace_csv(&self, name: &str, t: &TraceView<'_>, limit: Option<usize>) -> CliResult<()> {
        self.write(name, encode_trace_csv(t, &self.stamp, limit).as_bytes())
    }

    /// gnuplot script; rendering is left to the user.
    pub fn gnuplot(&self, name: &str, body: &str) -> CliResult<()> {
        let mut s = self.stamp.comment_line();
        s.push_str("# Render with: gnuplot ");
        s.push_str(name);
        s.push_str(
            "\nset datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\nset terminal pngcairo size 1000,650\nset grid\n",
        );
        s.push_str(body);
        self.write(name, s.as_bytes())
    }
}
