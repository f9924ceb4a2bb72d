//! On-disk formats.
//!
//! # Binary trace (`.ifstrace`)
//!
//! A fixed 64-byte header followed by `n` little-endian IEEE-754 `f64`
//! samples. All header integers and floats are little-endian.
//!
//! | bytes  | field                                                  |
//! |--------|--------------------------------------------------------|
//! | 0..8   | magic `IFSTRACE`                                       |
//! | 8..10  | format version, `u16` = 1                              |
//! | 10     | kind, `u8`: 0 phase [rad], 1 voltage [V], 2 power [W]  |
//! | 11     | generator tag, `u8` (see [`Algorithm::tag`])           |
//! | 12     | seed present, `u8` 0 or 1                              |
//! | 13..16 | reserved, zero                                         |
//! | 16..24 | fs [Hz], `f64`                                         |
//! | 24..32 | n, `u64`                                               |
//! | 32..40 | t0 [s], `f64`                                          |
//! | 40..48 | seed, `u64` (zero when absent)                         |
//! | 48..64 | first 16 bytes of the config SHA-256                   |
//!
//! # Text artifacts
//!
//! Every CSV starts with a stamp line `# config_sha256=<64 hex> seed=<u64|none>`,
//! optionally followed by further `# key=value ...` lines, then a header row.
//!
//! * trace: `# kind=<phase|voltage|power> fs=<Hz> t0=<s>`, header `time,value`
//! * spectrum: `# unit=<phase_psd|freq_psd>`, header `freq,value,valid`
//!   (`valid` is 1 or 0; invalid values are written as 0)
//! * counts: `# bin_duration=<s>`, header `bin_start_s,count,label` with
//!   label one of `zero`, `pi`, `unmodulated`
//!
//! Floats are written in Rust's shortest round-trip form, so text files parse
//! back to identical values. JSON summaries carry the stamp as the
//! `config_sha256` and `seed` fields, since JSON has no comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::interferometer::{PowerTrace, VoltageTrace};
use crate::photoncount::{BinLabel, TimeBin, TimeTagSeries};
use crate::spectral::{SpectrumEstimate, SpectrumUnit};
use crate::synth::{Algorithm, PhaseTrace, Provenance};
use crate::trace::Sampled;

pub const MAGIC: &[u8; 8] = b"IFSTRACE";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 64;

/// Config hash and run seed attached to every artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stamp {
    pub config_sha256: [u8; 32],
    pub seed: Option<u64>,
}

impl Stamp {
    pub fn hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.config_sha256 {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    pub fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".to_owned(), |s| s.to_string())
    }

    /// `# config_sha256=... seed=...` including the newline.
    pub fn comment_line(&self) -> String {
        format!("# config_sha256={} seed={}\n", self.hex(), self.seed_text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Phase,
    Voltage,
    Power,
}

impl TraceKind {
    fn tag(self) -> u8 {
        match self {
            Self::Phase => 0,
            Self::Voltage => 1,
            Self::Power => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        Some(match t {
            0 => Self::Phase,
            1 => Self::Voltage,
            2 => Self::Power,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Phase => "phase",
            Self::Voltage => "voltage",
            Self::Power => "power",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "phase" => Some(Self::Phase),
            "voltage" => Some(Self::Voltage),
            "power" => Some(Self::Power),
            _ => None,
        }
    }
}

/// Borrowed trace to be written.
#[derive(Debug, Clone, Copy)]
pub struct TraceView<'a> {
    pub kind: TraceKind,
    pub samples: &'a [f64],
    pub fs: f64,
    pub t0: f64,
    pub provenance: Provenance,
}

impl<'a> TraceView<'a> {
    pub fn of<T: Sampled + ?Sized>(kind: TraceKind, trace: &'a T, provenance: Provenance) -> Self {
        Self {
            kind,
            samples: trace.samples(),
            fs: trace.fs(),
            t0: trace.t0(),
            provenance,
        }
    }

    pub fn phase(trace: &'a PhaseTrace) -> Self {
        Self::of(TraceKind::Phase, trace, trace.provenance())
    }
}

/// A trace of any kind as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub kind: TraceKind,
    pub samples: Vec<f64>,
    pub fs: f64,
    pub t0: f64,
    pub provenance: Provenance,
}

impl TraceFile {
    pub fn from_trace<T: Sampled + ?Sized>(kind: TraceKind, trace: &T, provenance: Provenance) -> Self {
        Self {
            kind,
            samples: trace.samples().to_vec(),
            fs: trace.fs(),
            t0: trace.t0(),
            provenance,
        }
    }

    pub fn from_phase(trace: &PhaseTrace) -> Self {
        Self::from_trace(TraceKind::Phase, trace, trace.provenance())
    }

    pub fn view(&self) -> TraceView<'_> {
        TraceView {
            kind: self.kind,
            samples: &self.samples,
            fs: self.fs,
            t0: self.t0,
            provenance: self.provenance,
        }
    }

    pub fn into_phase(self) -> Result<PhaseTrace> {
        if self.kind != TraceKind::Phase {
            return arg(format!("expected a phase trace, found {}", self.kind.as_str()));
        }
        PhaseTrace::with_provenance(self.samples, self.fs, self.t0, self.provenance)
    }

    pub fn into_voltage(self) -> Result<VoltageTrace> {
        if self.kind != TraceKind::Voltage {
            return arg(format!("expected a voltage trace, found {}", self.kind.as_str()));
        }
        VoltageTrace::new(self.samples, self.fs, self.t0)
    }

    pub fn into_power(self) -> Result<PowerTrace> {
        if self.kind != TraceKind::Power {
            return arg(format!("expected a power trace, found {}", self.kind.as_str()));
        }
        PowerTrace::new(self.samples, self.fs, self.t0)
    }
}

fn bad(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format {
        location: location.into(),
        message: message.into(),
    }
}

fn at_byte(offset: usize, message: impl Into<String>) -> Error {
    bad(format!("byte offset {offset}"), message)
}

fn binary_header(trace: &TraceView<'_>, stamp: &Stamp) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    h[8..10].copy_from_slice(&VERSION.to_le_bytes());
    h[10] = trace.kind.tag();
    h[11] = trace.provenance.algorithm.tag();
    h[12] = u8::from(trace.provenance.seed.is_some());
    h[16..24].copy_from_slice(&trace.fs.to_le_bytes());
    h[24..32].copy_from_slice(&(trace.samples.len() as u64).to_le_bytes());
    h[32..40].copy_from_slice(&trace.t0.to_le_bytes());
    h[40..48].copy_from_slice(&trace.provenance.seed.unwrap_or(0).to_le_bytes());
    h[48..64].copy_from_slice(&stamp.config_sha256[..16]);
    h
}

/// Streams the binary format into `w`.
pub fn write_binary<W: std::io::Write + ?Sized>(w: &mut W, trace: &TraceView<'_>, stamp: &Stamp) -> Result<()> {
    w.write_all(&binary_header(trace, stamp))?;
    let mut buf = Vec::with_capacity(8 * 8192);
    for chunk in trace.samples.chunks(8192) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn encode_binary(trace: &TraceView<'_>, stamp: &Stamp) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * trace.samples.len());
    write_binary(&mut out, trace, stamp).expect("writing to a Vec cannot fail");
    out
}

fn le_f64(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Decodes a binary trace; errors name the offending byte offset.
pub fn decode_binary(bytes: &[u8]) -> Result<TraceFile> {
    if bytes.len() < HEADER_LEN {
        return Err(at_byte(
            bytes.len(),
            format!("file ends inside the {HEADER_LEN}-byte header"),
        ));
    }
    if &bytes[..8] != MAGIC {
        return Err(at_byte(0, "missing IFSTRACE magic"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != VERSION {
        return Err(at_byte(8, format!("unsupported format version {version}")));
    }
    let kind = TraceKind::from_tag(bytes[10])
        .ok_or_else(|| at_byte(10, format!("unknown trace kind {}", bytes[10])))?;
    let algorithm = Algorithm::from_tag(bytes[11])
        .ok_or_else(|| at_byte(11, format!("unknown generator tag {}", bytes[11])))?;
    let has_seed = match bytes[12] {
        0 => false,
        1 => true,
        v => return Err(at_byte(12, format!("seed flag must be 0 or 1, got {v}"))),
    };
    if let Some(i) = bytes[13..16].iter().position(|&b| b != 0) {
        return Err(at_byte(13 + i, "reserved byte is not zero"));
    }
    let fs = le_f64(bytes, 16);
    if !(fs.is_finite() && fs > 0.0) {
        return Err(at_byte(16, format!("sampling rate must be finite and > 0, got {fs}")));
    }
    let n = le_u64(bytes, 24);
    let t0 = le_f64(bytes, 32);
    if !t0.is_finite() {
        return Err(at_byte(32, "t0 is not finite"));
    }
    let seed = le_u64(bytes, 40);
    let payload = bytes.len() - HEADER_LEN;
    if !payload.is_multiple_of(8) {
        return Err(at_byte(
            HEADER_LEN + payload / 8 * 8,
            "payload is not a whole number of 8-byte samples",
        ));
    }
    if (payload / 8) as u64 != n {
        return Err(at_byte(
            24,
            format!("header declares {n} samples but the payload holds {}", payload / 8),
        ));
    }
    if n == 0 {
        return Err(at_byte(24, "trace has no samples"));
    }
    let mut samples = Vec::with_capacity(n as usize);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(at_byte(HEADER_LEN + 8 * i, format!("sample {i} is not finite")));
        }
        samples.push(v);
    }
    Ok(TraceFile {
        kind,
        samples,
        fs,
        t0,
        provenance: Provenance {
            algorithm,
            seed: has_seed.then_some(seed),
        },
    })
}

/// Trace as CSV. `limit` truncates to the first samples (for excerpts).
pub fn encode_trace_csv(trace: &TraceView<'_>, stamp: &Stamp, limit: Option<usize>) -> String {
    let n = limit.map_or(trace.samples.len(), |l| l.min(trace.samples.len()));
    let mut s = String::with_capacity(48 * n + 160);
    s.push_str(&stamp.comment_line());
    let _ = writeln!(
        s,
        "# kind={} fs={} t0={}",
        trace.kind.as_str(),
        trace.fs,
        trace.t0
    );
    s.push_str("time,value\n");
    for (i, v) in trace.samples[..n].iter().enumerate() {
        let _ = writeln!(s, "{},{}", trace.t0 + i as f64 / trace.fs, v);
    }
    s
}

/// `key=value` pairs from the leading `#` lines, with the 1-based line number
/// of the first non-comment line.
fn comment_meta(text: &str) -> (Vec<(String, String, usize)>, usize) {
    let mut meta = Vec::new();
    let mut line_no = 1;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        for kv in rest.split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                meta.push((k.to_owned(), v.to_owned(), line_no));
            }
        }
        line_no += 1;
    }
    (meta, line_no)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(pos: Option<&csv::Position>) -> String {
    pos.map_or_else(|| "end of file".to_owned(), |p| format!("line {}", p.line()))
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, want: &[&str], line: usize) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| bad(format!("line {line}"), e.to_string()))?;
    if headers.iter().ne(want.iter().copied()) {
        return Err(bad(
            format!("line {line}"),
            format!("expected header `{}`", want.join(",")),
        ));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(field: &str, what: &str, loc: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| bad(loc, format!("cannot parse {what} `{field}`")))
}

/// Parses a trace CSV. Without a `kind` comment the trace is assumed to be
/// `default_kind`; without `fs` the rate is inferred from the time column,
/// which must then be uniformly spaced.
pub fn decode_trace_csv(text: &str, default_kind: TraceKind) -> Result<TraceFile> {
    let (meta, header_line) = comment_meta(text);
    let mut kind = default_kind;
    let mut fs = None;
    for (k, v, line) in &meta {
        let loc = format!("line {line}");
        match k.as_str() {
            "kind" => {
                kind = TraceKind::parse(v)
                    .ok_or_else(|| bad(&loc, format!("unknown trace kind `{v}`")))?
            }
            "fs" => fs = Some(parse_num::<f64>(v, "fs", &loc)?),
            _ => {}
        }
    }
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &["time", "value"], header_line)?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(line_of(e.position()), e.to_string()))?;
        let loc = line_of(rec.position());
        if rec.len() != 2 {
            return Err(bad(loc, format!("expected 2 fields, found {}", rec.len())));
        }
        let t: f64 = parse_num(&rec[0], "time", &loc)?;
        let v: f64 = parse_num(&rec[1], "value", &loc)?;
        if !(t.is_finite() && v.is_finite()) {
            return Err(bad(loc, "non-finite value"));
        }
        times.push((t, loc));
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(bad(format!("line {}", header_line + 1), "trace has no samples"));
    }
    let t0 = times[0].0;
    let fs = match fs {
        Some(fs) => fs,
        None => {
            if times.len() < 2 {
                return Err(bad(&times[0].1, "cannot infer fs from a single sample"));
            }
            let dt = (times[times.len() - 1].0 - t0) / (times.len() - 1) as f64;
            if !(dt > 0.0) {
                return Err(bad(&times[1].1, "time column is not increasing"));
            }
            for (i, (t, loc)) in times.iter().enumerate() {
                if (t - (t0 + i as f64 * dt)).abs() > 1e-6 * dt {
                    return Err(bad(loc, "time column is not uniformly spaced"));
                }
            }
            1.0 / dt
        }
    };
    if !(fs.is_finite() && fs > 0.0) {
        return arg(format!("sampling rate must be > 0, got {fs}"));
    }
    Ok(TraceFile {
        kind,
        samples,
        fs,
        t0,
        provenance: Provenance::EXTERNAL,
    })
}

/// Reads a trace file, binary if it starts with the magic bytes, CSV otherwise.
pub fn read_trace(path: &Path, default_kind: TraceKind) -> Result<TraceFile> {
    decode_trace(&fs::read(path)?, default_kind)
}

/// Binary if `bytes` starts with the magic, CSV otherwise.
pub fn decode_trace(bytes: &[u8], default_kind: TraceKind) -> Result<TraceFile> {
    if bytes.starts_with(MAGIC) {
        return decode_binary(bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|e| {
        at_byte(
            e.valid_up_to(),
            "neither a binary trace (no IFSTRACE magic) nor UTF-8 text",
        )
    })?;
    decode_trace_csv(text, default_kind)
}

fn unit_tag(u: SpectrumUnit) -> &'static str {
    match u {
        SpectrumUnit::PhasePsd => "phase_psd",
        SpectrumUnit::FreqPsd => "freq_psd",
    }
}

pub fn encode_spectrum_csv(s: &SpectrumEstimate, stamp: &Stamp) -> String {
    let mut out = String::with_capacity(48 * s.len() + 160);
    out.push_str(&stamp.comment_line());
    let _ = writeln!(out, "# unit={}", unit_tag(s.unit()));
    out.push_str("freq,value,valid\n");
    for ((f, v), ok) in s.freqs().iter().zip(s.values()).zip(s.valid()) {
        let _ = writeln!(out, "{f},{v},{}", u8::from(*ok));
    }
    out
}

pub fn decode_spectrum_csv(text: &str) -> Result<SpectrumEstimate> {
    let (meta, header_line) = comment_meta(text);
    let mut unit = None;
    for (k, v, line) in &meta {
        if k == "unit" {
            unit = Some(match v.as_str() {
                "phase_psd" => SpectrumUnit::PhasePsd,
                "freq_psd" => SpectrumUnit::FreqPsd,
                _ => return Err(bad(format!("line {line}"), format!("unknown unit `{v}`"))),
            });
        }
    }
    let unit = unit.ok_or_else(|| bad("line 1", "missing `# unit=` line"))?;
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &["freq", "value", "valid"], header_line)?;
    let (mut freqs, mut values, mut valid) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(line_of(e.position()), e.to_string()))?;
        let loc = line_of(rec.position());
        if rec.len() != 3 {
            return Err(bad(loc, format!("expected 3 fields, found {}", rec.len())));
        }
        freqs.push(parse_num(&rec[0], "freq", &loc)?);
        values.push(parse_num(&rec[1], "value", &loc)?);
        valid.push(match &rec[2] {
            "1" => true,
            "0" => false,
            v => return Err(bad(loc, format!("valid must be 0 or 1, got `{v}`"))),
        });
    }
    SpectrumEstimate::new(freqs, values, unit, valid, Vec::new())
}

pub fn encode_counts_csv(series: &TimeTagSeries, stamp: &Stamp) -> String {
    let mut out = String::with_capacity(32 * series.bins().len() + 160);
    out.push_str(&stamp.comment_line());
    let _ = writeln!(out, "# bin_duration={}", series.bin_duration());
    out.push_str("bin_start_s,count,label\n");
    for (i, b) in series.bins().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", series.bin_start(i), b.count, b.label.as_str());
    }
    out
}

pub fn decode_counts_csv(text: &str) -> Result<TimeTagSeries> {
    let (meta, header_line) = comment_meta(text);
    let mut bin_duration = None;
    for (k, v, line) in &meta {
        if k == "bin_duration" {
            bin_duration = Some(parse_num::<f64>(v, "bin_duration", &format!("line {line}"))?);
        }
    }
    let bin_duration = bin_duration.ok_or_else(|| bad("line 1", "missing `# bin_duration=` line"))?;
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &["bin_start_s", "count", "label"], header_line)?;
    let mut bins = Vec::new();
    let mut t0 = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(line_of(e.position()), e.to_string()))?;
        let loc = line_of(rec.position());
        if rec.len() != 3 {
            return Err(bad(loc, format!("expected 3 fields, found {}", rec.len())));
        }
        let start: f64 = parse_num(&rec[0], "bin_start_s", &loc)?;
        t0.get_or_insert(start);
        let count = parse_num(&rec[1], "count", &loc)?;
        let label = BinLabel::parse(&rec[2])
            .ok_or_else(|| bad(&loc, format!("unknown label `{}`", &rec[2])))?;
        bins.push(TimeBin { count, label });
    }
    TimeTagSeries::new(bins, bin_duration, t0.unwrap_or(0.0))
}

/// Spectrum metadata plus per-decade band statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub config_sha256: String,
    pub seed: String,
    pub unit: SpectrumUnit,
    pub unit_label: String,
    pub bins: usize,
    pub valid_bins: usize,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub resolution: Option<f64>,
    pub welch: Vec<crate::spectral::WelchMeta>,
    pub bands: Vec<crate::spectral::BandStat>,
}

pub fn spectrum_summary(s: &SpectrumEstimate, stamp: &Stamp) -> SpectrumSummary {
    SpectrumSummary {
        config_sha256: stamp.hex(),
        seed: stamp.seed_text(),
        unit: s.unit(),
        unit_label: s.unit().label().to_owned(),
        bins: s.len(),
        valid_bins: s.valid().iter().filter(|v| **v).count(),
        f_min: s.freqs().first().copied(),
        f_max: s.freqs().last().copied(),
        resolution: s.resolution(),
        welch: s.meta().to_vec(),
        bands: s.band_stats(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Model(format!("cannot serialise summary: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    write_atomic_with(path, |w| Ok(w.write_all(contents)?))
}

/// [`write_atomic`] with the contents produced by `fill`.
pub fn write_atomic_with<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn std::io::Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    let mut w = std::io::BufWriter::new(tmp);
    fill(&mut w)?;
    let tmp = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
