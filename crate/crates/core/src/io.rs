//! Persistence: CSV runs, dataset manifests and the model container.
//!
//! Runs are CSV files with a `t,<channel...>` header and one row per sample.
//! Values are written in their shortest round-trip decimal form, so a
//! write/read cycle is exact. Labels and the channel schema live in a JSON
//! manifest next to the runs.
//!
//! Model container layout (little endian):
//!
//! ```text
//! magic "RECONAD\0" | version u32 | header_len u64 | header JSON
//! | n_params u64 | n_params × f32 | sha256 of everything before it
//! ```
//!
//! All files are written to a temporary sibling and renamed into place.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::ThresholdProfile;
use crate::models::{ArchitectureSpec, Autoencoder, ModelBundle, TrainingMeta};
use crate::nn::Parameterized;
use crate::preprocessing::{Channel, FailureLabel, FailureTag, NormStats, TimeSeries};
use crate::synth::Corpus;
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"RECONAD\0";
const DIGEST_LEN: usize = 32;

/// Writes through a temporary file in the same directory, then renames it
/// over `path`.
pub fn atomic_write<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_run(series: &TimeSeries, path: &Path) -> Result<()> {
    let n = series.n_channels();
    atomic_write(path, |w| {
        write!(w, "t")?;
        for name in series.channel_names() {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for i in 0..series.len() {
            write!(w, "{}", i as f64 / series.sample_rate())?;
            for v in &series.data()[i * n..(i + 1) * n] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

fn parse_err(path: &Path, line: u64, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

struct RawRun {
    header: Vec<String>,
    times: Vec<f64>,
    data: Vec<f64>,
}

fn read_raw(path: &Path) -> Result<RawRun> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
        return Err(parse_err(path, 1, "header must be 't' followed by at least one channel name"));
    }
    let width = header.len();
    let mut times = Vec::new();
    let mut data = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("column '{}': '{cell}' is not a number", header[j])))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("column '{}': non-finite value '{cell}'", header[j])));
            }
            if j == 0 {
                times.push(v);
            } else {
                data.push(v);
            }
        }
    }
    if times.is_empty() {
        return Err(parse_err(path, 2, "run has no samples"));
    }
    Ok(RawRun { header, times, data })
}

/// Reads a run whose schema and rate are given by a manifest. Columns are
/// reordered to `channels`; a missing column is a parse error naming it.
pub fn read_run_with_schema(path: &Path, sample_rate: f64, channels: &[Channel]) -> Result<TimeSeries> {
    let raw = read_raw(path)?;
    let names = &raw.header[1..];
    let mut cols = Vec::with_capacity(channels.len());
    for ch in channels {
        let idx = names
            .iter()
            .position(|n| *n == ch.name)
            .ok_or_else(|| parse_err(path, 1, format!("missing column '{}'", ch.name)))?;
        cols.push(idx);
    }
    let width = names.len();
    let rows = raw.times.len();
    let mut data = Vec::with_capacity(rows * channels.len());
    for r in 0..rows {
        let row = &raw.data[r * width..(r + 1) * width];
        data.extend(cols.iter().map(|&c| row[c]));
    }
    TimeSeries::new(sample_rate, channels.to_vec(), data, Vec::new()).map_err(|e| parse_err(path, 1, e.to_string()))
}

/// Reads a run on its own: channels default to kind `other` and the sample
/// rate is inferred from the `t` column.
pub fn read_run(path: &Path) -> Result<TimeSeries> {
    let raw = read_raw(path)?;
    if raw.times.len() < 2 {
        return Err(parse_err(path, 2, "cannot infer a sample rate from fewer than two rows"));
    }
    let span = raw.times[raw.times.len() - 1] - raw.times[0];
    if !(span > 0.0) {
        return Err(parse_err(path, 2, "time column must increase"));
    }
    let rate = ((raw.times.len() - 1) as f64 / span * 1e6).round() / 1e6;
    let channels: Vec<Channel> = raw.header[1..]
        .iter()
        .map(|n| Channel::new(n.clone(), crate::preprocessing::ChannelKind::Other, ""))
        .collect();
    TimeSeries::new(rate, channels, raw.data, Vec::new()).map_err(|e| parse_err(path, 1, e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Nominal,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub name: String,
    /// Path relative to the manifest.
    pub file: String,
    pub kind: RunKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<FailureTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub sample_rate: f64,
    pub channels: Vec<Channel>,
    pub runs: Vec<RunEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    atomic_write(path, |w| writeln!(w, "{text}"))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    if m.version != MANIFEST_VERSION {
        return Err(parse_err(
            path,
            1,
            format!("manifest version {} is not supported (expected {MANIFEST_VERSION})", m.version),
        ));
    }
    Ok(m)
}

/// Writes every run of a corpus plus its manifest into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut runs = Vec::new();
    for (kind, set) in [(RunKind::Nominal, &corpus.nominal), (RunKind::Failure, &corpus.failures)] {
        for r in set {
            let file = format!("{}.csv", r.name);
            write_run(&r.series, &dir.join(&file))?;
            let label = r.series.labels().first();
            runs.push(RunEntry {
                name: r.name.clone(),
                file,
                kind,
                seed: Some(r.seed),
                onset: label.map(|l| l.onset),
                end: label.and_then(|l| l.end),
                tag: label.map(|l| l.tag),
                class: label.map(|l| l.class.clone()),
            });
        }
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        profile: Some(corpus.profile.name.clone()),
        seed: Some(corpus.seed),
        sample_rate: corpus.profile.sample_rate,
        channels: crate::synth::TaskProfile::channels(),
        runs,
    };
    write_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub entry: RunEntry,
    pub series: TimeSeries,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub root: PathBuf,
    pub nominal: Vec<LoadedRun>,
    pub failures: Vec<LoadedRun>,
    /// sha256 over the manifest and every run file.
    pub digest: String,
}

/// Loads a manifest (or a directory containing one) and all its runs.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let manifest = read_manifest(&manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut hasher = Sha256::new();
    hasher.update(fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?);
    let mut nominal = Vec::new();
    let mut failures = Vec::new();
    for entry in &manifest.runs {
        let file = root.join(&entry.file);
        if !file.exists() {
            return Err(parse_err(&manifest_path, 1, format!("run file {} does not exist", file.display())));
        }
        hasher.update(fs::read(&file).map_err(|e| Error::io(&file, e))?);
        let mut series = read_run_with_schema(&file, manifest.sample_rate, &manifest.channels)?;
        if let (Some(onset), Some(tag)) = (entry.onset, entry.tag) {
            let label = FailureLabel {
                onset,
                end: entry.end,
                tag,
                class: entry.class.clone().unwrap_or_else(|| tag.as_str().to_string()),
            };
            series = series
                .with_labels(vec![label])
                .map_err(|e| parse_err(&manifest_path, 1, format!("run '{}': {e}", entry.name)))?;
        }
        let run = LoadedRun {
            entry: entry.clone(),
            series,
        };
        match entry.kind {
            RunKind::Nominal => nominal.push(run),
            RunKind::Failure => failures.push(run),
        }
    }
    Ok(Dataset {
        manifest,
        root,
        nominal,
        failures,
        digest: hex(&hasher.finalize()),
    })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// sha256 of arbitrary bytes as lowercase hex.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// A trained model plus its thresholds once calibrated.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelArtifact {
    pub bundle: ModelBundle,
    pub profile: Option<ThresholdProfile>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ArchitectureSpec,
    channels: Vec<Channel>,
    norm: NormStats,
    meta: TrainingMeta,
    profile: Option<ThresholdProfile>,
    tensor_lens: Vec<usize>,
}

pub fn encode_model(artifact: &ModelArtifact) -> Vec<u8> {
    encode_with_version(artifact, MODEL_FORMAT_VERSION)
}

fn encode_with_version(artifact: &ModelArtifact, version: u32) -> Vec<u8> {
    let b = &artifact.bundle;
    let params = b.model.parameters();
    let header = Header {
        spec: b.spec().clone(),
        channels: b.channels.clone(),
        norm: b.norm.clone(),
        meta: b.meta.clone(),
        profile: artifact.profile.clone(),
        tensor_lens: params.iter().map(|p| p.len()).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let n: usize = params.iter().map(|p| p.len()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 20 + json.len() + 4 * n + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for p in params {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Integrity("model file is truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelArtifact> {
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(Error::Integrity("model file is truncated".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Integrity("not a model file (bad magic bytes)".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("checksum mismatch; the model file is corrupt".into()));
    }
    let mut cur = Cursor { bytes: body, at: MAGIC.len() };
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::IncompatibleVersion {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let header_len = cur.u64()? as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)
        .map_err(|e| Error::Integrity(format!("model header: {e}")))?;
    let n = cur.u64()? as usize;
    let raw = cur.take(n.checked_mul(4).ok_or_else(|| Error::Integrity("parameter count overflows".into()))?)?;
    if cur.at != body.len() {
        return Err(Error::Integrity("trailing bytes after parameters".into()));
    }
    let mut model = Autoencoder::<f32>::build(&header.spec, 0).map_err(|e| Error::Integrity(e.to_string()))?;
    let lens: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    if lens != header.tensor_lens || lens.iter().sum::<usize>() != n {
        return Err(Error::Integrity("parameter layout does not match the architecture".into()));
    }
    let mut values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    for buf in model.parameters_mut() {
        for v in buf.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    if model.parameters().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Integrity("model parameters are not finite".into()));
    }
    let bundle = ModelBundle::new(model, header.channels, header.norm, header.meta)
        .map_err(|e| Error::Integrity(e.to_string()))?;
    if let Some(p) = &header.profile {
        p.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    }
    Ok(ModelArtifact {
        bundle,
        profile: header.profile,
    })
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    let bytes = encode_model(artifact);
    atomic_write(path, |w| w.write_all(&bytes))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
