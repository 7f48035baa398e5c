//! File formats: IQ sample recordings, feature CSVs, dataset manifests,
//! model files and accuracy reports.
//!
//! IQ layout (little-endian): magic "RFIQ", u16 version, f64 sample rate,
//! u32 frame count; per frame u32 device_id, u32 frame_id, f32 snr_db
//! (NaN payload 0x7FC00000 when unknown), u8 role, u32 sample_count,
//! then interleaved f32 I,Q pairs. All writers go through a temp file and
//! an atomic rename.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};

use crate::antinoise::{EnergyFit, FitMode, PopulationFit};
use crate::classify::{KnnConfig, RskModel, SnrAccuracy};
use crate::features::FeatureVector;
use crate::{Error, Result};

pub const IQ_MAGIC: &[u8; 4] = b"RFIQ";
pub const IQ_VERSION: u16 = 1;
pub const MODEL_VERSION: u16 = 1;
pub const MANIFEST_VERSION: u16 = 1;
/// Quiet-NaN payload written for unknown SNR.
const SNR_NAN_BITS: u32 = 0x7FC0_0000;

/// Role of a frame in the experiment protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Clean = 0,
    Train = 1,
    Test = 2,
}

impl Role {
    pub fn from_u8(v: u8) -> Option<Role> {
        match v {
            0 => Some(Role::Clean),
            1 => Some(Role::Train),
            2 => Some(Role::Test),
            _ => None,
        }
    }
}

/// One recorded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct IqRecord {
    pub device_id: u32,
    pub frame_id: u32,
    /// None when noiseless/unknown; stored as a NaN payload.
    pub snr_db: Option<f32>,
    pub role: Role,
    pub samples: Vec<Complex64>,
}

/// Everything needed to regenerate a dataset byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub master_seed: u64,
    pub n_devices: usize,
    pub n_frames_per_device: usize,
    pub n_symbols: usize,
    pub samples_per_chip: usize,
    pub chips_per_symbol: usize,
    pub sample_rate_hz: f64,
    pub spread: f64,
    pub instability_fraction: f64,
    pub snr_grid_db: Vec<f64>,
}

impl DatasetManifest {
    pub fn symbol_len(&self) -> usize {
        self.samples_per_chip * self.chips_per_symbol
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------
// IQ recordings
// ---------------------------------------------------------------------

pub fn write_iq(path: &Path, sample_rate_hz: f64, records: &[IqRecord]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(IQ_MAGIC);
    buf.extend_from_slice(&IQ_VERSION.to_le_bytes());
    buf.extend_from_slice(&sample_rate_hz.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for rec in records {
        buf.extend_from_slice(&rec.device_id.to_le_bytes());
        buf.extend_from_slice(&rec.frame_id.to_le_bytes());
        let snr_bits = match rec.snr_db {
            Some(v) => v.to_bits(),
            None => SNR_NAN_BITS,
        };
        buf.extend_from_slice(&snr_bits.to_le_bytes());
        buf.push(rec.role as u8);
        buf.extend_from_slice(&(rec.samples.len() as u32).to_le_bytes());
        for s in &rec.samples {
            buf.extend_from_slice(&(s.re as f32).to_le_bytes());
            buf.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
    }
    atomic_write(path, &buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    offset: usize,
    path: String,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.offset + n > self.data.len() {
            return Err(Error::Malformed {
                path: self.path.clone(),
                offset: self.offset as u64,
                message: format!("truncated while reading {what}"),
            });
        }
        let out = &self.data[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn read_iq(path: &Path) -> Result<(f64, Vec<IqRecord>)> {
    let data = fs::read(path)?;
    let mut cur = Cursor {
        data: &data,
        offset: 0,
        path: path.display().to_string(),
    };

    let magic = cur.take(4, "magic")?;
    if magic != IQ_MAGIC {
        return Err(Error::Malformed {
            path: cur.path,
            offset: 0,
            message: "bad magic, expected RFIQ".into(),
        });
    }
    let version = cur.u16("version")?;
    if version != IQ_VERSION {
        return Err(Error::VersionMismatch {
            expected: IQ_VERSION,
            found: version,
        });
    }
    let sample_rate = cur.f64("sample_rate")?;
    let frame_count = cur.u32("frame_count")? as usize;

    let mut records = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let device_id = cur.u32("device_id")?;
        let frame_id = cur.u32("frame_id")?;
        let snr_bits = cur.u32("snr_db")?;
        let snr = f32::from_bits(snr_bits);
        let snr_db = if snr.is_nan() { None } else { Some(snr) };
        let role_byte = cur.u8("role")?;
        let role = Role::from_u8(role_byte).ok_or_else(|| Error::Malformed {
            path: cur.path.clone(),
            offset: (cur.offset - 1) as u64,
            message: format!("invalid role byte {role_byte}"),
        })?;
        let n = cur.u32("sample_count")? as usize;
        let raw = cur.take(8 * n, "samples")?;
        let samples = raw
            .chunks_exact(8)
            .map(|c| {
                let i = f32::from_le_bytes(c[0..4].try_into().unwrap());
                let q = f32::from_le_bytes(c[4..8].try_into().unwrap());
                Complex64::new(i as f64, q as f64)
            })
            .collect();
        records.push(IqRecord {
            device_id,
            frame_id,
            snr_db,
            role,
            samples,
        });
    }
    if cur.offset != data.len() {
        return Err(Error::Malformed {
            path: cur.path,
            offset: cur.offset as u64,
            message: "trailing bytes after last frame".into(),
        });
    }
    Ok((sample_rate, records))
}

// ---------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Other(format!("manifest serialization: {e}")))?;
    atomic_write(path, json.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let data = fs::read_to_string(path)?;
    let manifest: DatasetManifest = serde_json::from_str(&data).map_err(|e| Error::Malformed {
        path: path.display().to_string(),
        offset: e.column() as u64,
        message: e.to_string(),
    })?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::VersionMismatch {
            expected: MANIFEST_VERSION,
            found: manifest.format_version,
        });
    }
    Ok(manifest)
}

// ---------------------------------------------------------------------
// Feature CSV
// ---------------------------------------------------------------------

/// Decimal float with 9 significant digits.
fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{:.8e}", v)
    }
}

/// Write rows sorted by (device_id, frame_id); one row per feature vector.
pub fn write_features_csv(path: &Path, rows: &[FeatureVector]) -> Result<()> {
    let dim = rows.first().map(|r| r.values.len()).unwrap_or(0);
    if rows.iter().any(|r| r.values.len() != dim) {
        return Err(Error::InvalidArgument(
            "inconsistent feature dimensions in CSV rows".into(),
        ));
    }
    let mut sorted: Vec<&FeatureVector> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.device_id, r.frame_id, (r.snr_db * 100.0) as i64));

    let mut out = String::new();
    out.push_str("device_id,frame_id,snr_db,normalized");
    for k in 0..dim {
        out.push_str(&format!(",f{k}"));
    }
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{}",
            r.device_id,
            r.frame_id,
            fmt_g9(r.snr_db),
            u8::from(r.normalized)
        ));
        for v in &r.values {
            out.push(',');
            out.push_str(&fmt_g9(*v));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let data = fs::read_to_string(path)?;
    let mut lines = data.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Malformed {
        path: path.display().to_string(),
        offset: 0,
        message: "empty feature CSV".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..4] != ["device_id", "frame_id", "snr_db", "normalized"] {
        return Err(Error::Malformed {
            path: path.display().to_string(),
            offset: 0,
            message: "unexpected feature CSV header".into(),
        });
    }
    let dim = cols.len() - 4;

    let mut rows = Vec::new();
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + dim {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                offset: line_no as u64,
                message: format!("expected {} fields, got {}", 4 + dim, fields.len()),
            });
        }
        let bad = |message: String| Error::Malformed {
            path: path.display().to_string(),
            offset: line_no as u64,
            message,
        };
        let device_id: u32 = fields[0].parse().map_err(|e| bad(format!("device_id: {e}")))?;
        let frame_id: u32 = fields[1].parse().map_err(|e| bad(format!("frame_id: {e}")))?;
        let snr_db: f64 = if fields[2] == "NaN" {
            f64::NAN
        } else {
            fields[2].parse().map_err(|e| bad(format!("snr_db: {e}")))?
        };
        let normalized = match fields[3] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("normalized flag: {other}"))),
        };
        let values = fields[4..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("feature value: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(FeatureVector {
            values,
            device_id,
            frame_id,
            snr_db,
            normalized,
            compensated: false,
        });
    }
    Ok(rows)
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = BufReader::new(fs::File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

// ---------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------

fn fmt_fit(out: &mut String, section: &str, fit: &EnergyFit) {
    out.push_str(&format!("[{section}]\n"));
    out.push_str(&format!("a = {:.17e}\n", fit.a));
    out.push_str(&format!("b = {:.17e}\n", fit.b));
    out.push_str(&format!("c = {:.17e}\n", fit.c));
    out.push_str(&format!("rms_residual = {:.17e}\n", fit.rms_residual));
}

/// Write the trained model: fit coefficients, ensemble configuration,
/// subspace index lists, and a hashed reference to the training feature
/// CSV sitting next to the model file.
pub fn write_model(path: &Path, model: &RskModel, features_csv: &Path) -> Result<()> {
    let csv_name = features_csv
        .file_name()
        .ok_or_else(|| Error::InvalidArgument("features_csv has no file name".into()))?
        .to_string_lossy()
        .to_string();
    let hash = sha256_hex(features_csv)?;

    let mut out = String::new();
    out.push_str(&format!("format_version = {MODEL_VERSION}\n"));
    out.push_str("[rsknn]\n");
    out.push_str(&format!("k = {}\n", model.knn.k));
    out.push_str(&format!("n_learners = {}\n", model.learners.len()));
    out.push_str(&format!(
        "d_sub = {}\n",
        model.learners.first().map(|l| l.len()).unwrap_or(0)
    ));
    out.push_str(&format!("seed = {}\n", model.seed));
    out.push_str(&format!(
        "fit_mode = {}\n",
        match model.population_fit.mode {
            FitMode::Averaged => "averaged",
            FitMode::Pooled => "pooled",
        }
    ));
    fmt_fit(&mut out, "fit.averaged", &model.population_fit.averaged);
    fmt_fit(&mut out, "fit.pooled", &model.population_fit.pooled);
    for (device, fit) in &model.population_fit.per_device {
        fmt_fit(&mut out, &format!("fit.device.{device}"), fit);
    }
    for (i, subset) in model.learners.iter().enumerate() {
        out.push_str(&format!("[subspace.{i}]\n"));
        let list: Vec<String> = subset.iter().map(|x| x.to_string()).collect();
        out.push_str(&format!("indices = {}\n", list.join(",")));
    }
    out.push_str("[training]\n");
    out.push_str(&format!("features_csv = {csv_name}\n"));
    out.push_str(&format!("sha256 = {hash}\n"));

    atomic_write(path, out.as_bytes())
}

fn parse_kv(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Load a model file and its training feature sidecar, verifying the hash.
pub fn read_model(path: &Path) -> Result<RskModel> {
    let data = fs::read_to_string(path)?;
    let dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let bad = |line_no: usize, message: String| Error::Malformed {
        path: path.display().to_string(),
        offset: line_no as u64,
        message,
    };

    let mut section = String::new();
    let mut kv: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut subspace_ids: Vec<usize> = Vec::new();
    let mut device_ids: Vec<u32> = Vec::new();
    for (line_no, line) in data.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.to_string();
            if let Some(id) = name.strip_prefix("subspace.") {
                subspace_ids.push(
                    id.parse()
                        .map_err(|e| bad(line_no, format!("subspace id: {e}")))?,
                );
            } else if let Some(id) = name.strip_prefix("fit.device.") {
                device_ids.push(
                    id.parse()
                        .map_err(|e| bad(line_no, format!("device id: {e}")))?,
                );
            }
            continue;
        }
        let (k, v) = parse_kv(line).ok_or_else(|| bad(line_no, format!("expected key = value, got {line:?}")))?;
        kv.insert((section.clone(), k.to_string()), v.to_string());
    }

    let get = |section: &str, key: &str| -> Result<&String> {
        kv.get(&(section.to_string(), key.to_string()))
            .ok_or_else(|| Error::Malformed {
                path: path.display().to_string(),
                offset: 0,
                message: format!("missing [{section}] {key}"),
            })
    };
    let get_f64 = |section: &str, key: &str| -> Result<f64> {
        get(section, key)?
            .parse()
            .map_err(|e| Error::Malformed {
                path: path.display().to_string(),
                offset: 0,
                message: format!("[{section}] {key}: {e}"),
            })
    };

    let version: u16 = get("", "format_version")?.parse().map_err(|_| Error::Malformed {
        path: path.display().to_string(),
        offset: 0,
        message: "bad format_version".into(),
    })?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION,
            found: version,
        });
    }

    let read_fit = |section: &str| -> Result<EnergyFit> {
        Ok(EnergyFit {
            a: get_f64(section, "a")?,
            b: get_f64(section, "b")?,
            c: get_f64(section, "c")?,
            rms_residual: get_f64(section, "rms_residual")?,
        })
    };

    let mode = match get("rsknn", "fit_mode")?.as_str() {
        "averaged" => FitMode::Averaged,
        "pooled" => FitMode::Pooled,
        other => {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                offset: 0,
                message: format!("unknown fit_mode {other}"),
            })
        }
    };
    let mut per_device = BTreeMap::new();
    for d in device_ids {
        per_device.insert(d, read_fit(&format!("fit.device.{d}"))?);
    }
    let population_fit = PopulationFit {
        per_device,
        averaged: read_fit("fit.averaged")?,
        pooled: read_fit("fit.pooled")?,
        mode,
    };

    subspace_ids.sort_unstable();
    let mut learners = Vec::with_capacity(subspace_ids.len());
    for i in &subspace_ids {
        let raw = get(&format!("subspace.{i}"), "indices")?;
        let subset = raw
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|e| Error::Malformed {
                path: path.display().to_string(),
                offset: 0,
                message: format!("subspace {i} indices: {e}"),
            })?;
        learners.push(subset);
    }

    let csv_name = get("training", "features_csv")?;
    let expected_hash = get("training", "sha256")?;
    let csv_path = dir.join(csv_name);
    let actual_hash = sha256_hex(&csv_path)?;
    if &actual_hash != expected_hash {
        return Err(Error::HashMismatch {
            path: csv_path.display().to_string(),
        });
    }
    let rows = read_features_csv(&csv_path)?;
    let labels = rows.iter().map(|r| r.device_id).collect();
    let training_features = rows.into_iter().map(|r| r.values).collect();

    Ok(RskModel {
        training_features,
        labels,
        learners,
        knn: KnnConfig {
            k: get("rsknn", "k")?.parse().map_err(|_| Error::Malformed {
                path: path.display().to_string(),
                offset: 0,
                message: "bad k".into(),
            })?,
        },
        seed: get("rsknn", "seed")?.parse().map_err(|_| Error::Malformed {
            path: path.display().to_string(),
            offset: 0,
            message: "bad seed".into(),
        })?,
        population_fit,
    })
}

// ---------------------------------------------------------------------
// Energy-fit file
// ---------------------------------------------------------------------

/// Standalone energy-fit file: the Eq.-(15)-shaped (a_bar, b_bar, c_bar)
/// triple, the pooled alternative, and every per-device fit.
pub fn write_population_fit(path: &Path, fit: &PopulationFit) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("format_version = {MODEL_VERSION}\n"));
    out.push_str(&format!(
        "fit_mode = {}\n",
        match fit.mode {
            FitMode::Averaged => "averaged",
            FitMode::Pooled => "pooled",
        }
    ));
    out.push_str(&format!("a_bar = {:.17e}\n", fit.averaged.a));
    out.push_str(&format!("b_bar = {:.17e}\n", fit.averaged.b));
    out.push_str(&format!("c_bar = {:.17e}\n", fit.averaged.c));
    fmt_fit(&mut out, "fit.averaged", &fit.averaged);
    fmt_fit(&mut out, "fit.pooled", &fit.pooled);
    for (device, f) in &fit.per_device {
        fmt_fit(&mut out, &format!("fit.device.{device}"), f);
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_population_fit(path: &Path) -> Result<PopulationFit> {
    let data = fs::read_to_string(path)?;
    let bad = |message: String| Error::Malformed {
        path: path.display().to_string(),
        offset: 0,
        message,
    };

    let mut section = String::new();
    let mut kv: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut device_ids: Vec<u32> = Vec::new();
    for line in data.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.to_string();
            if let Some(id) = name.strip_prefix("fit.device.") {
                device_ids.push(id.parse().map_err(|e| bad(format!("device id: {e}")))?);
            }
            continue;
        }
        let (k, v) =
            parse_kv(line).ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
        kv.insert((section.clone(), k.to_string()), v.to_string());
    }

    let get_f64 = |section: &str, key: &str| -> Result<f64> {
        kv.get(&(section.to_string(), key.to_string()))
            .ok_or_else(|| bad(format!("missing [{section}] {key}")))?
            .parse()
            .map_err(|e| bad(format!("[{section}] {key}: {e}")))
    };
    let read_fit = |section: &str| -> Result<EnergyFit> {
        Ok(EnergyFit {
            a: get_f64(section, "a")?,
            b: get_f64(section, "b")?,
            c: get_f64(section, "c")?,
            rms_residual: get_f64(section, "rms_residual")?,
        })
    };

    let mode = match kv
        .get(&(String::new(), "fit_mode".to_string()))
        .ok_or_else(|| bad("missing fit_mode".into()))?
        .as_str()
    {
        "averaged" => FitMode::Averaged,
        "pooled" => FitMode::Pooled,
        other => return Err(bad(format!("unknown fit_mode {other}"))),
    };

    let mut per_device = BTreeMap::new();
    for d in device_ids {
        per_device.insert(d, read_fit(&format!("fit.device.{d}"))?);
    }
    Ok(PopulationFit {
        per_device,
        averaged: read_fit("fit.averaged")?,
        pooled: read_fit("fit.pooled")?,
        mode,
    })
}

// ---------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------

/// Aligned plain-text accuracy table for with/without compensation.
pub fn format_accuracy_table(
    with: Option<&[SnrAccuracy]>,
    without: Option<&[SnrAccuracy]>,
) -> String {
    let mut snrs: Vec<i64> = Vec::new();
    for rows in [with, without].into_iter().flatten() {
        for r in rows {
            let key = (r.snr_db * 100.0).round() as i64;
            if !snrs.contains(&key) {
                snrs.push(key);
            }
        }
    }
    snrs.sort_unstable();
    snrs.reverse();

    let lookup = |rows: Option<&[SnrAccuracy]>, key: i64| -> String {
        rows.and_then(|rows| {
            rows.iter()
                .find(|r| (r.snr_db * 100.0).round() as i64 == key)
        })
        .map(|r| format!("{:>7.2}%", 100.0 * r.accuracy()))
        .unwrap_or_else(|| "      - ".to_string())
    };

    let mut out = String::new();
    out.push_str("  SNR(dB)   w/o anti-noise   w/ anti-noise\n");
    for key in snrs {
        out.push_str(&format!(
            "  {:>7.1}   {:>14}   {:>13}\n",
            key as f64 / 100.0,
            lookup(without, key),
            lookup(with, key)
        ));
    }
    out
}

/// CSV twin of the accuracy table.
pub fn accuracy_csv(with: Option<&[SnrAccuracy]>, without: Option<&[SnrAccuracy]>) -> String {
    let mut out = String::from("snr_db,mode,total,correct,accuracy\n");
    for (mode, rows) in [("off", without), ("on", with)] {
        if let Some(rows) = rows {
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_g9(r.snr_db),
                    mode,
                    r.total,
                    r.correct,
                    fmt_g9(r.accuracy())
                ));
            }
        }
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    atomic_write(path, content.as_bytes())
}

/// Buffered writer variant for large streams.
pub fn create_buffered(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}
