//! File formats: the triad-table disk cache, path serialization, and the
//! small CSV/JSON writers shared by the experiment runners.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use sgns_core::noise::{PathSample, SeedRecord};
use sgns_core::{Backend, SpectralField, TriadTable};

use crate::error::CliError;

const TRIAD_MAGIC: &str = "sgns-triads v1";

/// Serializes a triad table: a text header (backend, n, count, payload
/// hash) followed by binary little-endian triples (i, j, l, coefficient)
/// sorted by (l, i, j).
pub fn write_triad_cache(path: &Path, table: &TriadTable, backend: Backend) -> Result<(), CliError> {
    let mut entries: Vec<_> = table.canonical_entries().to_vec();
    entries.sort_by_key(|&(i, j, l, _)| (l, i, j));
    let mut payload = Vec::with_capacity(entries.len() * 20);
    for &(i, j, l, v) in &entries {
        payload.extend_from_slice(&i.to_le_bytes());
        payload.extend_from_slice(&j.to_le_bytes());
        payload.extend_from_slice(&l.to_le_bytes());
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let hash = hex::encode(Sha256::digest(&payload));
    let mut out = Vec::new();
    writeln!(out, "{TRIAD_MAGIC}")?;
    writeln!(out, "backend={}", backend.as_str())?;
    writeln!(out, "n={}", table.truncation())?;
    writeln!(out, "count={}", entries.len())?;
    writeln!(out, "hash={hash}")?;
    writeln!(out)?;
    out.extend_from_slice(&payload);
    fs::write(path, out)?;
    Ok(())
}

/// Reads a cached triad table, verifying the payload hash and the
/// structural invariants of the entries.
pub fn read_triad_cache(path: &Path) -> Result<(TriadTable, Backend), CliError> {
    let bytes = fs::read(path)?;
    let header_end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| CliError::Config(format!("{}: missing cache header", path.display())))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| CliError::Config(format!("{}: malformed cache header", path.display())))?;
    let mut lines = header.lines();
    if lines.next() != Some(TRIAD_MAGIC) {
        return Err(CliError::Config(format!(
            "{}: not a triad cache file",
            path.display()
        )));
    }
    let mut backend = None;
    let mut n = None;
    let mut count = None;
    let mut hash = None;
    for line in lines {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}: bad header line {line:?}", path.display())))?;
        match key {
            "backend" => backend = Some(Backend::parse(value).map_err(cfg_err)?),
            "n" => n = Some(value.parse::<usize>().map_err(|e| CliError::Config(e.to_string()))?),
            "count" => count = Some(value.parse::<usize>().map_err(|e| CliError::Config(e.to_string()))?),
            "hash" => hash = Some(value.to_string()),
            other => return Err(CliError::Config(format!("unknown cache header key {other:?}"))),
        }
    }
    let (backend, n, count, hash) = match (backend, n, count, hash) {
        (Some(b), Some(n), Some(c), Some(h)) => (b, n, c, h),
        _ => return Err(CliError::Config(format!("{}: incomplete header", path.display()))),
    };
    let payload = &bytes[header_end + 2..];
    if payload.len() != count * 20 {
        return Err(CliError::Config(format!(
            "{}: payload length {} does not match count {count}",
            path.display(),
            payload.len()
        )));
    }
    if hex::encode(Sha256::digest(payload)) != hash {
        return Err(CliError::Config(format!(
            "{}: payload hash mismatch",
            path.display()
        )));
    }
    let mut entries = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(20) {
        let i = u32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let j = u32::from_le_bytes(chunk[4..8].try_into().unwrap());
        let l = u32::from_le_bytes(chunk[8..12].try_into().unwrap());
        let v = f64::from_le_bytes(chunk[12..20].try_into().unwrap());
        entries.push((i, j, l, v));
    }
    entries.sort_by_key(|&(i, j, l, _)| (i, j, l));
    let table = TriadTable::from_canonical(n, entries).map_err(cfg_err)?;
    Ok((table, backend))
}

fn cfg_err(e: sgns_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Shortest round-trip decimal rendering of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a path as CSV: header `time,c1,...,cn`, one row per grid node.
pub fn write_path_csv(path: &Path, sample: &PathSample) -> Result<(), CliError> {
    let n = sample.truncation();
    let mut out = String::new();
    out.push_str("time");
    for k in 1..=n {
        out.push_str(&format!(",c{k}"));
    }
    out.push('\n');
    for (t, f) in sample.times().iter().zip(sample.fields()) {
        out.push_str(&fmt_f64(*t));
        for &c in f.coeffs() {
            out.push(',');
            out.push_str(&fmt_f64(c));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// JSON sidecar describing the provenance of a serialized path.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct PathSidecar {
    pub seed: Option<(u64, u64)>,
    pub coloring: String,
    pub spectrum: String,
}

pub fn write_path_sidecar(path: &Path, sidecar: &PathSidecar) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Reads a path back from its CSV form.
pub fn read_path_csv(path: &Path, seed: Option<SeedRecord>) -> Result<PathSample, CliError> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty path file", path.display())))?;
    if !header.starts_with("time,") {
        return Err(CliError::Config(format!("{}: bad path header", path.display())));
    }
    let mut times = Vec::new();
    let mut fields = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        let t: f64 = cells
            .next()
            .ok_or_else(|| CliError::Config("short row".into()))?
            .parse()
            .map_err(|e: std::num::ParseFloatError| CliError::Config(e.to_string()))?;
        let coeffs: Result<Vec<f64>, _> = cells.map(str::parse).collect();
        let coeffs = coeffs.map_err(|e: std::num::ParseFloatError| CliError::Config(e.to_string()))?;
        times.push(t);
        fields.push(SpectralField::new(coeffs).map_err(cfg_err)?);
    }
    PathSample::new(times, fields, seed).map_err(cfg_err)
}

/// Minimal CSV table writer for experiment artifacts.
pub struct CsvWriter {
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        CsvWriter {
            buf: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn row_f64(&mut self, cells: &[f64]) {
        let rendered: Vec<String> = cells.iter().map(|&v| fmt_f64(v)).collect();
        self.row(&rendered);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, &self.buf)?;
        Ok(())
    }
}
