//! Snapshot files and the diagnostics CSV.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{DiagnosticsRow, RunObserver};
use crate::params::ModelParams;
use crate::spectral::{ComplexField, GridSpec};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// JSON header stored next to the raw `.bin` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub schema_version: u32,
    pub d: usize,
    pub s: f64,
    pub alpha: f64,
    pub omega: f64,
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub t: f64,
}

impl SnapshotHeader {
    pub fn new(p: &ModelParams, grid: &GridSpec, t: f64) -> Self {
        Self {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            d: p.dim,
            s: p.s,
            alpha: p.alpha,
            omega: p.omega,
            half_length: grid.half_length,
            points: grid.points,
            t,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.half_length, self.points)
    }
}

/// Writes `<dir>/<name>.json` and `<dir>/<name>.bin`; returns the header path.
pub fn write_snapshot(dir: &Path, name: &str, field: &ComplexField, p: &ModelParams, t: f64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let header = SnapshotHeader::new(p, &field.grid, t);
    let json_path = dir.join(format!("{name}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&header)? + "\n")?;
    let mut bytes = Vec::with_capacity(16 * field.len());
    for z in &field.values {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    std::fs::write(dir.join(format!("{name}.bin")), bytes)?;
    Ok(json_path)
}

/// Reads a snapshot given the path of its `.json` header.
pub fn read_snapshot(json_path: &Path) -> Result<(SnapshotHeader, ComplexField)> {
    let header: SnapshotHeader = serde_json::from_str(&std::fs::read_to_string(json_path)?)?;
    if header.schema_version != SNAPSHOT_SCHEMA_VERSION {
        return Err(Error::Configuration(format!("unsupported snapshot schema version {}", header.schema_version)));
    }
    let grid = header.grid()?;
    let mut bytes = Vec::new();
    File::open(json_path.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::SizeMismatch { expected: 16 * grid.len(), found: bytes.len() });
    }
    let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let values = bytes.chunks_exact(16).map(|c| Complex64::new(word(&c[..8]), word(&c[8..]))).collect();
    Ok((header, ComplexField::from_values(grid, values)?))
}

/// Exact header of the diagnostics CSV.
pub const CSV_HEADER: &str = DiagnosticsRow::HEADER;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Streams diagnostics rows to a CSV file and snapshots to a directory.
pub struct CsvRecorder {
    out: BufWriter<File>,
    snapshot_dir: Option<PathBuf>,
    params: ModelParams,
    last_t: f64,
    pub rows: Vec<DiagnosticsRow>,
}

impl CsvRecorder {
    pub fn create(path: &Path, params: &ModelParams, snapshot_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out, snapshot_dir, params: *params, last_t: f64::NEG_INFINITY, rows: Vec::new() })
    }

    pub fn finish(mut self) -> Result<Vec<DiagnosticsRow>> {
        self.out.flush()?;
        Ok(self.rows)
    }
}

impl RunObserver for CsvRecorder {
    fn on_row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        if row.t <= self.last_t {
            return Err(Error::Precondition(format!("diagnostics time {} does not advance past {}", row.t, self.last_t)));
        }
        self.last_t = row.t;
        let line: Vec<String> = row.values().iter().map(|v| format_value(*v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        self.rows.push(*row);
        Ok(())
    }

    fn on_snapshot(&mut self, step: usize, t: f64, u: &ComplexField) -> Result<()> {
        if let Some(dir) = &self.snapshot_dir {
            write_snapshot(dir, &format!("step_{step:09}"), u, &self.params, t)?;
        }
        Ok(())
    }
}

/// Parses a diagnostics CSV back into rows.
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Configuration(format!("{}: unexpected CSV header", path.display())));
    }
    lines
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.parse().map_err(|_| Error::Configuration(format!("bad CSV value `{x}`"))))
                .collect::<Result<_>>()?;
            DiagnosticsRow::from_values(&v)
        })
        .collect()
}
