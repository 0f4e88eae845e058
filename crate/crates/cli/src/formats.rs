//! On-disk formats: TOML input schemas, CSV/JSON output assembly, atomic
//! writes, and the run-record sidecar that makes every invocation
//! reproducible.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pswit_core::{CriterionSpec, PhasePoint, ScanAxis, ScanTable};

/// Full-precision float formatting (17 significant digits) used in every
/// CSV cell so datasets are bit-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads and parses a TOML input file, prefixing parse diagnostics (which
/// carry line/column information) with the file role and path.
pub fn load_toml<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("{what} file {}: cannot read", path.display()))?;
    toml::from_str(&text).with_context(|| format!("{what} file {}", path.display()))
}

/// Writes through a temporary sibling and renames, so readers never observe
/// a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    std::fs::write(&tmp, bytes)
        .with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move output into place at {}", path.display()))?;
    Ok(())
}

/// Sends bytes to the output file (atomically) or to standard output.
pub fn emit_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            std::io::stdout().write_all(bytes).context("cannot write to stdout")?;
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Input schemas
// ---------------------------------------------------------------------------

/// One matrix label: per-mode complex amplitudes (as `[re, im]`) and
/// per-mode widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointEntry {
    pub amplitudes: Vec<C64>,
    pub widths: Vec<f64>,
}

/// Point-list file for `eval`: the labels of the matrix plus an optional
/// positivity tolerance override.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointsFile {
    pub points: Vec<PointEntry>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

impl PointsFile {
    pub fn to_points(&self) -> Result<Vec<PhasePoint>> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                PhasePoint::new(p.amplitudes.clone(), p.widths.clone())
                    .with_context(|| format!("points entry {i}"))
            })
            .collect()
    }
}

/// Detector file for `simulate`. `cutoff` bounds the photon range the
/// response is validated for; it defaults to the state's own cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorFile {
    pub eta: f64,
    pub delta: f64,
    #[serde(default)]
    pub chi: f64,
    #[serde(default)]
    pub cutoff: Option<usize>,
}

/// Scheme file for `simulate`: beam-splitter amplitudes, LO list, shot
/// count, and base seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeFile {
    pub t: C64,
    pub r: C64,
    pub lo_amplitudes: Vec<C64>,
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
}

/// One scan axis: either an inclusive linear range (`lo`, `hi`, `n`) or an
/// explicit `values` list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisFile {
    pub name: String,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl AxisFile {
    pub fn to_axis(&self) -> Result<ScanAxis> {
        match (&self.values, self.lo, self.hi, self.n) {
            (Some(values), None, None, None) => Ok(ScanAxis {
                name: self.name.clone(),
                values: values.clone(),
            }),
            (None, Some(lo), Some(hi), Some(n)) => {
                Ok(ScanAxis::linspace(self.name.clone(), lo, hi, n)?)
            }
            _ => bail!(
                "axis `{}` must give either `values` or all of `lo`, `hi`, `n`",
                self.name
            ),
        }
    }
}

/// Scan file for `scan`: the criterion, fixed parameters, and one or two
/// axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanFile {
    pub criterion: CriterionSpec,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub axes: Vec<AxisFile>,
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

/// Renders a scan table as CSV: one column per axis, then `value` and
/// `error` (exactly one of the two is filled per row).
pub fn scan_table_csv(table: &ScanTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = table.axes.iter().map(|a| a.name.clone()).collect();
    header.push("value".into());
    header.push("error".into());
    w.write_record(&header)?;
    for cell in &table.cells {
        let mut row: Vec<String> = cell.coords.iter().map(|&v| fmt_f64(v)).collect();
        row.push(cell.value.map(fmt_f64).unwrap_or_default());
        row.push(cell.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

/// Sidecar describing one invocation; written next to `--out` files as
/// `<out>.run.json`. Re-running the recorded command with the recorded
/// seed reproduces the output file byte for byte (the sidecar itself
/// carries the timestamp and is not part of that guarantee).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub seed: Option<u64>,
    pub state_spec: Option<serde_json::Value>,
    pub parameters: serde_json::Value,
    pub outputs: String,
}

impl RunRecord {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        state_spec: Option<serde_json::Value>,
        parameters: serde_json::Value,
        out: &Path,
    ) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunRecord {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix,
            seed,
            state_spec,
            parameters,
            outputs: out.display().to_string(),
        }
    }

    /// Writes the sidecar next to the output file.
    pub fn write_beside(&self, out: &Path) -> Result<()> {
        let mut name = out.as_os_str().to_owned();
        name.push(".run.json");
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&PathBuf::from(name), &bytes)
    }
}

/// Serializes a record as pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
