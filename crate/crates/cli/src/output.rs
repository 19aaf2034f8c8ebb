//! CSV rows and the JSON sidecar.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use qbypass::metrics::FIT_ETA_MIN;

use crate::config::SweepConfig;
use crate::fit::{fit_rows, FitEntry};
use crate::sweep::{Failure, Row, SweepResult};
use crate::HarnessError;

pub const CSV_HEADER: [&str; 12] = [
    "experiment",
    "protocol",
    "alpha",
    "eta",
    "p",
    "metric",
    "value",
    "success_prob",
    "status",
    "runtime_ms",
    "version",
    "config_hash",
];

/// `x` rounded to 12 significant digits, printed in its shortest form.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-5..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// Serialize rows. Runtimes are wall-clock and vary between runs, so they
/// are left blank unless `record_runtime` is set; the CSV is then
/// byte-identical across reruns.
pub fn csv_bytes(rows: &[Row], record_runtime: bool) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let runtime = if record_runtime { opt(r.runtime_ms) } else { String::new() };
        w.write_record([
            r.experiment.clone(),
            r.protocol.clone(),
            fmt_sig(r.alpha),
            fmt_sig(r.eta),
            fmt_sig(r.p),
            r.metric.clone(),
            opt(r.value),
            opt(r.success_prob),
            r.status.clone(),
            runtime,
            r.version.clone(),
            r.config_hash.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub version: &'a str,
    pub config_hash: &'a str,
    pub experiment: &'a str,
    pub config: &'a SweepConfig,
    pub rows: usize,
    pub failed_rows: usize,
    pub failures: &'a [Failure],
    pub fit_window: [f64; 2],
    pub fits: Vec<FitEntry>,
    pub runtime_ms: f64,
}

pub fn sidecar(result: &SweepResult) -> Sidecar<'_> {
    Sidecar {
        version: &result.version,
        config_hash: &result.config_hash,
        experiment: result.config.experiment.id(),
        config: &result.config,
        rows: result.rows.len(),
        failed_rows: result.rows.iter().filter(|r| !r.ok()).count(),
        failures: &result.failures,
        fit_window: [FIT_ETA_MIN, 1.0],
        fits: fit_rows(&result.rows),
        runtime_ms: result.runtime_ms,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write `<output>` and its `.json` sidecar under `out_dir`.
pub fn write_outputs(result: &SweepResult, out_dir: &Path, record_runtime: bool) -> Result<(PathBuf, PathBuf), HarnessError> {
    let csv_path = out_dir.join(&result.config.output);
    let json_path = csv_path.with_extension("json");
    let csv = csv_bytes(&result.rows, record_runtime)?;
    let mut json = serde_json::to_vec_pretty(&sidecar(result))?;
    json.push(b'\n');
    write_atomic(&csv_path, &csv)?;
    write_atomic(&json_path, &json)?;
    Ok((csv_path, json_path))
}
