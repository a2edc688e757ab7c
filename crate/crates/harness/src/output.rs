//! CSV and JSON artifacts.
//!
//! Numbers are written with Rust's shortest round-trip formatting, and absent
//! values as empty fields, so reruns with the same config produce identical
//! files apart from the wall-time columns.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{Failure, Outcome, StepRecord};

pub type CsvWriter = csv::Writer<BufWriter<File>>;

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))
}

pub fn csv_writer(path: &Path, header: &[String]) -> Result<CsvWriter> {
    let file = File::create(path).map_err(|e| HarnessError::io(format!("creating {}", path.display()), e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header)?;
    Ok(w)
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Per-step rows of `trajectory.csv`, `sigma_1..sigma_{width}` padded with blanks.
pub struct TrajectoryCsv {
    writer: CsvWriter,
    width: usize,
}

impl TrajectoryCsv {
    pub fn header(width: usize) -> Vec<String> {
        let mut h: Vec<String> = ["t", "r", "epsilon"].iter().map(|s| s.to_string()).collect();
        h.extend((1..=width).map(|i| format!("sigma_{i}")));
        h.extend(["eta_p", "eta_s", "error", "step_wall_ms"].iter().map(|s| s.to_string()));
        h
    }

    pub fn create(path: &Path, width: usize) -> Result<Self> {
        Ok(Self { writer: csv_writer(path, &Self::header(width))?, width })
    }

    pub fn write(&mut self, rec: &StepRecord, error: Option<f64>) -> Result<()> {
        let mut row = vec![num(rec.t), rec.r.to_string(), opt(rec.epsilon)];
        row.extend((0..self.width).map(|i| rec.sigma.get(i).copied().map(num).unwrap_or_default()));
        row.extend([opt(rec.eta_p), opt(rec.eta_s), opt(error), num(rec.wall.as_secs_f64() * 1e3)]);
        self.writer.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| HarnessError::io("flushing trajectory", e))
    }
}

/// SHA-256 of the resolved config in canonical TOML form.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = toml::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn failure_json(f: &Option<Failure>) -> Value {
    match f {
        None => Value::Null,
        Some(f) => json!({ "message": f.message, "divergence": f.divergence, "t": f.t }),
    }
}

pub fn outcome_json(o: &Outcome) -> Value {
    json!({
        "status": if o.ok() { "ok" } else { "failed" },
        "failure": failure_json(&o.failure),
        "steps": o.steps,
        "steps_planned": o.steps_planned,
        "t_reached": o.t,
        "final_error": o.final_error,
        "final_rank": o.final_rank,
        "max_rank": o.max_rank,
        "wall_seconds": o.wall.as_secs_f64(),
    })
}

/// Writes `summary.json` with the command's fields plus the config, its hash and the code version.
pub fn write_summary(dir: &Path, command: &str, cfg: &ExperimentConfig, body: Value) -> Result<PathBuf> {
    let mut summary = json!({
        "command": command,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(cfg),
        "config": serde_json::to_value(cfg)?,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut summary, body) {
        dst.extend(src);
    }
    let path = dir.join("summary.json");
    let file = File::create(&path).map_err(|e| HarnessError::io(format!("creating {}", path.display()), e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &summary)?;
    Ok(path)
}
