//! CSV and manifest writers.
//!
//! Reals are written with Rust's shortest round-trip formatting so reruns
//! produce byte-identical files.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use masgrad::chain::TrajectoryEnsemble;
use masgrad::diagnostics::{Band, DistanceReport, LogErrorSeries};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub fn real(x: f64) -> String {
    format!("{x:?}")
}

/// A CSV writer that records the files it creates.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> anyhow::Result<csv::Writer<File>> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        Ok(w)
    }
}

pub fn write_trajectories(out: &mut OutputDir, ensembles: &[TrajectoryEnsemble]) -> anyhow::Result<()> {
    let mut w = out.csv("trajectories.csv", &["method", "chain", "step", "coord", "value"])?;
    for e in ensembles {
        for c in 0..e.chains() {
            for t in 0..e.steps() {
                for j in 0..e.dim() {
                    w.write_record([
                        e.method.clone(),
                        c.to_string(),
                        t.to_string(),
                        j.to_string(),
                        real(e.get(c, t, j)),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(out: &mut OutputDir, summaries: &[(String, Vec<Vec<Band>>)]) -> anyhow::Result<()> {
    let mut w = out.csv("summary.csv", &["method", "step", "coord", "mean", "lo95", "hi95"])?;
    for (method, rows) in summaries {
        for (t, row) in rows.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                w.write_record([method.clone(), t.to_string(), j.to_string(), real(b.mean), real(b.lo), real(b.hi)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_logerr(out: &mut OutputDir, series: &[(String, LogErrorSeries)]) -> anyhow::Result<()> {
    let mut w = out.csv(
        "logerr.csv",
        &["method", "step", "mean_log_err", "lo95", "hi95", "fitted_slope", "window_start", "window_end"],
    )?;
    for (method, s) in series {
        for (t, b) in s.bands.iter().enumerate() {
            w.write_record([
                method.clone(),
                t.to_string(),
                real(b.mean),
                real(b.lo),
                real(b.hi),
                real(s.slope),
                s.window.0.to_string(),
                s.window.1.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_distances(out: &mut OutputDir, reports: &[(String, DistanceReport)]) -> anyhow::Result<()> {
    let mut w = out.csv("distances.csv", &["method_pair", "step", "coord", "ks", "w2"])?;
    for (pair, r) in reports {
        for j in 0..r.ks.len() {
            w.write_record([pair.clone(), r.step.to_string(), j.to_string(), real(r.ks[j]), real(r.w2[j])])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub created_unix_seconds: u64,
    pub config: &'a ExperimentConfig,
    /// Quantities computed during the run (step sizes, temperatures, condition numbers, ...).
    pub derived: serde_json::Value,
    pub outputs: Vec<String>,
    pub errors: Vec<String>,
}

pub fn write_manifest(
    out: &mut OutputDir,
    cfg: &ExperimentConfig,
    derived: serde_json::Value,
    errors: &[String],
) -> anyhow::Result<PathBuf> {
    let outputs = out.files().to_vec();
    let path = out.path("manifest.json");
    let manifest = Manifest {
        tool: "masgrad-lab",
        version: env!("CARGO_PKG_VERSION"),
        created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: cfg,
        derived,
        outputs,
        errors: errors.to_vec(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
