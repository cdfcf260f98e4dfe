//! The consolidated AUC grid of a finished run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use comember::metrics::mean_std;
use serde::{Deserialize, Serialize};

use crate::config::ModelKind;
use crate::error::{CliError, CliResult};
use crate::manifest::{FileRecord, RunManifest};
use crate::pipeline::{read_text, run_dir, to_json, write_file, AttackSummary};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

/// One `(model, method, strength, training set)` cell, over replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub model: ModelKind,
    pub method: String,
    pub strength: usize,
    pub arm: String,
    pub size: usize,
    pub replicates: usize,
    pub mean_auc: f64,
    /// Sample standard deviation; 0 for a single replicate.
    pub std_auc: f64,
    pub aucs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub config_hash: String,
    pub cells: Vec<ReportCell>,
}

/// Collects every attack summary of a complete run into the grid and writes
/// `report.json` and `report.csv` to `out` (the run directory by default).
pub fn report(manifest_path: &Path, out: Option<&Path>) -> CliResult<Report> {
    let mut manifest = RunManifest::load(manifest_path)?;
    let dir = run_dir(manifest_path);
    if let Some(s) = manifest.stages.iter().find(|s| s.status != crate::manifest::StageStatus::Complete) {
        return Err(CliError::Incomplete(format!("stage {} has not completed", s.name)));
    }
    let mut groups: BTreeMap<(ModelKind, String, usize, usize, String), Vec<f64>> = BTreeMap::new();
    for rec in manifest.stages.iter().flat_map(|s| &s.outputs) {
        if !(rec.path.starts_with("roc/") && rec.path.ends_with(".json")) {
            continue;
        }
        if !rec.intact(&dir)? {
            return Err(CliError::Integrity(format!("{} is missing or altered", rec.path)));
        }
        let a: AttackSummary = serde_json::from_str(&read_text(&dir, &rec.path)?)
            .map_err(|e| CliError::Integrity(format!("{}: {e}", rec.path)))?;
        groups
            .entry((a.model, a.method, a.strength, a.size, a.arm))
            .or_default()
            .push(a.auc);
    }
    let cells: Vec<ReportCell> = groups
        .into_iter()
        .map(|((model, method, strength, size, arm), aucs)| {
            let (mean_auc, std_auc) = mean_std(&aucs);
            ReportCell {
                model,
                method,
                strength,
                arm,
                size,
                replicates: aucs.len(),
                mean_auc,
                std_auc: if std_auc.is_finite() { std_auc } else { 0.0 },
                aucs,
            }
        })
        .collect();
    let report = Report {
        kind: manifest.kind.to_string(),
        config_hash: manifest.config_hash.clone(),
        cells,
    };

    let target: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| dir.clone());
    let mut csv = String::from("model,method,strength,arm,size,replicates,mean_auc,std_auc\n");
    for c in &report.cells {
        csv += &format!(
            "{},{},{},{},{},{},{},{}\n",
            c.model, c.method, c.strength, c.arm, c.size, c.replicates, c.mean_auc, c.std_auc
        );
    }
    write_file(&target, REPORT_JSON, to_json(&report).as_bytes())?;
    write_file(&target, REPORT_CSV, csv.as_bytes())?;

    // Record the files in the manifest, relative to the run when possible.
    let rel = |name: &str| -> String {
        let p = target.join(name);
        match p.strip_prefix(&dir) {
            Ok(r) => r.to_string_lossy().into_owned(),
            Err(_) => p.to_string_lossy().into_owned(),
        }
    };
    manifest.report = [REPORT_JSON, REPORT_CSV]
        .iter()
        .map(|n| FileRecord::of(&dir, &rel(n)))
        .collect::<CliResult<_>>()?;
    manifest.save(&dir)?;
    Ok(report)
}
