//! Summary construction, both from in-memory records after a run and from
//! raw CSVs on disk (`aggregate` subcommand). Both paths produce identical
//! bytes: CSV floats are written in shortest round-trip form, so parsing
//! them back and recomputing the same sums reproduces the summary exactly.

use std::path::Path;

use ahtis::sampler::RunRecord;
use ahtis::{Error, Result};
use serde::Serialize;

use crate::runner::{raw_file_name, ExperimentManifest};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub cell: String,
    pub mean_final_aess: f64,
    pub std_final_aess: f64,
    /// Empty when no ground-truth normalizer exists.
    pub rel_sqrt_mse_z: Option<f64>,
    pub n_reps: usize,
}

/// Aggregates in-memory records (method, cell, rep, record) in manifest
/// order.
pub fn summarize(
    manifest: &ExperimentManifest,
    records: &[(String, String, usize, RunRecord)],
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for method in &manifest.methods {
        for cell in &manifest.cells {
            let mut finals: Vec<(usize, f64, f64)> = records
                .iter()
                .filter(|(m, c, _, _)| m == method && *c == cell.label)
                .map(|(_, _, rep, r)| {
                    let last = r.final_row();
                    (*rep, last.dm_alpha_ess_t, last.z_hat_t)
                })
                .collect();
            finals.sort_by_key(|(rep, _, _)| *rep);
            if finals.is_empty() {
                continue;
            }
            rows.push(make_row(method, &cell.label, cell.true_z, &finals));
        }
    }
    rows
}

fn make_row(
    method: &str,
    cell: &str,
    true_z: Option<f64>,
    finals: &[(usize, f64, f64)],
) -> SummaryRow {
    let n = finals.len();
    let mean = finals.iter().map(|(_, a, _)| a).sum::<f64>() / n as f64;
    let std = if n > 1 {
        (finals
            .iter()
            .map(|(_, a, _)| (a - mean) * (a - mean))
            .sum::<f64>()
            / (n - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let rel_sqrt_mse_z = true_z.map(|z| {
        let mse = finals
            .iter()
            .map(|(_, _, zh)| (zh - z) * (zh - z))
            .sum::<f64>()
            / n as f64;
        mse.sqrt() / z
    });
    SummaryRow {
        method: method.to_string(),
        cell: cell.to_string(),
        mean_final_aess: mean,
        std_final_aess: std,
        rel_sqrt_mse_z,
        n_reps: n,
    }
}

/// Rebuilds the summary from the raw CSVs in `dir`, using the manifest for
/// ordering and ground truth.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<SummaryRow>> {
    let manifest_path = dir.join("experiment.json");
    let manifest: ExperimentManifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::Io(format!("{}: {e}", manifest_path.display())))?,
    )
    .map_err(|e| Error::Schema(format!("experiment.json: {e}")))?;

    let mut rows = Vec::new();
    for method in &manifest.methods {
        for cell in &manifest.cells {
            let mut finals = Vec::new();
            for rep in 0..manifest.replications {
                let path = dir.join(raw_file_name(method, &cell.label, rep));
                if !path.exists() {
                    continue; // partial results are allowed
                }
                let (aess, z) = read_final_row(&path)?;
                finals.push((rep, aess, z));
            }
            if finals.is_empty() {
                continue;
            }
            rows.push(make_row(method, &cell.label, cell.true_z, &finals));
        }
    }
    Ok(rows)
}

/// Final (dm_alpha_ess_t, z_hat_t) of one raw CSV.
fn read_final_row(path: &Path) -> Result<(f64, f64)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column {name}", path.display())))
    };
    let aess_idx = col("dm_alpha_ess_t")?;
    let z_idx = col("z_hat_t")?;
    let mut last: Option<(f64, f64)> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io(e.to_string()))?;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::Parse {
                    row: i + 1,
                    column: name.into(),
                    message: "missing field".into(),
                })?
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    row: i + 1,
                    column: name.into(),
                    message: e.to_string(),
                })
        };
        last = Some((parse(aess_idx, "dm_alpha_ess_t")?, parse(z_idx, "z_hat_t")?));
    }
    last.ok_or_else(|| Error::Schema(format!("{}: no data rows", path.display())))
}

/// Writes summary rows as CSV (UTF-8, LF); a missing ground truth leaves
/// the rel_sqrt_mse_z field empty.
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record([
        "method",
        "cell",
        "mean_final_aess",
        "std_final_aess",
        "rel_sqrt_mse_z",
        "n_reps",
    ])
    .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.cell.clone(),
            r.mean_final_aess.to_string(),
            r.std_final_aess.to_string(),
            r.rel_sqrt_mse_z.map(|v| v.to_string()).unwrap_or_default(),
            r.n_reps.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
