//! Experiment execution: per-cell target construction, replication fan-out
//! across a worker pool, and raw/aggregate file emission.
//!
//! Every replication derives its own random stream from
//! (base_seed, dimension cell, sample cell, replication), shared across
//! methods so that method comparisons are seed-paired: paired runs see the
//! same target, the same μ₀ draw, and the same sampling randomness.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ahtis::mathcore::{derive_seed, RngStream};
use ahtis::sampler::{run_ahtis, run_amis, BoConfig, Mode, RunRecord, SamplerConfig};
use ahtis::tailbo::AcquisitionConfig;
use ahtis::targets::{load_regression_csv, PosteriorModel, SyntheticTarget, SyntheticTargetSpec};
use ahtis::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::refz::make_reference_z;

// Seed-derivation tags; changing these changes every derived stream.
const TAG_TARGET_LOCATION: u64 = 1;
const TAG_TARGET_BASIS: u64 = 2;
const TAG_RUN: u64 = 3;
const TAG_INIT: u64 = 4;

/// One sweep cell: a (dimension, sample-size) pair for synthetic runs, a
/// sample size for regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub dim: usize,
    pub dim_index: usize,
    pub samples: usize,
    pub sample_index: usize,
    /// Exact normalizer when available (analytic or reference).
    pub true_z: Option<f64>,
}

/// Metadata written next to the raw files so `aggregate` can rebuild the
/// summary without the original config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment: String,
    pub methods: Vec<String>,
    pub cells: Vec<Cell>,
    pub replications: usize,
    pub base_seed: u64,
    pub iterations: usize,
}

pub struct RunOutcome {
    pub manifest: ExperimentManifest,
    pub raw_files: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

enum Target {
    Synthetic(SyntheticTarget),
    Regression(Box<PosteriorModel>),
}

impl Target {
    fn as_log_target(&self) -> &dyn ahtis::sampler::LogTarget {
        match self {
            Target::Synthetic(t) => t,
            Target::Regression(m) => m.as_ref(),
        }
    }
    fn dim(&self) -> usize {
        match self {
            Target::Synthetic(t) => t.params.dim(),
            Target::Regression(_) => 4,
        }
    }
}

/// Runs the full experiment described by `cfg`, writing one raw CSV and one
/// JSON record per (method, cell, replication) plus `summary.csv` and
/// `experiment.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;

    let methods: Vec<(String, Mode)> = cfg
        .methods
        .iter()
        .map(|m| Ok((m.label(), m.mode()?)))
        .collect::<Result<_>>()?;

    // Build targets per dimension cell. Regression has a single posterior
    // shared by every sample-size cell.
    let base = cfg.run.base_seed;
    let (targets, dims): (Vec<Target>, Vec<usize>) = match cfg.experiment {
        ExperimentKind::Synthetic => {
            let s = cfg.synthetic.as_ref().expect("validated");
            let mut targets = Vec::new();
            for (d_idx, &dim) in s.dims.iter().enumerate() {
                let spec = SyntheticTargetSpec {
                    dim,
                    nu_pi: s.nu_pi,
                    kappa: s.kappa,
                    location_seed: derive_seed(base, &[TAG_TARGET_LOCATION, d_idx as u64]),
                    basis_seed: derive_seed(base, &[TAG_TARGET_BASIS, d_idx as u64]),
                };
                targets.push(Target::Synthetic(SyntheticTarget::from_spec(&spec)?));
            }
            (targets, s.dims.clone())
        }
        ExperimentKind::Regression => {
            let r = cfg.regression.as_ref().expect("validated");
            let data = load_regression_csv(&r.csv, &r.column_map())?;
            let model = PosteriorModel::new(data);
            (vec![Target::Regression(Box::new(model))], vec![4])
        }
    };

    // Ground truth per dimension cell.
    let true_z_per_dim: Vec<Option<f64>> = match cfg.experiment {
        ExperimentKind::Synthetic => targets
            .iter()
            .map(|t| match t {
                Target::Synthetic(s) => Some(s.log_z.exp()),
                Target::Regression(_) => None,
            })
            .collect(),
        ExperimentKind::Regression => {
            let model = match &targets[0] {
                Target::Regression(m) => m.as_ref(),
                Target::Synthetic(_) => unreachable!(),
            };
            let z = make_reference_z(cfg, model, out_dir)?;
            vec![Some(z)]
        }
    };

    let mut cells = Vec::new();
    for (d_idx, &dim) in dims.iter().enumerate() {
        for (m_idx, &m) in cfg.run.samples.iter().enumerate() {
            let label = match cfg.experiment {
                ExperimentKind::Synthetic => format!("d{dim}_m{m}"),
                ExperimentKind::Regression => format!("m{m}"),
            };
            cells.push(Cell {
                label,
                dim,
                dim_index: d_idx,
                samples: m,
                sample_index: m_idx,
                true_z: true_z_per_dim[d_idx],
            });
        }
    }

    let manifest = ExperimentManifest {
        experiment: match cfg.experiment {
            ExperimentKind::Synthetic => "synthetic".into(),
            ExperimentKind::Regression => "regression".into(),
        },
        methods: methods.iter().map(|(l, _)| l.clone()).collect(),
        cells: cells.clone(),
        replications: cfg.run.replications,
        base_seed: base,
        iterations: cfg.run.iterations,
    };
    write_manifest(out_dir, &manifest)?;

    // Task list: (method, cell, replication).
    struct Task<'a> {
        method_label: &'a str,
        mode: Mode,
        cell: &'a Cell,
        rep: usize,
    }
    let mut tasks = Vec::new();
    for (label, mode) in &methods {
        for cell in &cells {
            for rep in 0..cfg.run.replications {
                tasks.push(Task {
                    method_label: label,
                    mode: *mode,
                    cell,
                    rep,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let results: Vec<Result<(PathBuf, RunRecord)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let target = &targets[task.cell.dim_index];
                let dim = target.dim();
                let run_seed = derive_seed(
                    base,
                    &[
                        TAG_RUN,
                        task.cell.dim_index as u64,
                        task.cell.sample_index as u64,
                        task.rep as u64,
                    ],
                );
                let mut init_rng = RngStream::new(derive_seed(
                    base,
                    &[
                        TAG_INIT,
                        task.cell.dim_index as u64,
                        task.cell.sample_index as u64,
                        task.rep as u64,
                    ],
                ));
                let mu0: Vec<f64> = (0..dim)
                    .map(|_| init_rng.uniform(-cfg.init.mu0_halfwidth, cfg.init.mu0_halfwidth))
                    .collect();
                let sampler_cfg = SamplerConfig {
                    iterations: cfg.run.iterations,
                    samples_per_iter: task.cell.samples,
                    mode: task.mode,
                    nu0: cfg.init.nu0,
                    mu0,
                    sigma0_scale: cfg.sigma0_scale(),
                    sigma0_matrix: None,
                    seed: run_seed,
                    bo: BoConfig {
                        acquisition: AcquisitionConfig {
                            beta_multiplier: cfg.beta_multiplier(),
                            search_grid_size: cfg.bo_grid_size(),
                        },
                        hyperopt: cfg.hyperopt(),
                    },
                    amis_scale_correction: false,
                };
                let mut rng = RngStream::new(run_seed);
                let out = match task.mode {
                    Mode::AmisFixedNu(_) => {
                        run_amis(target.as_log_target(), &sampler_cfg, &mut rng)?
                    }
                    _ => run_ahtis(target.as_log_target(), &sampler_cfg, &mut rng)?,
                };
                // keep the configured label (it already encodes method+nu)
                let mut record = out.record;
                record.method = task.method_label.to_string();
                let path = write_raw(
                    out_dir,
                    task.method_label,
                    &task.cell.label,
                    task.rep,
                    &record,
                )?;
                Ok((path, record))
            })
            .collect()
    });

    let mut raw_files = Vec::new();
    let mut records: Vec<(String, String, usize, RunRecord)> = Vec::new();
    for (task, result) in tasks.iter().zip(results) {
        let (path, record) = result?;
        raw_files.push(path);
        records.push((
            task.method_label.to_string(),
            task.cell.label.clone(),
            task.rep,
            record,
        ));
    }
    // deterministic aggregation order: config order of methods and cells,
    // replication index ascending (the task list is already in that order,
    // and par_iter preserved indices)
    let summary = crate::aggregate::summarize(&manifest, &records);
    let summary_path = out_dir.join("summary.csv");
    crate::aggregate::write_summary(&summary_path, &summary)?;

    Ok(RunOutcome {
        manifest,
        raw_files,
        summary_path,
    })
}

fn write_manifest(out_dir: &Path, manifest: &ExperimentManifest) -> Result<()> {
    let path = out_dir.join("experiment.json");
    let mut f = fs::File::create(path)?;
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Io(format!("manifest serialization: {e}")))?;
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn raw_file_name(method: &str, cell: &str, rep: usize) -> String {
    format!("raw_{method}_{cell}_r{rep:04}.csv")
}

fn write_raw(
    out_dir: &Path,
    method: &str,
    cell: &str,
    rep: usize,
    record: &RunRecord,
) -> Result<PathBuf> {
    let path = out_dir.join(raw_file_name(method, cell, rep));
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record([
        "t",
        "nu_t",
        "alpha_t",
        "alpha_ess_t",
        "dm_alpha_ess_t",
        "z_hat_t",
        "mu_norm",
        "sigma_trace",
        "sigma_logdet",
        "wall_ms",
    ])
    .map_err(|e| Error::Io(e.to_string()))?;
    for row in &record.rows {
        w.write_record([
            row.t.to_string(),
            row.nu_t.to_string(),
            row.alpha_t.to_string(),
            row.alpha_ess_t.to_string(),
            row.dm_alpha_ess_t.to_string(),
            row.z_hat_t.to_string(),
            row.mu_norm.to_string(),
            row.sigma_trace.to_string(),
            row.sigma_logdet.to_string(),
            row.wall_ms.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;

    // full record alongside, for consumers that want structure over columns
    let json_path = path.with_extension("json");
    let body = serde_json::to_string_pretty(record)
        .map_err(|e| Error::Io(format!("record serialization: {e}")))?;
    fs::write(json_path, body + "\n")?;
    Ok(path)
}
