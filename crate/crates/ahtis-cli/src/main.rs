//! `ahtis` command-line interface.
//!
//! Exit codes: 0 on success, 2 for configuration/validation errors, 3 for
//! runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use ahtis::Error;
use ahtis_cli::aggregate::{aggregate_dir, write_summary};
use ahtis_cli::config::ExperimentConfig;
use ahtis_cli::runner::run_experiment;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ahtis",
    about = "Adaptive heavy-tailed importance sampling experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rebuild summary.csv from the raw CSVs in a run directory.
    Aggregate {
        /// Directory containing experiment.json and raw_*.csv files.
        dir: PathBuf,
    },
    /// Compute (or fetch from cache) the reference evidence value for a
    /// regression config.
    ReferenceZ {
        /// Path to the experiment config.
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads (0 = all available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV column holding body weight.
    #[arg(long)]
    col_weight: Option<String>,
    /// CSV column holding the serum creatinine concentration.
    #[arg(long)]
    col_serum: Option<String>,
    /// CSV column holding age.
    #[arg(long)]
    col_age: Option<String>,
    /// CSV column holding the response (creatinine clearance).
    #[arg(long)]
    col_response: Option<String>,
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.run.base_seed = seed;
        }
        if let Some(reps) = self.reps {
            cfg.run.replications = reps;
        }
        if let Some(workers) = self.workers {
            cfg.run.workers = workers;
        }
        if let Some(out) = self.out {
            cfg.run.out_dir = out;
        }
        if let Some(reg) = cfg.regression.as_mut() {
            if let Some(v) = self.col_weight {
                reg.col_weight = v;
            }
            if let Some(v) = self.col_serum {
                reg.col_serum = v;
            }
            if let Some(v) = self.col_age {
                reg.col_age = v;
            }
            if let Some(v) = self.col_response {
                reg.col_response = v;
            }
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::Schema(_) | Error::Parse { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => load_with(config, overrides).and_then(|cfg| {
            let out_dir = cfg.run.out_dir.clone();
            let outcome = run_experiment(&cfg, &out_dir)?;
            println!(
                "wrote {} raw files and {}",
                outcome.raw_files.len(),
                outcome.summary_path.display()
            );
            Ok(())
        }),
        Command::Aggregate { dir } => aggregate_dir(&dir).and_then(|rows| {
            let path = dir.join("summary.csv");
            write_summary(&path, &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            Ok(())
        }),
        Command::ReferenceZ { config, overrides } => load_with(config, overrides).and_then(|cfg| {
            let reg = cfg.regression.as_ref().ok_or_else(|| {
                Error::InvalidConfig("reference-z needs a regression config".into())
            })?;
            let data = ahtis::targets::load_regression_csv(&reg.csv, &reg.column_map())?;
            let model = ahtis::targets::PosteriorModel::new(data);
            let z = ahtis_cli::refz::make_reference_z(&cfg, &model, &cfg.run.out_dir)?;
            println!("reference Z = {z}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_with(path: PathBuf, overrides: Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(&path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
