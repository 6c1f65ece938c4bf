//! Declarative experiment configuration (TOML).
//!
//! One file describes the target family, the method list, run sizes,
//! initialization, Bayesian-optimization settings, and the ground-truth
//! policy. Command-line flags can override the seed, replication count,
//! worker count, output directory, and CSV column mapping.

use std::path::{Path, PathBuf};

use ahtis::sampler::Mode;
use ahtis::targets::ColumnMap;
use ahtis::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub regression: Option<RegressionSection>,
    #[serde(rename = "method")]
    pub methods: Vec<MethodSection>,
    pub run: RunSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub bo: Option<BoSection>,
    #[serde(default)]
    pub ground_truth: Option<GroundTruthSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Synthetic,
    Regression,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub dims: Vec<usize>,
    pub nu_pi: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    5.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSection {
    pub csv: PathBuf,
    #[serde(default = "default_col_weight")]
    pub col_weight: String,
    #[serde(default = "default_col_serum")]
    pub col_serum: String,
    #[serde(default = "default_col_age")]
    pub col_age: String,
    #[serde(default = "default_col_response")]
    pub col_response: String,
}

fn default_col_weight() -> String {
    "weight".into()
}
fn default_col_serum() -> String {
    "serum".into()
}
fn default_col_age() -> String {
    "age".into()
}
fn default_col_response() -> String {
    "response".into()
}

impl RegressionSection {
    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            weight: self.col_weight.clone(),
            serum: self.col_serum.clone(),
            age: self.col_age.clone(),
            response: self.col_response.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub kind: MethodKind,
    #[serde(default)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    AhtisAdaptive,
    Ahtis,
    Amis,
}

impl MethodSection {
    pub fn mode(&self) -> Result<Mode> {
        match self.kind {
            MethodKind::AhtisAdaptive => Ok(Mode::AhtisAdaptiveNu),
            MethodKind::Ahtis => {
                let nu = self.nu.ok_or_else(|| {
                    Error::InvalidConfig("method 'ahtis' requires a nu value".into())
                })?;
                Ok(Mode::AhtisFixedNu(nu))
            }
            MethodKind::Amis => {
                let nu = self.nu.ok_or_else(|| {
                    Error::InvalidConfig("method 'amis' requires a nu value".into())
                })?;
                Ok(Mode::AmisFixedNu(nu))
            }
        }
    }

    /// Stable label used in file names and summary rows.
    pub fn label(&self) -> String {
        match (self.kind, self.nu) {
            (MethodKind::AhtisAdaptive, _) => "ahtis-adaptive".into(),
            (MethodKind::Ahtis, Some(nu)) => format!("ahtis-nu{nu}"),
            (MethodKind::Amis, Some(nu)) => format!("amis-nu{nu}"),
            (MethodKind::Ahtis, None) => "ahtis".into(),
            (MethodKind::Amis, None) => "amis".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub iterations: usize,
    /// One entry per sample-size cell (sweeps over M).
    pub samples: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// μ₀ is drawn uniformly from [−halfwidth, halfwidth]^d per replication.
    #[serde(default = "default_mu0_halfwidth")]
    pub mu0_halfwidth: f64,
    /// Σ₀ = c·I; when absent, 10 for synthetic runs and 4 for regression.
    #[serde(default)]
    pub sigma0_scale: Option<f64>,
    #[serde(default = "default_nu0")]
    pub nu0: f64,
}

fn default_mu0_halfwidth() -> f64 {
    5.0
}
fn default_nu0() -> f64 {
    1.0
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            mu0_halfwidth: default_mu0_halfwidth(),
            sigma0_scale: None,
            nu0: default_nu0(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoSection {
    #[serde(default)]
    pub beta_multiplier: Option<f64>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub hyperopt: Option<bool>,
}

fn default_grid_size() -> usize {
    512
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthSection {
    pub policy: GroundTruthPolicy,
    #[serde(default = "default_reference_iterations")]
    pub reference_iterations: usize,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_reference_nu")]
    pub reference_nu: f64,
    #[serde(default)]
    pub reference_seed: u64,
}

fn default_reference_iterations() -> usize {
    25
}
fn default_reference_samples() -> usize {
    100_000
}
fn default_reference_nu() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundTruthPolicy {
    Analytic,
    Reference,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&raw)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list is empty".into()));
        }
        for m in &self.methods {
            let mode = m.mode()?;
            if let Mode::AmisFixedNu(nu) = mode {
                if nu <= 2.0 || !nu.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "AMIS updates are undefined for nu <= 2 (got {nu})"
                    )));
                }
            }
        }
        if self.run.replications < 1 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.run.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.run.samples.is_empty() {
            return Err(Error::InvalidConfig("samples list is empty".into()));
        }
        match self.experiment {
            ExperimentKind::Synthetic => {
                let s = self
                    .synthetic
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("missing [synthetic] section".into()))?;
                if s.dims.is_empty() {
                    return Err(Error::InvalidConfig("dims list is empty".into()));
                }
                if s.dims.iter().any(|d| *d == 0 || *d > 64) {
                    return Err(Error::InvalidConfig("dims must be in 1..=64".into()));
                }
                if s.nu_pi <= 0.0 || !s.nu_pi.is_finite() {
                    return Err(Error::InvalidConfig("nu_pi must be positive".into()));
                }
                if s.kappa < 1.0 || !s.kappa.is_finite() {
                    return Err(Error::InvalidConfig("kappa must be >= 1".into()));
                }
                if let Some(gt) = &self.ground_truth {
                    if gt.policy != GroundTruthPolicy::Analytic {
                        return Err(Error::InvalidConfig(
                            "synthetic experiments have an analytic normalizer; use policy = \"analytic\"".into(),
                        ));
                    }
                }
            }
            ExperimentKind::Regression => {
                self.regression
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("missing [regression] section".into()))?;
                let gt = self.ground_truth.as_ref().ok_or_else(|| {
                    Error::InvalidConfig(
                        "regression experiments need a [ground_truth] section with policy = \"reference\"".into(),
                    )
                })?;
                if gt.policy != GroundTruthPolicy::Reference {
                    return Err(Error::InvalidConfig(
                        "regression experiments have no analytic normalizer; use policy = \"reference\"".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// β multiplier: explicit config wins, otherwise 1.0 for synthetic and
    /// 1.5 for the noisier real-data objective.
    pub fn beta_multiplier(&self) -> f64 {
        if let Some(bo) = &self.bo {
            if let Some(v) = bo.beta_multiplier {
                return v;
            }
        }
        match self.experiment {
            ExperimentKind::Synthetic => 1.0,
            ExperimentKind::Regression => 1.5,
        }
    }

    /// GP hyperparameter optimization: explicit config wins, otherwise off
    /// for synthetic and on for regression.
    pub fn hyperopt(&self) -> bool {
        if let Some(bo) = &self.bo {
            if let Some(v) = bo.hyperopt {
                return v;
            }
        }
        matches!(self.experiment, ExperimentKind::Regression)
    }

    pub fn bo_grid_size(&self) -> usize {
        self.bo.as_ref().map_or(512, |b| b.grid_size)
    }

    pub fn sigma0_scale(&self) -> f64 {
        self.init.sigma0_scale.unwrap_or(match self.experiment {
            ExperimentKind::Synthetic => 10.0,
            ExperimentKind::Regression => 4.0,
        })
    }
}
