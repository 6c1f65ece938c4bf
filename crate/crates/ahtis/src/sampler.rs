//! The two top-level sampling loops.
//!
//! [`run_ahtis`] draws from a Student-t proposal, adapts its tail parameter
//! by Bayesian optimization over the transformed α-ESS (from the second
//! iteration on), re-weights *all* samples drawn so far against the escort
//! target with deterministic-mixture denominators, and moment-matches the
//! escort weights into the next location and scale. [`run_amis`] is the
//! classical baseline: identical loop shape, plain-target weights, no tail
//! adaptation.
//!
//! Per-sample target log densities and the proposal-density matrix are
//! cached and grown incrementally, so a run costs O(M·T²) proposal
//! evaluations and each target density is evaluated exactly once.

use std::time::Instant;

use serde::Serialize;

use crate::adapt::escort_moment_match;
use crate::diagnostics::{alpha_ess, z_estimate, TargetKind, WeightSet};
use crate::mathcore::{log_sum_exp, RngStream, SpdMatrix};
use crate::studentt::{alpha_of_nu, StudentTParams};
use crate::tailbo::{tail_adapt_step, AcquisitionConfig, GpState};
use crate::{Error, Result};

/// Which algorithm drives the proposal updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Escort moment matching with Bayesian-optimization tail adaptation.
    AhtisAdaptiveNu,
    /// Escort moment matching at a fixed tail parameter.
    AhtisFixedNu(f64),
    /// Plain moment matching at a fixed tail parameter (requires ν > 2).
    AmisFixedNu(f64),
}

/// Bayesian-optimization settings for the adaptive-ν mode.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoConfig {
    pub acquisition: AcquisitionConfig,
    pub hyperopt: bool,
}

/// Configuration of one sampling run.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Number of adaptation iterations T; the loop runs t = 0..=T, so a run
    /// draws (T+1)·M samples in total.
    pub iterations: usize,
    /// Samples per iteration.
    pub samples_per_iter: usize,
    pub mode: Mode,
    /// Initial tail parameter (used by the adaptive mode; fixed modes pin
    /// ν to their own value).
    pub nu0: f64,
    /// Initial location.
    pub mu0: Vec<f64>,
    /// Initial scale Σ₀ = c·I.
    pub sigma0_scale: f64,
    /// Full initial scale matrix; overrides `sigma0_scale` when present
    /// (used by reference runs that start from a Laplace approximation).
    pub sigma0_matrix: Option<SpdMatrix>,
    pub seed: u64,
    pub bo: BoConfig,
    /// When true, AMIS converts the fitted covariance into a Student-t
    /// scale via the (ν−2)/ν factor instead of using it directly.
    pub amis_scale_correction: bool,
}

impl SamplerConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.samples_per_iter < dim + 1 {
            return Err(Error::InvalidConfig(format!(
                "samples_per_iter must be at least d+1 = {}",
                dim + 1
            )));
        }
        if self.mu0.len() != dim {
            return Err(Error::InvalidConfig(format!(
                "mu0 has dimension {}, target has {}",
                self.mu0.len(),
                dim
            )));
        }
        if self.sigma0_scale <= 0.0 || !self.sigma0_scale.is_finite() {
            return Err(Error::InvalidConfig("sigma0_scale must be positive".into()));
        }
        if let Some(s) = &self.sigma0_matrix {
            if s.dim() != dim {
                return Err(Error::InvalidConfig(format!(
                    "sigma0_matrix has dimension {}, target has {dim}",
                    s.dim()
                )));
            }
        }
        match self.mode {
            Mode::AmisFixedNu(nu) => {
                if nu <= 2.0 || !nu.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "AMIS proposal moments are undefined for nu <= 2 (got {nu})"
                    )));
                }
            }
            Mode::AhtisFixedNu(nu) => {
                if nu <= 0.0 || !nu.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "fixed nu must be positive (got {nu})"
                    )));
                }
            }
            Mode::AhtisAdaptiveNu => {
                if self.nu0 <= 0.0 || !self.nu0.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "nu0 must be positive (got {})",
                        self.nu0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One iteration's worth of recorded metrics.
#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub t: usize,
    /// Tail parameter of the proposal sampled at this iteration.
    pub nu_t: f64,
    /// Escort exponent α(ν_t).
    pub alpha_t: f64,
    /// α_t-ESS of the current iteration's plain weights (the BO observation).
    pub alpha_ess_t: f64,
    /// α-ESS of the full-history weight set used for adaptation (escort for
    /// the AHTIS modes, plain for AMIS), at this iteration's weighting
    /// exponent.
    pub dm_alpha_ess_t: f64,
    /// Evidence estimate from plain-target DM weights over the full history.
    pub z_hat_t: f64,
    /// ‖μ_t‖₂.
    pub mu_norm: f64,
    pub sigma_trace: f64,
    pub sigma_logdet: f64,
    pub wall_ms: u64,
}

/// Full record of a run: one row per iteration plus the method label.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub dim: usize,
    pub seed: u64,
    pub rows: Vec<IterRecord>,
}

impl RunRecord {
    pub fn final_row(&self) -> &IterRecord {
        self.rows.last().expect("runs have at least one iteration")
    }
}

/// Final sample collection with its plain-target DM weights, suitable for
/// self-normalized estimation of arbitrary expectations.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub samples: Vec<Vec<f64>>,
    pub plain_weights: WeightSet,
}

/// A target density known up to a constant.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;
    fn log_density_unnorm(&self, x: &[f64]) -> f64;
}

/// Incrementally grown sample/density caches shared by both loops.
struct DmCache {
    samples: Vec<Vec<f64>>,
    log_pi: Vec<f64>,
    /// log q_k(x_i), one row per proposal in history order.
    log_q_rows: Vec<Vec<f64>>,
}

impl DmCache {
    fn new() -> Self {
        DmCache {
            samples: Vec::new(),
            log_pi: Vec::new(),
            log_q_rows: Vec::new(),
        }
    }

    /// Adds a freshly drawn batch: extends every existing proposal row with
    /// the new points and caches their target log densities.
    fn push_batch(
        &mut self,
        batch: Vec<Vec<f64>>,
        target: &dyn LogTarget,
        history: &[StudentTParams],
    ) -> Result<()> {
        for x in &batch {
            self.log_pi.push(target.log_density_unnorm(x));
        }
        for (k, row) in self.log_q_rows.iter_mut().enumerate() {
            for x in &batch {
                row.push(history[k].log_pdf(x)?);
            }
        }
        self.samples.extend(batch);
        Ok(())
    }

    /// Adds a new proposal: evaluates its density on every sample so far.
    fn push_proposal(&mut self, q: &StudentTParams) -> Result<()> {
        let mut row = Vec::with_capacity(self.samples.len());
        for x in &self.samples {
            row.push(q.log_pdf(x)?);
        }
        self.log_q_rows.push(row);
        Ok(())
    }

    /// log of the equal-weight mixture over all proposals, per sample.
    fn log_mixture(&self) -> Vec<f64> {
        let k = self.log_q_rows.len() as f64;
        let n = self.samples.len();
        let mut col = vec![0.0; self.log_q_rows.len()];
        (0..n)
            .map(|i| {
                for (j, row) in self.log_q_rows.iter().enumerate() {
                    col[j] = row[i];
                }
                log_sum_exp(&col) - k.ln()
            })
            .collect()
    }

    fn len(&self) -> usize {
        self.samples.len()
    }
}

fn weight_set_from(log_pi: &[f64], log_mix: &[f64], kind: TargetKind) -> Result<WeightSet> {
    let log_w: Vec<f64> = log_pi
        .iter()
        .zip(log_mix)
        .map(|(lp, lm)| match kind {
            TargetKind::Plain => lp - lm,
            TargetKind::Escort(alpha) => alpha * lp - lm,
        })
        .collect();
    WeightSet::from_log_weights(log_w, kind)
}

fn run_loop(
    target: &dyn LogTarget,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
    method: &str,
) -> Result<RunOutput> {
    let d = target.dim();
    cfg.validate(d)?;
    let escorted = !matches!(cfg.mode, Mode::AmisFixedNu(_));

    let nu_init = match cfg.mode {
        Mode::AhtisAdaptiveNu => cfg.nu0,
        Mode::AhtisFixedNu(nu) | Mode::AmisFixedNu(nu) => nu,
    };
    let sigma0 = match &cfg.sigma0_matrix {
        Some(s) => s.clone(),
        None => SpdMatrix::scaled_identity(d, cfg.sigma0_scale)?,
    };
    let mut history = vec![StudentTParams::new(cfg.mu0.clone(), sigma0, nu_init)?];
    let mut cache = DmCache::new();
    cache.push_proposal(&history[0])?;

    let mut gp = GpState::new(crate::tailbo::DEFAULT_NU_MAX, cfg.bo.hyperopt);
    let mut rows: Vec<IterRecord> = Vec::with_capacity(cfg.iterations + 1);
    let mut consecutive_skips = 0usize;
    let m = cfg.samples_per_iter;

    for t in 0..=cfg.iterations {
        let started = Instant::now();
        let q_t = history[t].clone();
        let nu_t = q_t.nu();
        let alpha_t = alpha_of_nu(nu_t, d)?.alpha();

        // Step 2 — sampling.
        let batch = q_t.sample_n(rng, m);
        cache.push_batch(batch, target, &history)?;

        // Current-iteration plain weights: the BO observation and the
        // recorded per-iteration ESS diagnostic.
        let n_total = cache.len();
        let cur_log_w: Vec<f64> = (n_total - m..n_total)
            .map(|i| cache.log_pi[i] - cache.log_q_rows[t][i])
            .collect();
        let cur_ws = WeightSet::from_log_weights(cur_log_w, TargetKind::Plain)?;
        let alpha_ess_t = alpha_ess(&cur_ws, alpha_t);

        // Step 3 — tail adaptation (first iteration keeps ν unchanged).
        let nu_next = match cfg.mode {
            Mode::AhtisAdaptiveNu if t >= 1 => {
                let (nu_next, gp_next) =
                    tail_adapt_step(&gp, nu_t, alpha_ess_t, m, t, &cfg.bo.acquisition)?;
                gp = gp_next;
                nu_next
            }
            _ => nu_t,
        };
        let alpha_next = alpha_of_nu(nu_next, d)?.alpha();

        // Step 4 — deterministic-mixture weighting over the full history.
        debug_assert_eq!(cache.len(), (t + 1) * m, "weight-count invariant");
        let log_mix = cache.log_mixture();
        let plain_ws = weight_set_from(&cache.log_pi, &log_mix, TargetKind::Plain)?;
        let adapt_ws = if escorted {
            weight_set_from(&cache.log_pi, &log_mix, TargetKind::Escort(alpha_next))?
        } else {
            plain_ws.clone()
        };

        let z_hat_t = z_estimate(&plain_ws)?;
        let dm_alpha_ess_t = alpha_ess(&adapt_ws, alpha_next);

        // Step 5 — moment matching; weight collapse freezes adaptation for
        // this iteration instead of aborting the run.
        let (mu_next, sigma_next) = match escort_moment_match(&adapt_ws, &cache.samples) {
            Ok(update) => {
                consecutive_skips = 0;
                let sigma = if cfg.amis_scale_correction {
                    if let Mode::AmisFixedNu(nu) = cfg.mode {
                        let scaled: Vec<f64> = update
                            .sigma_next
                            .reconstruct()
                            .iter()
                            .map(|v| v * (nu - 2.0) / nu)
                            .collect();
                        SpdMatrix::cholesky(d, &scaled)?
                    } else {
                        update.sigma_next
                    }
                } else {
                    update.sigma_next
                };
                (update.mu_next, sigma)
            }
            Err(Error::DegenerateWeights(_)) | Err(Error::NotPositiveDefinite { .. }) => {
                consecutive_skips += 1;
                if consecutive_skips >= cfg.iterations {
                    return Err(Error::DegenerateWeights(format!(
                        "adaptation skipped {consecutive_skips} consecutive iterations"
                    )));
                }
                (q_t.mu().to_vec(), q_t.sigma().clone())
            }
            Err(e) => return Err(e),
        };

        rows.push(IterRecord {
            t,
            nu_t,
            alpha_t,
            alpha_ess_t,
            dm_alpha_ess_t,
            z_hat_t,
            mu_norm: q_t.mu().iter().map(|v| v * v).sum::<f64>().sqrt(),
            sigma_trace: q_t.sigma().trace(),
            sigma_logdet: q_t.sigma().log_det(),
            wall_ms: started.elapsed().as_millis() as u64,
        });

        if t < cfg.iterations {
            let q_next = StudentTParams::new(mu_next, sigma_next, nu_next)?;
            cache.push_proposal(&q_next)?;
            history.push(q_next);
        }
    }

    let log_mix = cache.log_mixture();
    let plain_ws = weight_set_from(&cache.log_pi, &log_mix, TargetKind::Plain)?;
    Ok(RunOutput {
        record: RunRecord {
            method: method.to_string(),
            dim: d,
            seed: rng.seed(),
            rows,
        },
        samples: cache.samples,
        plain_weights: plain_ws,
    })
}

/// Runs the escort moment-matching sampler (fixed or adaptive tail).
///
/// # Errors
/// Configuration errors surface before any sampling; a run aborts only if
/// adaptation is skipped for `iterations` consecutive iterations.
pub fn run_ahtis(
    target: &dyn LogTarget,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    match cfg.mode {
        Mode::AmisFixedNu(_) => Err(Error::InvalidConfig(
            "run_ahtis requires an AHTIS mode; use run_amis".into(),
        )),
        Mode::AhtisAdaptiveNu => run_loop(target, cfg, rng, "ahtis-adaptive"),
        Mode::AhtisFixedNu(nu) => run_loop(target, cfg, rng, &format!("ahtis-nu{nu}")),
    }
}

/// Runs the plain moment-matching baseline (requires ν > 2 so the proposal
/// moments exist).
pub fn run_amis(
    target: &dyn LogTarget,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    match cfg.mode {
        Mode::AmisFixedNu(nu) => run_loop(target, cfg, rng, &format!("amis-nu{nu}")),
        _ => Err(Error::InvalidConfig(
            "run_amis requires the AmisFixedNu mode".into(),
        )),
    }
}

/// Per-method aggregate over replications: mean ± std of the final
/// full-history α-ESS and, when the true normalizer is known, the relative
/// √MSE of the evidence estimate.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_reps: usize,
    pub mean_final_alpha_ess: f64,
    pub std_final_alpha_ess: f64,
    pub rel_sqrt_mse_z: Option<f64>,
}

/// Groups records by method label and aggregates their final rows.
pub fn compare_runs(records: &[RunRecord], true_z: Option<f64>) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .iter()
        .map(|method| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| r.method == *method).collect();
            let n = group.len();
            let finals: Vec<f64> = group.iter().map(|r| r.final_row().dm_alpha_ess_t).collect();
            let mean = finals.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            let rel_sqrt_mse_z = true_z.map(|z| {
                let mse = group
                    .iter()
                    .map(|r| {
                        let e = r.final_row().z_hat_t - z;
                        e * e
                    })
                    .sum::<f64>()
                    / n as f64;
                mse.sqrt() / z
            });
            MethodSummary {
                method: method.to_string(),
                n_reps: n,
                mean_final_alpha_ess: mean,
                std_final_alpha_ess: std,
                rel_sqrt_mse_z,
            }
        })
        .collect()
}
