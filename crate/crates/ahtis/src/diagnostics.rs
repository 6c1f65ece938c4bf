//! Importance-sampling weights and their diagnostics.
//!
//! Weights are always built from log densities and normalized with one
//! log-sum-exp pass over the *entire* sample collection, so escort exponents
//! on heavy-tailed targets cannot overflow and the normalized weights sum to
//! one across every (iteration, sample) pair. The module also provides the
//! deterministic-mixture weighting used to recycle all past samples, the
//! ESS and α-ESS, the discrete α-divergence, the self-normalized divergence
//! estimator with its CLT variance, and the evidence estimator.

use crate::mathcore::{log_mean_exp, log_sum_exp};
use crate::studentt::StudentTParams;
use crate::{Error, Result};

/// Which unnormalized target the weights point at: the plain target density
/// or its escort power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    Plain,
    Escort(f64),
}

/// One iteration's draws, tagged with the index of the proposal that
/// generated them.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub proposal_index: usize,
    pub points: Vec<Vec<f64>>,
}

/// Ordered list of the proposals used so far; the deterministic-mixture
/// denominator is their equal-weight mixture.
#[derive(Debug, Clone, Default)]
pub struct ProposalHistory {
    proposals: Vec<StudentTParams>,
}

impl ProposalHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, p: StudentTParams) -> Result<()> {
        if let Some(first) = self.proposals.first() {
            if p.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    got: p.dim(),
                });
            }
        }
        self.proposals.push(p);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn get(&self, k: usize) -> &StudentTParams {
        &self.proposals[k]
    }

    /// Log of the equal-weight mixture density at `x`.
    pub fn log_mixture(&self, x: &[f64]) -> Result<f64> {
        if self.proposals.is_empty() {
            return Err(Error::DegenerateWeights("empty proposal history".into()));
        }
        let logs: Vec<f64> = self
            .proposals
            .iter()
            .map(|q| q.log_pdf(x))
            .collect::<Result<_>>()?;
        Ok(log_sum_exp(&logs) - (self.proposals.len() as f64).ln())
    }
}

/// A set of importance weights over a sample collection, normalized jointly.
#[derive(Debug, Clone)]
pub struct WeightSet {
    log_unnormalized: Vec<f64>,
    normalized: Vec<f64>,
    target_kind: TargetKind,
    log_sum_unnormalized: f64,
}

impl WeightSet {
    /// Normalizes a vector of log weights. Entries of `-inf` are allowed
    /// (zero weight); the set is degenerate only if *all* mass vanishes.
    pub fn from_log_weights(log_w: Vec<f64>, target_kind: TargetKind) -> Result<Self> {
        if log_w.is_empty() {
            return Err(Error::DegenerateWeights("no weights".into()));
        }
        if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::DegenerateWeights(
                "non-finite log weight encountered".into(),
            ));
        }
        let lse = log_sum_exp(&log_w);
        if !lse.is_finite() {
            return Err(Error::DegenerateWeights(
                "all unnormalized weights are zero".into(),
            ));
        }
        let mut normalized: Vec<f64> = log_w.iter().map(|v| (v - lse).exp()).collect();
        let s: f64 = normalized.iter().sum();
        for w in &mut normalized {
            *w /= s;
        }
        Ok(WeightSet {
            log_unnormalized: log_w,
            normalized,
            target_kind,
            log_sum_unnormalized: lse,
        })
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    /// Normalized weights on the simplex.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// Log of the unnormalized weights (the linear-space values may not be
    /// representable for escort targets).
    pub fn log_unnormalized(&self) -> &[f64] {
        &self.log_unnormalized
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    /// log Σ w̃, the quantity behind the evidence estimator.
    pub fn log_sum_unnormalized(&self) -> f64 {
        self.log_sum_unnormalized
    }
}

/// Deterministic-mixture log weights: each sample x receives
/// w̃ = target(x) / ((1/K) Σ_k q_k(x)), with the target either the plain
/// log density or α times it (escort). Normalization is joint over all
/// batches.
///
/// # Errors
/// [`Error::DegenerateWeights`] if a batch references a proposal not in the
/// history or if every weight vanishes.
pub fn dm_log_weights<F>(
    log_target: F,
    history: &ProposalHistory,
    batches: &[SampleBatch],
    kind: TargetKind,
) -> Result<WeightSet>
where
    F: Fn(&[f64]) -> f64,
{
    let mut log_w = Vec::new();
    for batch in batches {
        if batch.proposal_index >= history.len() {
            return Err(Error::DegenerateWeights(format!(
                "batch references proposal {} but history has {}",
                batch.proposal_index,
                history.len()
            )));
        }
        for x in &batch.points {
            let lt = match kind {
                TargetKind::Plain => log_target(x),
                TargetKind::Escort(alpha) => alpha * log_target(x),
            };
            log_w.push(lt - history.log_mixture(x)?);
        }
    }
    WeightSet::from_log_weights(log_w, kind)
}

/// Effective sample size 1/Σ w̄², in [1, N].
pub fn ess(w: &WeightSet) -> f64 {
    1.0 / w.normalized().iter().map(|v| v * v).sum::<f64>()
}

/// Generalized effective sample size (Σ w̄^α)^{1/(1−α)}, computed in log
/// space. Equals N for uniform weights, 1 for a one-hot weight, and reduces
/// to [`ess`] at α = 2.
pub fn alpha_ess(w: &WeightSet, alpha: f64) -> f64 {
    log_alpha_power_sum(w, alpha)
        .exp()
        .powf(1.0 / (1.0 - alpha))
}

/// log Σ w̄^α.
fn log_alpha_power_sum(w: &WeightSet, alpha: f64) -> f64 {
    let logs: Vec<f64> = w
        .normalized()
        .iter()
        .map(|v| {
            if *v > 0.0 {
                alpha * v.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    log_sum_exp(&logs)
}

/// Discrete α-divergence between the normalized weights and the uniform
/// weights, through the α-ESS:
/// (M^{α−1}/(α(α−1))) (ESS_α^{1−α} − M^{1−α}).
pub fn discrete_alpha_divergence(w: &WeightSet, alpha: f64) -> f64 {
    let m = w.len() as f64;
    let ess_pow = log_alpha_power_sum(w, alpha).exp(); // = ESS_α^{1-α}
    m.powf(alpha - 1.0) / (alpha * (alpha - 1.0)) * (ess_pow - m.powf(1.0 - alpha))
}

/// Self-normalized estimate of the α-divergence D_α(π, q) from i.i.d.
/// samples of q, with a plug-in estimate of its asymptotic variance.
#[derive(Debug, Clone, Copy)]
pub struct SnisDivergence {
    pub estimate: f64,
    /// σ̂² such that the estimator is approximately N(D, σ̂²/M).
    pub clt_variance: f64,
}

/// Estimates D_α(π, q) = (E_q[(π̃/q)^α]/Z_π^α − 1)/(α(α−1)) by replacing
/// both integrals with Monte Carlo counterparts over the same samples.
///
/// The variance is the delta-method variance of this ratio of sample means
/// (the estimator is a smooth function of the two means), which keeps the
/// normal interval usable; all moments are computed in log space and scaled
/// by the evidence estimate so the result is invariant to rescaling π̃.
pub fn snis_alpha_divergence<F>(
    log_target_unnorm: F,
    q: &StudentTParams,
    samples: &[Vec<f64>],
    alpha: f64,
) -> Result<SnisDivergence>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::DegenerateWeights("no samples".into()));
    }
    let log_r: Vec<f64> = samples
        .iter()
        .map(|x| Ok(log_target_unnorm(x) - q.log_pdf(x)?))
        .collect::<Result<_>>()?;
    if log_r.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::DegenerateWeights("non-finite log ratio".into()));
    }
    let lb = log_mean_exp(&log_r);
    if !lb.is_finite() {
        return Err(Error::DegenerateWeights("all density ratios vanish".into()));
    }
    // Moments of the evidence-normalized ratio w = (π̃/q)/Ẑ, so mean(w) = 1.
    let norm: Vec<f64> = log_r.iter().map(|v| v - lb).collect();
    let mom = |p: f64| -> f64 {
        let scaled: Vec<f64> = norm.iter().map(|v| p * v).collect();
        log_mean_exp(&scaled).exp()
    };
    let a = mom(alpha);
    let c = mom(2.0 * alpha);
    let e = mom(alpha + 1.0);
    let f = mom(2.0);
    let aa = alpha * (alpha - 1.0);
    let estimate = (a - 1.0) / aa;
    // Delta method for g(u̅, v̅) = u̅/v̅^α at (a, 1): Var[u] + α²a²Var[v]
    // − 2αa·Cov[u, v], all per-sample.
    let var =
        ((c - a * a) + alpha * alpha * a * a * (f - 1.0) - 2.0 * alpha * a * (e - a)) / (aa * aa);
    Ok(SnisDivergence {
        estimate,
        clt_variance: var.max(0.0),
    })
}

/// Evidence estimate Ẑ = (1/N) Σ w̃ from a plain-target weight set.
///
/// With deterministic-mixture denominators this is the standard
/// multiple-importance-sampling estimator of the normalizing constant.
pub fn z_estimate(w: &WeightSet) -> Result<f64> {
    match w.target_kind() {
        TargetKind::Plain => Ok((w.log_sum_unnormalized() - (w.len() as f64).ln()).exp()),
        TargetKind::Escort(_) => Err(Error::InvalidConfig(
            "z_estimate requires plain-target weights".into(),
        )),
    }
}

/// Self-normalized expectation Σ w̄ h(x).
pub fn snis_expectation(w: &WeightSet, h_values: &[f64]) -> Result<f64> {
    if h_values.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: h_values.len(),
        });
    }
    Ok(w.normalized()
        .iter()
        .zip(h_values)
        .map(|(wi, hi)| wi * hi)
        .sum())
}
