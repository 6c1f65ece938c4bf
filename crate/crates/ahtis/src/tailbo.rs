//! Tail-parameter adaptation by Bayesian optimization.
//!
//! The transformed α-ESS observations y = log(1 − ESS_α/M) are modeled with
//! a Gaussian process (squared-exponential kernel) over ν ∈ [1, ν_max]. The
//! next tail parameter maximizes a confidence-bound acquisition that seeks
//! *low* y (equivalently, high α-ESS / low α-divergence), evaluated on a
//! dense grid. Kernel hyperparameters are either fixed defaults or, when
//! enabled, refit each step by MAP with inverse-Gamma priors.

use crate::mathcore::{log_gamma, SpdMatrix};
use crate::{Error, Result};

/// Gaussian-process surrogate state: observation history plus kernel and
/// noise hyperparameters. Updated functionally; each adaptation step returns
/// a new state.
#[derive(Debug, Clone)]
pub struct GpState {
    observations: Vec<(f64, f64)>,
    lengthscale: f64,
    signal_variance: f64,
    noise_variance: f64,
    nu_max: f64,
    hyperopt_enabled: bool,
}

/// Fixed kernel defaults for synthetic runs (hyperparameter optimization
/// off): lengthscale about a fifth of the search interval.
pub const DEFAULT_LENGTHSCALE: f64 = 2.0;
pub const DEFAULT_SIGNAL_VARIANCE: f64 = 1.0;
pub const DEFAULT_NOISE_VARIANCE: f64 = 0.05;
pub const DEFAULT_NU_MAX: f64 = 10.0;

/// Inverse-Gamma prior (shape, scale) pairs chosen to match the prescribed
/// means/variances: lengthscale and signal variance (mean 5, variance 2),
/// noise variance (mean 3, variance 2).
const PRIOR_LENGTHSCALE: (f64, f64) = (14.5, 67.5);
const PRIOR_SIGNAL: (f64, f64) = (14.5, 67.5);
const PRIOR_NOISE: (f64, f64) = (6.5, 16.5);

impl GpState {
    pub fn new(nu_max: f64, hyperopt_enabled: bool) -> Self {
        GpState {
            observations: Vec::new(),
            lengthscale: DEFAULT_LENGTHSCALE,
            signal_variance: DEFAULT_SIGNAL_VARIANCE,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            nu_max,
            hyperopt_enabled,
        }
    }

    pub fn with_hyperparams(
        mut self,
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !ok(lengthscale) || !ok(signal_variance) || !ok(noise_variance) {
            return Err(Error::Domain("GP hyperparameters must be positive".into()));
        }
        self.lengthscale = lengthscale;
        self.signal_variance = signal_variance;
        self.noise_variance = noise_variance;
        Ok(self)
    }

    pub fn observations(&self) -> &[(f64, f64)] {
        &self.observations
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    pub fn hyperparams(&self) -> (f64, f64, f64) {
        (self.lengthscale, self.signal_variance, self.noise_variance)
    }

    pub fn hyperopt_enabled(&self) -> bool {
        self.hyperopt_enabled
    }

    /// Records one (ν, y) observation; ν is clamped into [1, ν_max].
    pub fn push_observation(&mut self, nu: f64, y: f64) {
        self.observations.push((nu.clamp(1.0, self.nu_max), y));
    }
}

impl Default for GpState {
    fn default() -> Self {
        Self::new(DEFAULT_NU_MAX, false)
    }
}

/// Acquisition configuration: the β multiplier (1.0 for synthetic runs,
/// 1.5 for noisier real-data objectives) and the search-grid resolution.
#[derive(Debug, Clone, Copy)]
pub struct AcquisitionConfig {
    pub beta_multiplier: f64,
    pub search_grid_size: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            beta_multiplier: 1.0,
            search_grid_size: 512,
        }
    }
}

/// Monotone transform of the α-ESS into the GP observation scale:
/// y = log(1 − ESS_α/M), with the ratio clamped to [0, 1 − 1e-12] so a
/// perfect ESS maps to log(1e-12) rather than −∞.
pub fn transform_ess(alpha_ess_value: f64, m: usize) -> f64 {
    let ratio = (alpha_ess_value / m as f64).clamp(0.0, 1.0);
    (1.0 - ratio).max(1e-12).ln()
}

fn k_se(a: f64, b: f64, lengthscale: f64, signal_variance: f64) -> f64 {
    let z = (a - b) / lengthscale;
    signal_variance * (-0.5 * z * z).exp()
}

/// Cholesky of K + σ²I with escalating jitter (1e-10·σ_f² up to 1e-4·σ_f²).
fn gram_cholesky(
    nus: &[f64],
    lengthscale: f64,
    signal_variance: f64,
    noise_variance: f64,
) -> Result<SpdMatrix> {
    let n = nus.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = k_se(nus[i], nus[j], lengthscale, signal_variance);
        }
        k[i * n + i] += noise_variance;
    }
    if let Ok(l) = SpdMatrix::cholesky(n, &k) {
        return Ok(l);
    }
    let mut eps = 1e-10 * signal_variance;
    let max = 1e-4 * signal_variance;
    while eps <= max * (1.0 + 1e-12) {
        let mut jittered = k.clone();
        for i in 0..n {
            jittered[i * n + i] += eps;
        }
        if let Ok(l) = SpdMatrix::cholesky(n, &jittered) {
            return Ok(l);
        }
        eps *= 10.0;
    }
    Err(Error::GramNotPd)
}

/// GP regression posterior (mean, variance) at `nu_query`, with a zero
/// prior mean. With no observations the prior (0, σ_f²) is returned.
///
/// # Errors
/// [`Error::GramNotPd`] if the gram matrix cannot be factored even with the
/// maximum jitter; the caller should reset hyperparameters to defaults.
pub fn gp_posterior(state: &GpState, nu_query: f64) -> Result<(f64, f64)> {
    let n = state.observations.len();
    if n == 0 {
        return Ok((0.0, state.signal_variance));
    }
    let nus: Vec<f64> = state.observations.iter().map(|o| o.0).collect();
    let ys: Vec<f64> = state.observations.iter().map(|o| o.1).collect();
    let l = gram_cholesky(
        &nus,
        state.lengthscale,
        state.signal_variance,
        state.noise_variance,
    )?;
    let kq: Vec<f64> = nus
        .iter()
        .map(|&nu| k_se(nu_query, nu, state.lengthscale, state.signal_variance))
        .collect();
    // mean = kᵀ (K+σ²I)⁻¹ y via two triangular solves
    let w = l.solve_lower_transpose(&l.solve_lower(&ys)?)?;
    let mean = kq.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    // variance = k(ν,ν) − kᵀ (K+σ²I)⁻¹ k = σ_f² − ‖L⁻¹k‖²
    let v = l.solve_lower(&kq)?;
    let var = state.signal_variance - v.iter().map(|x| x * x).sum::<f64>();
    Ok((mean, var.max(0.0)))
}

/// Confidence-bound schedule β_t = multiplier · √(2 ln((t²+1)|V|/√(2π)))
/// with |V| = ν_max − 1, nondecreasing in t.
pub fn beta_schedule(t: usize, nu_max: f64, multiplier: f64) -> f64 {
    let t = t as f64;
    let volume = nu_max - 1.0;
    let inner = (t * t + 1.0) * volume / (2.0 * std::f64::consts::PI).sqrt();
    multiplier * (2.0 * inner.ln()).sqrt()
}

/// Maximizes the acquisition −μ_GP(ν) + β_t^{1/2}·σ_GP(ν) over a uniform
/// grid on [1, ν_max]; low predicted y (high α-ESS) and high uncertainty
/// both attract the search. Ties break toward smaller ν.
pub fn propose_nu(state: &GpState, t: usize, cfg: &AcquisitionConfig) -> Result<f64> {
    let grid = cfg.search_grid_size.max(2);
    let beta = beta_schedule(t, state.nu_max, cfg.beta_multiplier);
    let explore = beta.sqrt();
    let mut best_nu = 1.0;
    let mut best_acq = f64::NEG_INFINITY;
    for i in 0..grid {
        let nu = 1.0 + (state.nu_max - 1.0) * i as f64 / (grid - 1) as f64;
        let (mean, var) = gp_posterior(state, nu)?;
        let acq = -mean + explore * var.sqrt();
        if acq > best_acq {
            best_acq = acq;
            best_nu = nu;
        }
    }
    Ok(best_nu)
}

fn log_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln()
        - log_gamma(shape).expect("positive shape")
        - (shape + 1.0) * x.ln()
        - scale / x
}

/// Log marginal likelihood −½ yᵀ(K+σ²I)⁻¹y − ½ ln det(2π(K+σ²I)) plus the
/// inverse-Gamma log priors on (l, σ_f², σ²).
fn map_objective(nus: &[f64], ys: &[f64], lengthscale: f64, sf2: f64, s2: f64) -> f64 {
    let n = nus.len();
    let l = match gram_cholesky(nus, lengthscale, sf2, s2) {
        Ok(l) => l,
        Err(_) => return f64::NEG_INFINITY,
    };
    let alpha = match l.solve_lower(ys) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    let quad: f64 = alpha.iter().map(|v| v * v).sum();
    let logdet = l.log_det() + n as f64 * (2.0 * std::f64::consts::PI).ln();
    let lml = -0.5 * quad - 0.5 * logdet;
    lml + log_inv_gamma(lengthscale, PRIOR_LENGTHSCALE.0, PRIOR_LENGTHSCALE.1)
        + log_inv_gamma(sf2, PRIOR_SIGNAL.0, PRIOR_SIGNAL.1)
        + log_inv_gamma(s2, PRIOR_NOISE.0, PRIOR_NOISE.1)
}

/// Nelder–Mead in R³ (maximization), deterministic, with an evaluation cap.
fn nelder_mead_max<F: Fn(&[f64; 3]) -> f64>(
    f: &F,
    start: [f64; 3],
    max_evals: usize,
) -> ([f64; 3], f64) {
    let g = |x: &[f64; 3]| -f(x); // minimize -objective
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, g(&start)));
    for i in 0..3 {
        let mut v = start;
        v[i] += 0.5;
        simplex.push((v, g(&v)));
    }
    let mut evals = 4;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[3].1 - simplex[0].1;
        if spread.abs() < 1e-10 {
            break;
        }
        let best = simplex[0].0;
        let worst = simplex[3].0;
        let mut centroid = [0.0; 3];
        for s in &simplex[..3] {
            for (c, v) in centroid.iter_mut().zip(&s.0) {
                *c += v / 3.0;
            }
        }
        let refl = std::array::from_fn(|i| centroid[i] + (centroid[i] - worst[i]));
        let f_refl = g(&refl);
        evals += 1;
        if f_refl < simplex[0].1 {
            let exp = std::array::from_fn(|i| centroid[i] + 2.0 * (centroid[i] - worst[i]));
            let f_exp = g(&exp);
            evals += 1;
            simplex[3] = if f_exp < f_refl {
                (exp, f_exp)
            } else {
                (refl, f_refl)
            };
        } else if f_refl < simplex[2].1 {
            simplex[3] = (refl, f_refl);
        } else {
            let contr = std::array::from_fn(|i| centroid[i] + 0.5 * (worst[i] - centroid[i]));
            let f_contr = g(&contr);
            evals += 1;
            if f_contr < simplex[3].1 {
                simplex[3] = (contr, f_contr);
            } else {
                // shrink toward the best vertex
                for s in simplex.iter_mut().skip(1) {
                    for (v, b) in s.0.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    s.1 = g(&s.0);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    (simplex[0].0, -simplex[0].1)
}

/// MAP refit of (lengthscale, σ_f², σ²) by multi-start Nelder–Mead in log
/// space. A no-op below three observations; falls back to the prior means
/// if every start fails.
pub fn hyperopt_map(state: &GpState) -> GpState {
    if state.observations.len() < 3 || !state.hyperopt_enabled {
        return state.clone();
    }
    let nus: Vec<f64> = state.observations.iter().map(|o| o.0).collect();
    let ys: Vec<f64> = state.observations.iter().map(|o| o.1).collect();
    let obj = |p: &[f64; 3]| map_objective(&nus, &ys, p[0].exp(), p[1].exp(), p[2].exp());

    let current = [
        state.lengthscale.ln(),
        state.signal_variance.ln(),
        state.noise_variance.ln(),
    ];
    let prior = [5.0_f64.ln(), 5.0_f64.ln(), 3.0_f64.ln()];
    let offsets: [[f64; 3]; 6] = [
        [0.7, 0.0, 0.0],
        [-0.7, 0.0, 0.0],
        [0.0, 0.7, -0.7],
        [0.0, -0.7, 0.7],
        [0.7, 0.7, 0.7],
        [-0.7, -0.7, -0.7],
    ];
    let mut starts = vec![current, prior];
    for off in offsets {
        starts.push(std::array::from_fn(|i| prior[i] + off[i]));
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for s in starts {
        let (x, v) = nelder_mead_max(&obj, s, 200);
        if v.is_finite() && best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((x, v));
        }
    }
    let mut next = state.clone();
    match best {
        Some((x, _)) => {
            next.lengthscale = x[0].exp();
            next.signal_variance = x[1].exp();
            next.noise_variance = x[2].exp();
        }
        None => {
            next.lengthscale = 5.0;
            next.signal_variance = 5.0;
            next.noise_variance = 3.0;
        }
    }
    next
}

/// One tail-adaptation step: record (ν_t, transformed α-ESS), optionally
/// refit hyperparameters, and propose ν_{t+1}. Deterministic given its
/// inputs. Call only from iteration t ≥ 1 (the first iteration keeps ν_0).
pub fn tail_adapt_step(
    state: &GpState,
    nu_t: f64,
    alpha_ess_t: f64,
    m: usize,
    t: usize,
    cfg: &AcquisitionConfig,
) -> Result<(f64, GpState)> {
    let mut next = state.clone();
    next.push_observation(nu_t, transform_ess(alpha_ess_t, m));
    if next.hyperopt_enabled {
        next = hyperopt_map(&next);
    }
    let nu_next = match propose_nu(&next, t, cfg) {
        Ok(v) => v,
        Err(Error::GramNotPd) => {
            // pathological hyperparameters: reset to defaults and retry once
            next.lengthscale = DEFAULT_LENGTHSCALE;
            next.signal_variance = DEFAULT_SIGNAL_VARIANCE;
            next.noise_variance = DEFAULT_NOISE_VARIANCE;
            propose_nu(&next, t, cfg)?
        }
        Err(e) => return Err(e),
    };
    Ok((nu_next, next))
}
