//! Escort moment matching: the location/scale update of the sampling loop.
//!
//! The update sets the proposal's location to the weighted sample mean and
//! its scale to the weighted sample covariance, with the weights pointing at
//! the escort target. When weights collapse early the raw covariance can be
//! numerically indefinite, so a diagonal jitter repair runs before the
//! result is accepted; if too little weight mass remains the update is
//! refused outright and the caller keeps the previous parameters.

use crate::diagnostics::{ess, WeightSet};
use crate::mathcore::SpdMatrix;
use crate::{Error, Result};

/// Result of one moment-matching step.
#[derive(Debug, Clone)]
pub struct MomentUpdate {
    pub mu_next: Vec<f64>,
    pub sigma_next: SpdMatrix,
    /// True iff the raw weighted covariance failed Cholesky and was repaired.
    pub repaired: bool,
    /// Gershgorin lower bound on the smallest eigenvalue of the raw matrix;
    /// diagnostic only.
    pub raw_min_eigen_estimate: f64,
}

/// Weighted mean and raw (possibly indefinite) covariance, row-major.
/// Weights must be jointly normalized; samples are rows.
pub fn weighted_moments(weights: &WeightSet, samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: samples.len(),
        });
    }
    let d = samples
        .first()
        .ok_or_else(|| Error::DegenerateWeights("no samples".into()))?
        .len();
    let w = weights.normalized();
    let mut mu = vec![0.0; d];
    for (wi, x) in w.iter().zip(samples) {
        for j in 0..d {
            mu[j] += wi * x[j];
        }
    }
    let mut sigma = vec![0.0; d * d];
    for (wi, x) in w.iter().zip(samples) {
        for i in 0..d {
            let di = x[i] - mu[i];
            for j in 0..=i {
                sigma[i * d + j] += wi * di * (x[j] - mu[j]);
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            sigma[i * d + j] = sigma[j * d + i];
        }
    }
    Ok((mu, sigma))
}

fn gershgorin_lower_bound(sym: &[f64], d: usize) -> f64 {
    (0..d)
        .map(|i| {
            let off: f64 = (0..d)
                .filter(|j| *j != i)
                .map(|j| sym[i * d + j].abs())
                .sum();
            sym[i * d + i] - off
        })
        .fold(f64::INFINITY, f64::min)
}

/// Factors a raw symmetric matrix, adding escalating diagonal jitter
/// ε·max(tr/d, 1)·I with ε = 1e-8 … 1e-2 if the plain factorization fails.
/// Returns the factor and whether repair was needed.
///
/// # Errors
/// [`Error::NotPositiveDefinite`] once the largest jitter is exhausted; the
/// caller should fall back to its previous scale matrix.
pub fn repair_spd(raw: &[f64], d: usize) -> Result<(SpdMatrix, bool)> {
    if let Ok(l) = SpdMatrix::cholesky(d, raw) {
        return Ok((l, false));
    }
    let trace: f64 = (0..d).map(|i| raw[i * d + i]).sum();
    let scale = (trace / d as f64).max(1.0); // floor keeps an all-zero matrix repairable
    let mut eps = 1e-8;
    while eps <= 1e-2 + 1e-15 {
        let mut jittered = raw.to_vec();
        for i in 0..d {
            jittered[i * d + i] += eps * scale;
        }
        if let Ok(l) = SpdMatrix::cholesky(d, &jittered) {
            return Ok((l, true));
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        index: 0,
        pivot: gershgorin_lower_bound(raw, d),
    })
}

/// One escort moment-matching step over the full weighted sample history.
///
/// # Errors
/// [`Error::DegenerateWeights`] when fewer than d+1 effective samples
/// remain (the caller keeps the previous parameters), and
/// [`Error::NotPositiveDefinite`] when even the repaired covariance fails.
pub fn escort_moment_match(weights: &WeightSet, samples: &[Vec<f64>]) -> Result<MomentUpdate> {
    let d = samples
        .first()
        .ok_or_else(|| Error::DegenerateWeights("no samples".into()))?
        .len();
    let effective = ess(weights);
    if effective < (d + 1) as f64 {
        return Err(Error::DegenerateWeights(format!(
            "effective sample size {effective:.2} below d+1 = {}",
            d + 1
        )));
    }
    let (mu, raw) = weighted_moments(weights, samples)?;
    let min_eig = gershgorin_lower_bound(&raw, d);
    let (sigma, repaired) = repair_spd(&raw, d)?;
    Ok(MomentUpdate {
        mu_next: mu,
        sigma_next: sigma,
        repaired,
        raw_min_eigen_estimate: min_eig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::TargetKind;

    fn ws_from(probs: &[f64]) -> WeightSet {
        let logs: Vec<f64> = probs
            .iter()
            .map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            .collect();
        WeightSet::from_log_weights(logs, TargetKind::Escort(1.5)).unwrap()
    }

    #[test]
    fn uniform_pm_one() {
        // uniform weights on {-1, +1} in d = 1: mu = 0, sigma = 1
        let ws = ws_from(&[0.5, 0.5]);
        let samples = vec![vec![-1.0], vec![1.0]];
        let up = escort_moment_match(&ws, &samples).unwrap();
        assert!(up.mu_next[0].abs() < 1e-15);
        assert!((up.sigma_next.reconstruct()[0] - 1.0).abs() < 1e-14);
        assert!(!up.repaired);
    }

    #[test]
    fn one_hot_weight_is_refused_by_the_ess_guard() {
        let ws = ws_from(&[1.0, 0.0, 0.0]);
        let samples = vec![vec![2.0], vec![0.0], vec![1.0]];
        let err = escort_moment_match(&ws, &samples).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeights(_)));
    }

    #[test]
    fn degenerate_covariance_gets_jitter_floor() {
        // All mass on a single point value: mu = x0 and raw sigma = 0, which
        // must be repaired with the absolute jitter floor.
        let ws = ws_from(&[0.25; 4]);
        let samples = vec![vec![3.0, -1.0]; 4];
        let (mu, raw) = weighted_moments(&ws, &samples).unwrap();
        assert_eq!(mu, vec![3.0, -1.0]);
        assert!(raw.iter().all(|v| v.abs() < 1e-30));
        let (sigma, repaired) = repair_spd(&raw, 2).unwrap();
        assert!(repaired);
        let rec = sigma.reconstruct();
        assert!((rec[0] - 1e-8).abs() < 1e-12 && (rec[3] - 1e-8).abs() < 1e-12);
    }

    #[test]
    fn ess_guard_threshold() {
        // d = 2 needs ESS >= 3; two equal weights give ESS = 2
        let ws = ws_from(&[0.5, 0.5, 0.0, 0.0]);
        let samples = vec![vec![0.0, 0.0]; 4];
        assert!(escort_moment_match(&ws, &samples).is_err());
    }

    #[test]
    fn repair_falls_through_to_error() {
        // A matrix so indefinite that even 1e-2 jitter cannot fix it.
        let raw = vec![1.0, 5.0, 5.0, 1.0]; // eigenvalues 6, -4
        let err = repair_spd(&raw, 2).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn affine_equivariance() {
        // x -> A x + b maps mu -> A mu + b and Sigma -> A Sigma Aᵀ
        let ws = ws_from(&[0.1, 0.2, 0.3, 0.25, 0.15]);
        let samples = vec![
            vec![0.3, -1.2],
            vec![1.0, 0.4],
            vec![-0.7, 2.0],
            vec![0.05, 0.5],
            vec![2.2, -0.3],
        ];
        let a = [1.5, 0.3, -0.2, 0.8]; // invertible 2x2
        let b = [1.0, -2.0];
        let mapped: Vec<Vec<f64>> = samples
            .iter()
            .map(|x| {
                vec![
                    a[0] * x[0] + a[1] * x[1] + b[0],
                    a[2] * x[0] + a[3] * x[1] + b[1],
                ]
            })
            .collect();
        let (mu, sig) = weighted_moments(&ws, &samples).unwrap();
        let (mu2, sig2) = weighted_moments(&ws, &mapped).unwrap();
        let expect_mu = [
            a[0] * mu[0] + a[1] * mu[1] + b[0],
            a[2] * mu[0] + a[3] * mu[1] + b[1],
        ];
        for (x, y) in mu2.iter().zip(expect_mu.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        // A Sigma Aᵀ
        let am = [
            a[0] * sig[0] + a[1] * sig[2],
            a[0] * sig[1] + a[1] * sig[3],
            a[2] * sig[0] + a[3] * sig[2],
            a[2] * sig[1] + a[3] * sig[3],
        ];
        let expect_sig = [
            am[0] * a[0] + am[1] * a[1],
            am[0] * a[2] + am[1] * a[3],
            am[2] * a[0] + am[3] * a[1],
            am[2] * a[2] + am[3] * a[3],
        ];
        for (x, y) in sig2.iter().zip(expect_sig.iter()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn output_always_factors() {
        // random-ish weights and samples; post-repair result must factor
        let ws = ws_from(&[0.3, 0.3, 0.2, 0.1, 0.1]);
        let samples = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.2],
            vec![0.4, -0.8],
            vec![0.1, 0.1],
        ];
        let up = escort_moment_match(&ws, &samples).unwrap();
        assert!(SpdMatrix::cholesky(2, &up.sigma_next.reconstruct()).is_ok());
    }
}
