//! The multivariate Student-t family.
//!
//! Provides the log density and normalizing constant, sampling through the
//! Gaussian scale-mixture representation (valid for every ν > 0), the escort
//! transform (the normalized α-th power of the density, again Student-t),
//! the Rényi entropy in closed form, and the closed-form optimal Student-t
//! approximation of a Student-t target together with the α-divergence value
//! it attains. The latter two serve as analytic oracles for the sampler.

use crate::mathcore::{log_gamma, RngStream, SpdMatrix};
use crate::{Error, Result};

/// Parameters of a multivariate Student-t distribution: location `mu`,
/// scale matrix `sigma` (held through its Cholesky factor), and degrees of
/// freedom `nu` > 0.
#[derive(Debug, Clone)]
pub struct StudentTParams {
    mu: Vec<f64>,
    sigma: SpdMatrix,
    nu: f64,
}

impl StudentTParams {
    pub fn new(mu: Vec<f64>, sigma: SpdMatrix, nu: f64) -> Result<Self> {
        if nu <= 0.0 || !nu.is_finite() {
            return Err(Error::Domain(format!("nu must be positive, got {nu}")));
        }
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                got: mu.len(),
            });
        }
        Ok(StudentTParams { mu, sigma, nu })
    }

    /// Standard Student-t in `dim` dimensions: mu = 0, sigma = I.
    pub fn standard(dim: usize, nu: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], SpdMatrix::identity(dim), nu)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// ln Z with Z = Γ(ν/2)/Γ((ν+d)/2) · (ν^d π^d det Σ)^{1/2}, the constant
    /// that normalizes (1 + m/ν)^{-(ν+d)/2}.
    pub fn log_norm_const(&self) -> f64 {
        let d = self.dim() as f64;
        let nu = self.nu;
        log_gamma(nu / 2.0).expect("nu > 0 by construction")
            - log_gamma((nu + d) / 2.0).expect("positive argument")
            + 0.5 * d * (nu * std::f64::consts::PI).ln()
            + 0.5 * self.sigma.log_det()
    }

    /// Log density at `x`.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let m = self.sigma.mahalanobis(x, &self.mu)?;
        let d = self.dim() as f64;
        Ok(-0.5 * (self.nu + d) * (m / self.nu).ln_1p() - self.log_norm_const())
    }

    /// Draws one sample x = mu + L·z·√(ν/u) with z ~ N(0, I) and u ~ χ²_ν.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let z = rng.standard_normal_vec(self.dim());
        let u = rng.chi2(self.nu).expect("nu > 0 by construction");
        let scale = (self.nu / u).sqrt();
        let lz = self.sigma.lower_mul(&z);
        self.mu
            .iter()
            .zip(lz.iter())
            .map(|(m, v)| m + v * scale)
            .collect()
    }

    /// Draws `n` samples as rows.
    pub fn sample_n(&self, rng: &mut RngStream, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Escort exponent α = 1 + 2/(ν_outer + d), always in (1, 3].
///
/// Raising a density to the power α and renormalizing yields its *escort*
/// version, which has lighter tails; this particular α makes the escort of a
/// Student-t with the same outer ν a Student-t with two extra degrees of
/// freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscortSpec {
    alpha: f64,
}

impl EscortSpec {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Builds the escort exponent from the tail parameter: α(ν) = 1 + 2/(ν + d).
///
/// # Errors
/// [`Error::Domain`] for ν ≤ 0 or d = 0.
pub fn alpha_of_nu(nu: f64, d: usize) -> Result<EscortSpec> {
    if nu <= 0.0 || !nu.is_finite() {
        return Err(Error::Domain(format!(
            "alpha_of_nu requires nu > 0, got {nu}"
        )));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(EscortSpec {
        alpha: 1.0 + 2.0 / (nu + d as f64),
    })
}

/// Parameters of the escort of `p` under `spec`:
/// ν^(α) = ν_q + (α−1)(ν_q + d), μ unchanged, Σ^(α) = (ν_q/ν^(α))·Σ_q.
pub fn escort_params(p: &StudentTParams, spec: EscortSpec) -> StudentTParams {
    let d = p.dim() as f64;
    let nu_alpha = p.nu + (spec.alpha - 1.0) * (p.nu + d);
    let sigma_alpha = p
        .sigma
        .scaled(p.nu / nu_alpha)
        .expect("ratio of positive quantities");
    StudentTParams {
        mu: p.mu.clone(),
        sigma: sigma_alpha,
        nu: nu_alpha,
    }
}

/// Rényi entropy H_α(p) = (ln Z_{ν^(α),Σ^(α)} − α ln Z_{ν_q,Σ_q}) / (1 − α),
/// evaluated in closed form through the escort parameters.
pub fn renyi_entropy(p: &StudentTParams, spec: EscortSpec) -> f64 {
    let esc = escort_params(p, spec);
    (esc.log_norm_const() - spec.alpha * p.log_norm_const()) / (1.0 - spec.alpha)
}

/// The Student-t with tail `nu` that minimizes the α(ν)-divergence to a
/// Student-t `target`: location μ_π and scale ν_π/(ν^(α) − 2)·Σ_π, where
/// ν^(α) is the escort tail of the target.
///
/// # Errors
/// [`Error::InfeasibleEscortMoments`] when ν^(α) ≤ 2 (the escort of the
/// target has no finite second-order moments, so no minimizer exists).
pub fn optimal_approx_of_student_target(
    target: &StudentTParams,
    nu: f64,
) -> Result<StudentTParams> {
    let d = target.dim();
    let spec = alpha_of_nu(nu, d)?;
    let nu_alpha = target.nu + (spec.alpha - 1.0) * (target.nu + d as f64);
    if nu_alpha <= 2.0 {
        return Err(Error::InfeasibleEscortMoments { nu_alpha });
    }
    let sigma_star = target.sigma.scaled(target.nu / (nu_alpha - 2.0))?;
    StudentTParams::new(target.mu.clone(), sigma_star, nu)
}

/// The α(ν)-divergence between a Student-t `target` and its optimal
/// approximation at tail `nu`:
/// D = (exp((α−1)(H_α(q*) − H_α(π))) − 1) / (α(α−1)).
///
/// Zero exactly at ν = ν_π, strictly positive elsewhere.
pub fn optimal_alpha_divergence(target: &StudentTParams, nu: f64) -> Result<f64> {
    let spec = alpha_of_nu(nu, target.dim())?;
    let q_star = optimal_approx_of_student_target(target, nu)?;
    let gap = renyi_entropy(&q_star, spec) - renyi_entropy(target, spec);
    let alpha = spec.alpha();
    Ok(((alpha - 1.0) * gap).exp_m1() / (alpha * (alpha - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_real_line;

    const LN_PI: f64 = 1.1447298858494002;

    fn std1(nu: f64) -> StudentTParams {
        StudentTParams::standard(1, nu).unwrap()
    }

    #[test]
    fn alpha_of_nu_examples() {
        assert!((alpha_of_nu(1.0, 1).unwrap().alpha() - 2.0).abs() < 1e-15);
        assert!((alpha_of_nu(3.0, 5).unwrap().alpha() - 1.25).abs() < 1e-15);
        assert!(alpha_of_nu(0.0, 1).is_err());
        // monotone decreasing toward 1
        let a1 = alpha_of_nu(10.0, 2).unwrap().alpha();
        let a2 = alpha_of_nu(100.0, 2).unwrap().alpha();
        let a3 = alpha_of_nu(1e9, 2).unwrap().alpha();
        assert!(a1 > a2 && a2 > a3 && a3 > 1.0);
    }

    #[test]
    fn cauchy_norm_const_and_pdf() {
        let p = std1(1.0);
        assert!((p.log_norm_const() - LN_PI).abs() < 1e-12);
        assert!((p.log_pdf(&[0.0]).unwrap() + LN_PI).abs() < 1e-12);
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        assert!((p.log_pdf(&[1.0]).unwrap() + ln_2pi).abs() < 1e-12);
    }

    #[test]
    fn norm_const_nu3() {
        // Z = Γ(1.5)⁻¹ Γ(1.5) √(3π)… cross-checked by quadrature of the
        // unnormalized density (1 + x²/3)^{-2}, whose integral is √3·π/2.
        let p = std1(3.0);
        let direct = p.log_norm_const();
        let quad = integrate_real_line(&|x| (1.0 + x * x / 3.0).powf(-2.0), 1e-12).ln();
        assert!((direct - quad).abs() < 1e-10, "{direct} vs {quad}");
        assert!((direct - 1.0008888496235098).abs() < 1e-12);
    }

    #[test]
    fn norm_const_det_scaling() {
        // Σ → cΣ multiplies Z by c^{d/2}
        let sigma = SpdMatrix::cholesky(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let p = StudentTParams::new(vec![0.0, 0.0], sigma.clone(), 2.5).unwrap();
        let c = 3.7;
        let pc = StudentTParams::new(vec![0.0, 0.0], sigma.scaled(c).unwrap(), 2.5).unwrap();
        let expect = p.log_norm_const() + (2.0 / 2.0) * c.ln();
        assert!((pc.log_norm_const() - expect).abs() < 1e-12);
    }

    #[test]
    fn pdf_integrates_to_one() {
        for nu in [0.5, 1.0, 2.0, 5.0, 50.0] {
            let p = std1(nu);
            let v = integrate_real_line(&|x| p.log_pdf(&[x]).unwrap().exp(), 1e-11);
            assert!((v - 1.0).abs() < 1e-8, "nu={nu}: integral {v}");
        }
    }

    #[test]
    fn escort_examples() {
        // nu_q = 1, d = 1, nu_outer = 1: escort is t_3 with scale 1/3
        let p = std1(1.0);
        let esc = escort_params(&p, alpha_of_nu(1.0, 1).unwrap());
        assert!((esc.nu() - 3.0).abs() < 1e-14);
        let rec = esc.sigma().reconstruct();
        assert!((rec[0] - 1.0 / 3.0).abs() < 1e-14);

        // nu_q = nu_outer = nu gives nu + 2
        for nu in [0.7, 2.0, 6.0] {
            let p = std1(nu);
            let esc = escort_params(&p, alpha_of_nu(nu, 1).unwrap());
            assert!((esc.nu() - (nu + 2.0)).abs() < 1e-12);
        }

        // linearity in the scale
        let sigma = SpdMatrix::cholesky(2, &[1.5, 0.2, 0.2, 0.9]).unwrap();
        let p = StudentTParams::new(vec![0.1, -0.3], sigma.clone(), 2.0).unwrap();
        let spec = alpha_of_nu(4.0, 2).unwrap();
        let e1 = escort_params(&p, spec);
        let pc = StudentTParams::new(vec![0.1, -0.3], sigma.scaled(2.5).unwrap(), 2.0).unwrap();
        let e2 = escort_params(&pc, spec);
        let r1 = e1.sigma().reconstruct();
        let r2 = e2.sigma().reconstruct();
        for (a, b) in r1.iter().zip(r2.iter()) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn escort_matches_normalized_power_pointwise() {
        let p = std1(1.0);
        let spec = alpha_of_nu(1.0, 1).unwrap();
        let esc = escort_params(&p, spec);
        let alpha = spec.alpha();
        let norm = integrate_real_line(&|x| (alpha * p.log_pdf(&[x]).unwrap()).exp(), 1e-12);
        for i in 0..50 {
            let x = -8.0 + 16.0 * (i as f64) / 49.0;
            let lhs = (alpha * p.log_pdf(&[x]).unwrap()).exp() / norm;
            let rhs = esc.log_pdf(&[x]).unwrap().exp();
            assert!((lhs - rhs).abs() < 1e-9, "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn renyi_entropy_matches_quadrature() {
        for (nu_q, nu_outer) in [(1.0, 1.0), (5.0, 3.0)] {
            let p = std1(nu_q);
            let spec = alpha_of_nu(nu_outer, 1).unwrap();
            let alpha = spec.alpha();
            let integral =
                integrate_real_line(&|x| (alpha * p.log_pdf(&[x]).unwrap()).exp(), 1e-12);
            let h_quad = integral.ln() / (1.0 - alpha);
            let h = renyi_entropy(&p, spec);
            assert!(
                (h - h_quad).abs() < 1e-6,
                "nu_q={nu_q} nu_outer={nu_outer}: {h} vs {h_quad}"
            );
        }
    }

    #[test]
    fn renyi_entropy_scale_shift() {
        // H_α of q with Σ → cΣ increases by (d/2) ln c
        let sigma = SpdMatrix::cholesky(2, &[1.0, 0.4, 0.4, 2.0]).unwrap();
        let p = StudentTParams::new(vec![0.0, 0.0], sigma.clone(), 3.0).unwrap();
        let spec = alpha_of_nu(2.0, 2).unwrap();
        let c = 4.2;
        let pc = StudentTParams::new(vec![0.0, 0.0], sigma.scaled(c).unwrap(), 3.0).unwrap();
        let got = renyi_entropy(&pc, spec) - renyi_entropy(&p, spec);
        assert!((got - c.ln()).abs() < 1e-12, "shift {got}");
    }

    #[test]
    fn optimal_approx_examples() {
        // self-recovery at nu = nu_pi
        let target = std1(2.0);
        let q = optimal_approx_of_student_target(&target, 2.0).unwrap();
        assert!((q.sigma().reconstruct()[0] - 1.0).abs() < 1e-12);
        assert_eq!(q.mu(), target.mu());

        // nu_pi = 2, d = 5, nu = 2: nu_alpha = 4, Sigma* = Sigma_pi
        let t5 = StudentTParams::standard(5, 2.0).unwrap();
        let q5 = optimal_approx_of_student_target(&t5, 2.0).unwrap();
        let rec = q5.sigma().reconstruct();
        for i in 0..5 {
            assert!((rec[i * 5 + i] - 1.0).abs() < 1e-12);
        }

        // nu_pi = 1, d = 1, large nu: nu_alpha -> 1 => infeasible
        let cauchy = std1(1.0);
        let err = optimal_approx_of_student_target(&cauchy, 1e9).unwrap_err();
        assert!(matches!(err, Error::InfeasibleEscortMoments { .. }));
        // boundary: nu = 3 gives nu_alpha = 2 exactly, still infeasible
        assert!(optimal_approx_of_student_target(&cauchy, 3.0).is_err());
    }

    #[test]
    fn optimal_divergence_zero_at_truth_positive_elsewhere() {
        let target = StudentTParams::standard(5, 2.0).unwrap();
        assert!(optimal_alpha_divergence(&target, 2.0).unwrap().abs() < 1e-10);
        let mut best = (0.0_f64, f64::INFINITY);
        let mut nu = 0.5;
        while nu <= 10.0 + 1e-9 {
            let d = optimal_alpha_divergence(&target, nu).unwrap();
            if (nu - 2.0).abs() >= 0.25 {
                assert!(d > 1e-8, "nu={nu}: {d}");
            }
            if d < best.1 {
                best = (nu, d);
            }
            nu += 0.5;
        }
        assert!((best.0 - 2.0).abs() < 1e-12, "minimum at {}", best.0);
    }

    #[test]
    fn optimal_divergence_matches_quadrature() {
        // Feasible 1-d case: nu_pi = 1, nu = 2 (nu_alpha = 7/3).
        let target = std1(1.0);
        let nu = 2.0;
        let d_closed = optimal_alpha_divergence(&target, nu).unwrap();
        let q = optimal_approx_of_student_target(&target, nu).unwrap();
        let alpha = alpha_of_nu(nu, 1).unwrap().alpha();
        let integral = integrate_real_line(
            &|x| {
                (alpha * target.log_pdf(&[x]).unwrap() + (1.0 - alpha) * q.log_pdf(&[x]).unwrap())
                    .exp()
            },
            1e-12,
        );
        let d_quad = (integral - 1.0) / (alpha * (alpha - 1.0));
        assert!(
            (d_closed - d_quad).abs() < 1e-5,
            "closed {d_closed} vs quad {d_quad}"
        );
        // frozen value from an independent quadrature run
        assert!((d_closed - 0.152561237612073).abs() < 1e-9);
    }

    #[test]
    fn sampling_median_and_variance() {
        // median of each coordinate ~ mu (nu = 5, d = 2)
        let sigma = SpdMatrix::cholesky(2, &[1.0, 0.3, 0.3, 0.8]).unwrap();
        let p = StudentTParams::new(vec![1.5, -0.5], sigma, 5.0).unwrap();
        let mut rng = RngStream::new(314159);
        let m = 100_000;
        let xs = p.sample_n(&mut rng, m);
        for k in 0..2 {
            let mut col: Vec<f64> = xs.iter().map(|x| x[k]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = col[m / 2];
            let iqr = col[(3 * m) / 4] - col[m / 4];
            let band = 3.0 * iqr / (m as f64).sqrt();
            assert!(
                (med - p.mu()[k]).abs() < band,
                "coord {k}: median {med} vs {} (band {band})",
                p.mu()[k]
            );
        }

        // near-Gaussian limit: nu = 1000, d = 1, empirical variance ≈ 1
        let p = std1(1000.0);
        let mut rng = RngStream::new(2718);
        let xs: Vec<f64> = (0..m).map(|_| p.sample(&mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
        assert!((0.97..1.03).contains(&var), "var {var}");
    }

    #[test]
    fn sampling_cauchy_kolmogorov_smirnov() {
        let p = std1(1.0);
        let mut rng = RngStream::new(99);
        let m = 100_000;
        let mut xs: Vec<f64> = (0..m).map(|_| p.sample(&mut rng)[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0_f64;
        for (i, x) in xs.iter().enumerate() {
            let cdf = 0.5 + x.atan() / std::f64::consts::PI;
            let lo = i as f64 / m as f64;
            let hi = (i + 1) as f64 / m as f64;
            ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
        }
        // 99% critical value
        assert!(ks < 1.63 / (m as f64).sqrt(), "KS = {ks}");
    }
}
