//! Target-distribution factories.
//!
//! Two experiment families: a synthetic Student-t benchmark with a
//! controlled condition number and a known normalizing constant, and a
//! Bayesian Student-t regression posterior (robust regression with a
//! heavy-tailed prior) fed from a CSV dataset. The regression side also
//! provides the analytic posterior gradient and a Laplace-approximation
//! initializer (MAP + inverse negative Hessian) for ground-truth reference
//! runs.

use std::io::Read;
use std::path::Path;

use crate::adapt::repair_spd;
use crate::mathcore::{RngStream, SpdMatrix};
use crate::sampler::LogTarget;
use crate::studentt::StudentTParams;
use crate::{Error, Result};

/// Specification of the synthetic Student-t target.
#[derive(Debug, Clone)]
pub struct SyntheticTargetSpec {
    pub dim: usize,
    pub nu_pi: f64,
    /// Condition number of the scale matrix (eigenvalues geometrically
    /// spaced from 1 to kappa).
    pub kappa: f64,
    pub location_seed: u64,
    pub basis_seed: u64,
}

/// Builds the synthetic target: location uniform on [−1, 1]^d and scale
/// Q·D·Qᵀ with geometrically spaced eigenvalues and a random rotation Q.
/// Returns the parameters together with the exact log normalizing constant.
pub fn make_synthetic_target(spec: &SyntheticTargetSpec) -> Result<(StudentTParams, f64)> {
    if spec.dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    if spec.kappa < 1.0 || !spec.kappa.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "kappa must be >= 1, got {}",
            spec.kappa
        )));
    }
    let d = spec.dim;
    let mut loc_rng = RngStream::new(spec.location_seed);
    let mu: Vec<f64> = (0..d).map(|_| loc_rng.uniform(-1.0, 1.0)).collect();

    let mut basis_rng = RngStream::new(spec.basis_seed);
    let q = random_rotation(d, &mut basis_rng);
    let eigs: Vec<f64> = (0..d)
        .map(|i| {
            if d == 1 {
                1.0
            } else {
                spec.kappa.powf(i as f64 / (d - 1) as f64)
            }
        })
        .collect();
    // Sigma = Q D Qᵀ, symmetrized against roundoff
    let mut sigma = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..d {
                s += q[i * d + k] * eigs[k] * q[j * d + k];
            }
            sigma[i * d + j] = s;
            sigma[j * d + i] = s;
        }
    }
    let sigma = SpdMatrix::cholesky(d, &sigma)?;
    let params = StudentTParams::new(mu, sigma, spec.nu_pi)?;
    let log_z = params.log_norm_const();
    Ok((params, log_z))
}

/// Random rotation from the QR factorization (modified Gram–Schmidt) of a
/// standard Gaussian matrix, sign-corrected so R has a positive diagonal and
/// det Q = +1.
fn random_rotation(d: usize, rng: &mut RngStream) -> Vec<f64> {
    // Gaussian columns orthonormalized in place (modified Gram–Schmidt)
    let mut cols: Vec<Vec<f64>> = (0..d).map(|_| rng.standard_normal_vec(d)).collect();
    for j in 0..d {
        let (head, tail) = cols.split_at_mut(j);
        let col = &mut tail[0];
        for prev in head.iter() {
            let proj: f64 = col.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (c, p) in col.iter_mut().zip(prev) {
                *c -= proj * p;
            }
        }
        let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in col.iter_mut() {
            *v /= norm;
        }
    }
    // determinant via the sign of the permanent product is unwieldy; for a
    // proper rotation it is enough to flip one column if det = -1
    let mut q = vec![0.0; d * d];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            q[i * d + j] = col[i];
        }
    }
    if det_sign(&q, d) < 0.0 {
        for i in 0..d {
            q[i * d] = -q[i * d];
        }
    }
    q
}

fn det_sign(a: &[f64], d: usize) -> f64 {
    let mut m = a.to_vec();
    let mut sign = 1.0;
    for col in 0..d {
        // partial pivot
        let mut piv = col;
        for row in (col + 1)..d {
            if m[row * d + col].abs() > m[piv * d + col].abs() {
                piv = row;
            }
        }
        if piv != col {
            for j in 0..d {
                m.swap(col * d + j, piv * d + j);
            }
            sign = -sign;
        }
        let p = m[col * d + col];
        if p == 0.0 {
            return 0.0;
        }
        if p < 0.0 {
            sign = -sign;
        }
        for row in (col + 1)..d {
            let f = m[row * d + col] / p;
            for j in col..d {
                m[row * d + j] -= f * m[col * d + j];
            }
        }
    }
    sign
}

/// A normalized synthetic target playing the role of an *unnormalized*
/// density: the log density is reported with the normalizer added back, so
/// the evidence estimator has exp(`log_z`) as its ground truth.
pub struct SyntheticTarget {
    pub params: StudentTParams,
    pub log_z: f64,
}

impl SyntheticTarget {
    pub fn from_spec(spec: &SyntheticTargetSpec) -> Result<Self> {
        let (params, log_z) = make_synthetic_target(spec)?;
        Ok(SyntheticTarget { params, log_z })
    }
}

impl LogTarget for SyntheticTarget {
    fn dim(&self) -> usize {
        self.params.dim()
    }
    fn log_density_unnorm(&self, x: &[f64]) -> f64 {
        self.params
            .log_pdf(x)
            .expect("dimension fixed at construction")
            + self.log_z
    }
}

/// Covariates and response of the creatinine-style regression dataset:
/// body weight (kg), serum creatinine concentration, age (years), and the
/// endogenous creatinine clearance response. The intercept is appended when
/// the design row is formed.
#[derive(Debug, Clone)]
pub struct RegressionData {
    covariates: Vec<[f64; 3]>,
    response: Vec<f64>,
}

impl RegressionData {
    pub fn new(covariates: Vec<[f64; 3]>, response: Vec<f64>) -> Result<Self> {
        if covariates.len() != response.len() {
            return Err(Error::DimensionMismatch {
                expected: covariates.len(),
                got: response.len(),
            });
        }
        if covariates.is_empty() {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        if covariates.iter().flatten().any(|v| !v.is_finite())
            || response.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Schema("dataset contains non-finite entries".into()));
        }
        Ok(RegressionData {
            covariates,
            response,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Design row [weight, serum, age, 1].
    pub fn design_row(&self, n: usize) -> [f64; 4] {
        let c = self.covariates[n];
        [c[0], c[1], c[2], 1.0]
    }

    pub fn response(&self, n: usize) -> f64 {
        self.response[n]
    }
}

/// Maps CSV header names onto the dataset schema.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub weight: String,
    pub serum: String,
    pub age: String,
    pub response: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            weight: "weight".into(),
            serum: "serum".into(),
            age: "age".into(),
            response: "response".into(),
        }
    }
}

/// Loads a regression dataset from a UTF-8, comma-separated file with a
/// header row.
///
/// # Errors
/// [`Error::Schema`] when a mapped column is missing or the file has no data
/// rows; [`Error::Parse`] (with 1-based data row number) for any
/// non-numeric cell.
pub fn load_regression_csv(path: &Path, columns: &ColumnMap) -> Result<RegressionData> {
    let mut raw = String::new();
    std::fs::File::open(path)?.read_to_string(&mut raw)?;
    parse_regression_csv(&raw, columns)
}

fn parse_regression_csv(raw: &str, columns: &ColumnMap) -> Result<RegressionData> {
    let mut lines = raw.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty file".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let idx = [
        find(&columns.weight)?,
        find(&columns.serum)?,
        find(&columns.age)?,
        find(&columns.response)?,
    ];
    let col_names = [
        columns.weight.as_str(),
        columns.serum.as_str(),
        columns.age.as_str(),
        columns.response.as_str(),
    ];

    let mut covariates = Vec::new();
    let mut response = Vec::new();
    for (row_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let mut values = [0.0f64; 4];
        for (k, (&i, name)) in idx.iter().zip(col_names.iter()).enumerate() {
            let cell = cells.get(i).ok_or_else(|| Error::Parse {
                row: row_no + 1,
                column: name.to_string(),
                message: "row has too few fields".into(),
            })?;
            values[k] = cell.parse::<f64>().map_err(|_| Error::Parse {
                row: row_no + 1,
                column: name.to_string(),
                message: format!("'{cell}' is not a number"),
            })?;
        }
        covariates.push([values[0], values[1], values[2]]);
        response.push(values[3]);
    }
    RegressionData::new(covariates, response)
}

/// The Bayesian Student-t regression posterior:
/// y_n | x_n, β ~ t₁(x̃_nᵀβ, 1, ν_lik) with x̃_n = [x_n, 1], and
/// β ~ t₄(0, I, ν_prior). Defaults: ν_lik = 5, ν_prior = 1.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    data: RegressionData,
    likelihood: StudentTParams,
    prior: StudentTParams,
}

impl PosteriorModel {
    pub fn new(data: RegressionData) -> Self {
        Self::with_hyperparams(data, 5.0, 1.0).expect("default hyperparameters are valid")
    }

    /// Nonstandard tail parameters, mainly for testing against Gaussian
    /// surrogates (large ν on both likelihood and prior).
    pub fn with_hyperparams(
        data: RegressionData,
        likelihood_nu: f64,
        prior_nu: f64,
    ) -> Result<Self> {
        Ok(PosteriorModel {
            data,
            likelihood: StudentTParams::standard(1, likelihood_nu)?,
            prior: StudentTParams::standard(4, prior_nu)?,
        })
    }

    pub fn data(&self) -> &RegressionData {
        &self.data
    }

    /// Unnormalized log posterior density at β ∈ R⁴.
    pub fn log_posterior_unnorm(&self, beta: &[f64; 4]) -> f64 {
        let mut total = self.prior.log_pdf(beta).expect("prior is 4-dimensional");
        for n in 0..self.data.len() {
            let row = self.data.design_row(n);
            let mean: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let resid = self.data.response(n) - mean;
            total += self
                .likelihood
                .log_pdf(&[resid])
                .expect("likelihood is scalar");
        }
        total
    }

    /// Analytic gradient of the unnormalized log posterior. For a Student-t
    /// log density the derivative with respect to the location is
    /// ((ν+d)/ν)·Σ⁻¹(x−μ)/(1 + m/ν), composed through the linear model.
    pub fn log_posterior_grad(&self, beta: &[f64; 4]) -> [f64; 4] {
        let mut grad = [0.0f64; 4];
        // prior term: −(ν+4)/ν · β / (1 + ‖β‖²/ν) with Σ = I
        let nu_p = self.prior.nu();
        let norm2: f64 = beta.iter().map(|v| v * v).sum();
        let pf = -(nu_p + 4.0) / nu_p / (1.0 + norm2 / nu_p);
        for i in 0..4 {
            grad[i] += pf * beta[i];
        }
        // likelihood terms: each residual is scalar with unit scale
        let nu_l = self.likelihood.nu();
        for n in 0..self.data.len() {
            let row = self.data.design_row(n);
            let mean: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let r = self.data.response(n) - mean;
            let f = (nu_l + 1.0) / nu_l * r / (1.0 + r * r / nu_l);
            for i in 0..4 {
                grad[i] += f * row[i];
            }
        }
        grad
    }
}

impl LogTarget for PosteriorModel {
    fn dim(&self) -> usize {
        4
    }
    fn log_density_unnorm(&self, x: &[f64]) -> f64 {
        let beta: [f64; 4] = x.try_into().expect("posterior dimension is 4");
        self.log_posterior_unnorm(&beta)
    }
}

/// Location and scale produced by the Laplace approximation at the MAP.
#[derive(Debug, Clone)]
pub struct LaplaceInit {
    pub mu: Vec<f64>,
    pub sigma: SpdMatrix,
}

/// Finds the posterior mode by BFGS from β = 0 followed by a Newton polish
/// on the finite-difference Hessian (tolerance ‖grad‖ < 1e-8, at most 500
/// iterations), and returns it with the inverse negative Hessian at the
/// mode.
///
/// # Errors
/// [`Error::OptimizerDiverged`] if the tolerance is not reached.
pub fn laplace_init(model: &PosteriorModel) -> Result<LaplaceInit> {
    let f = |b: &[f64; 4]| model.log_posterior_unnorm(b);
    let g = |b: &[f64; 4]| model.log_posterior_grad(b);
    let map = maximize_map(&f, &g, [0.0; 4], 1e-8, 500)?;
    let hessian = grad_central_hessian(&g, &map, 1e-4);
    // Laplace scale: (−H)⁻¹, repaired if finite differences dent it
    let neg_h: Vec<f64> = hessian.iter().map(|v| -v).collect();
    let (chol, _) = repair_spd(&neg_h, 4)?;
    let sigma = invert_from_cholesky(&chol)?;
    Ok(LaplaceInit {
        mu: map.to_vec(),
        sigma,
    })
}

/// BFGS with Armijo backtracking until line-search progress stalls against
/// f64 resolution of the objective, then Newton steps on the
/// finite-difference Hessian, which need no objective comparisons and
/// converge quadratically near the mode.
fn maximize_map<F, G>(f: &F, g: &G, start: [f64; 4], tol: f64, max_iters: usize) -> Result<[f64; 4]>
where
    F: Fn(&[f64; 4]) -> f64,
    G: Fn(&[f64; 4]) -> [f64; 4],
{
    let norm = |v: &[f64; 4]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = bfgs_maximize(f, g, start, tol, max_iters);
    let mut grad = g(&x);
    let mut gnorm = norm(&grad);
    for _ in 0..20 {
        if gnorm < tol {
            return Ok(x);
        }
        let hessian = grad_central_hessian(g, &x, 1e-4);
        let neg_h: Vec<f64> = hessian.iter().map(|v| -v).collect();
        let (chol, _) = repair_spd(&neg_h, 4)?;
        let step = chol.solve_lower_transpose(&chol.solve_lower(&grad)?)?;
        let mut damping = 1.0;
        let mut advanced = false;
        for _ in 0..8 {
            let cand: [f64; 4] = std::array::from_fn(|i| x[i] + damping * step[i]);
            let cand_grad = g(&cand);
            if norm(&cand_grad) < gnorm {
                x = cand;
                grad = cand_grad;
                gnorm = norm(&grad);
                advanced = true;
                break;
            }
            damping *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if gnorm < tol {
        Ok(x)
    } else {
        Err(Error::OptimizerDiverged {
            iterations: max_iters,
            grad_norm: gnorm,
        })
    }
}

/// Central finite differences of the analytic gradient, symmetrized.
fn grad_central_hessian<G: Fn(&[f64; 4]) -> [f64; 4]>(g: &G, at: &[f64; 4], h: f64) -> Vec<f64> {
    let mut hess = vec![0.0; 16];
    for j in 0..4 {
        let mut plus = *at;
        plus[j] += h;
        let mut minus = *at;
        minus[j] -= h;
        let gp = g(&plus);
        let gm = g(&minus);
        for i in 0..4 {
            hess[i * 4 + j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    for i in 0..4 {
        for j in 0..i {
            let s = 0.5 * (hess[i * 4 + j] + hess[j * 4 + i]);
            hess[i * 4 + j] = s;
            hess[j * 4 + i] = s;
        }
    }
    hess
}

fn invert_from_cholesky(l: &SpdMatrix) -> Result<SpdMatrix> {
    let d = l.dim();
    let mut inv = vec![0.0; d * d];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let col = l.solve_lower_transpose(&l.solve_lower(&e)?)?;
        for i in 0..d {
            inv[i * d + j] = col[i];
        }
    }
    // symmetrize and refactor so the result is a clean SPD value
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (inv[i * d + j] + inv[j * d + i]);
            inv[i * d + j] = s;
            inv[j * d + i] = s;
        }
    }
    SpdMatrix::cholesky(d, &inv)
}

fn bfgs_maximize<F, G>(f: &F, g: &G, start: [f64; 4], tol: f64, max_iters: usize) -> [f64; 4]
where
    F: Fn(&[f64; 4]) -> f64,
    G: Fn(&[f64; 4]) -> [f64; 4],
{
    let dot = |a: &[f64; 4], b: &[f64; 4]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut x = start;
    let mut fx = f(&x);
    let mut grad = g(&x);
    // inverse-Hessian approximation of the *negative* objective
    let mut b_inv = [[0.0f64; 4]; 4];
    for (i, row) in b_inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..max_iters {
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm < tol {
            return x;
        }
        // ascent direction d = B_inv · grad
        let mut dir = [0.0f64; 4];
        for i in 0..4 {
            dir[i] = (0..4).map(|j| b_inv[i][j] * grad[j]).sum();
        }
        if dot(&dir, &grad) <= 0.0 {
            dir = grad; // reset to steepest ascent if curvature went bad
            for (i, row) in b_inv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        // backtracking line search (Armijo)
        let slope = dot(&dir, &grad);
        let mut step = 1.0;
        let mut x_new = x;
        let mut f_new = fx;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..4 {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new);
            if f_new >= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        let grad_new = g(&x_new);
        // BFGS update on the inverse Hessian (ascent convention)
        let mut s = [0.0f64; 4];
        let mut y = [0.0f64; 4];
        for i in 0..4 {
            s[i] = x_new[i] - x[i];
            y[i] = grad[i] - grad_new[i]; // = −(∇(−f)_new − ∇(−f))
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            let mut by = [0.0f64; 4];
            for i in 0..4 {
                by[i] = (0..4).map(|j| b_inv[i][j] * y[j]).sum();
            }
            let yby = dot(&y, &by);
            for i in 0..4 {
                for j in 0..4 {
                    b_inv[i][j] +=
                        (sy + yby) * s[i] * s[j] / (sy * sy) - (by[i] * s[j] + s[i] * by[j]) / sy;
                }
            }
        }
        x = x_new;
        fx = f_new;
        grad = grad_new;
    }
    x
}
