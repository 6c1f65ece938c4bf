//! Scalar special functions, small dense linear algebra, and seeded random
//! variates.
//!
//! Everything here is sized for low-dimensional problems (d ≤ 64): matrices
//! are dense, row-major, and factored by plain Cholesky. The log-gamma
//! function is implemented in-repo (Lanczos, g = 7, 9 coefficients) so that
//! normalizing constants are reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::{Error, Result};

// Lanczos approximation, g = 7, n = 9. Relative error of ln Γ is below
// 1e-13 on the positive axis. Coefficients kept at published precision.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

#[allow(clippy::excessive_precision)]
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;

/// Natural log of the gamma function for x > 0.
///
/// # Errors
/// [`Error::Domain`] for non-finite or non-positive arguments.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(log_gamma_unchecked(x))
}

fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx). Valid since 0 < x < 0.5 here.
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.ln() - log_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

/// log(Σ exp(v_i)), computed with a max shift. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m; // all -inf (or empty, or a NaN/inf poisons the result)
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// log of the arithmetic mean of exp(v_i).
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

/// Symmetric positive-definite matrix, stored through its lower Cholesky
/// factor L (row-major, d×d). The represented matrix is L·Lᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    lower: Vec<f64>,
}

impl SpdMatrix {
    /// Factors a dense symmetric matrix (row-major, only the lower triangle
    /// is read) into L·Lᵀ.
    ///
    /// # Errors
    /// [`Error::NotPositiveDefinite`] if any pivot is ≤ 0, and
    /// [`Error::DimensionMismatch`] if `sym.len() != dim * dim`.
    pub fn cholesky(dim: usize, sym: &[f64]) -> Result<Self> {
        if sym.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: sym.len(),
            });
        }
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut s = sym[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                    }
                    l[i * dim + i] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Ok(SpdMatrix { dim, lower: l })
    }

    /// Identity scaled by `c` (> 0), i.e. the matrix c·I.
    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::Domain(format!(
                "scaled identity requires c > 0, got {c}"
            )));
        }
        let mut l = vec![0.0; dim * dim];
        let r = c.sqrt();
        for i in 0..dim {
            l[i * dim + i] = r;
        }
        Ok(SpdMatrix { dim, lower: l })
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0).expect("1.0 is positive")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The lower Cholesky factor, row-major.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Solves L·y = b by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let dot: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (b[i] - dot) / self.lower[i * n + i];
        }
        Ok(y)
    }

    /// Solves Lᵀ·x = b by back substitution.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let n = self.dim;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            // column i of L below the diagonal, strided through the rows
            let dot: f64 = self.lower[(i + 1) * n + i..]
                .iter()
                .step_by(n)
                .zip(&x[i + 1..])
                .map(|(l, v)| l * v)
                .sum();
            x[i] = (b[i] - dot) / self.lower[i * n + i];
        }
        Ok(x)
    }

    /// The quadratic form (x−mu)ᵀ (LLᵀ)⁻¹ (x−mu), via one triangular solve.
    pub fn mahalanobis(&self, x: &[f64], mu: &[f64]) -> Result<f64> {
        if x.len() != self.dim || mu.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len().max(mu.len()),
            });
        }
        let diff: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
        let y = self.solve_lower(&diff)?;
        Ok(y.iter().map(|v| v * v).sum())
    }

    /// ln det(LLᵀ) = 2 Σ ln L_ii.
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum::<f64>()
            * 2.0
    }

    /// tr(LLᵀ) = Σ_ij L_ij².
    pub fn trace(&self) -> f64 {
        self.lower.iter().map(|v| v * v).sum()
    }

    /// Reconstructs the full dense matrix L·Lᵀ (row-major).
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let m = i.min(j) + 1;
                let ri = &self.lower[i * n..i * n + m];
                let rj = &self.lower[j * n..j * n + m];
                a[i * n + j] = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
            }
        }
        a
    }

    /// The matrix scaled by `c` > 0 (the factor scales by √c).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::Domain(format!("scale must be positive, got {c}")));
        }
        let r = c.sqrt();
        Ok(SpdMatrix {
            dim: self.dim,
            lower: self.lower.iter().map(|v| v * r).collect(),
        })
    }

    /// Multiplies the factor with a vector: L·z.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.lower[i * n..i * n + i + 1]
                    .iter()
                    .zip(&z[..i + 1])
                    .map(|(l, v)| l * v)
                    .sum()
            })
            .collect()
    }
}

/// Solves L·y = b for a lower-triangular factor (free-function form of
/// [`SpdMatrix::solve_lower`]).
pub fn solve_lower(l: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>> {
    l.solve_lower(b)
}

/// Deterministic seeded random stream. Identical seeds give bit-identical
/// variate sequences within one build.
///
/// Streams are single-owner: parallel replications must each derive their
/// own stream with [`derive_seed`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One standard normal variate.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// `n` i.i.d. standard normal variates.
    pub fn standard_normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }

    /// One chi-squared variate with `dof` > 0 degrees of freedom, via a
    /// Gamma(dof/2, scale 2) sampler that remains valid for shape < 1.
    ///
    /// # Errors
    /// [`Error::Domain`] for dof ≤ 0 or non-finite.
    pub fn chi2(&mut self, dof: f64) -> Result<f64> {
        if dof <= 0.0 || !dof.is_finite() {
            return Err(Error::Domain(format!("chi2 requires dof > 0, got {dof}")));
        }
        let gamma =
            Gamma::new(dof / 2.0, 2.0).map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
        Ok(gamma.sample(&mut self.inner))
    }

    /// Uniform on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.random_range(lo..hi)
    }
}

/// Derives a child seed from a base seed and a sequence of indices
/// (SplitMix64-style mixing). Pure function; used to give each replication
/// its own independent stream.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}
