//! # ahtis
//!
//! Adaptive importance sampling for heavy-tailed targets.
//!
//! The library implements two adaptive multiple importance sampling loops
//! over multivariate Student-t proposals:
//!
//! * [`sampler::run_ahtis`] — adapts location and scale by *escort* moment
//!   matching (minimizing an α-divergence between target and proposal) and,
//!   optionally, the tail parameter ν by Bayesian optimization over a
//!   generalized effective sample size.
//! * [`sampler::run_amis`] — the classical moment-matching baseline with
//!   deterministic-mixture weights and plain target moments.
//!
//! Supporting modules:
//!
//! * [`mathcore`] — log-gamma, dense Cholesky, seeded random variates.
//! * [`studentt`] — the multivariate Student-t family, its escort transform,
//!   Rényi entropy, and the closed-form optimal Student-t approximation of a
//!   Student-t target (used as an analytic oracle).
//! * [`diagnostics`] — importance weights, deterministic-mixture weighting,
//!   ESS / α-ESS, discrete α-divergence, and the evidence estimator.
//! * [`adapt`] — escort moment matching with positive-definiteness repair.
//! * [`tailbo`] — GP surrogate + UCB acquisition for the tail parameter.
//! * [`targets`] — synthetic Student-t benchmarks and the Bayesian Student-t
//!   regression posterior with its Laplace-approximation initializer.
//! * [`quadrature`] — adaptive Gauss–Kronrod integration on the real line,
//!   used throughout the test suite as an independent oracle.
//!
//! All densities are handled in log space; weights are normalized with a
//! single log-sum-exp pass so that escort exponents on heavy tails cannot
//! overflow.

pub mod adapt;
pub mod diagnostics;
mod error;
pub mod mathcore;
pub mod quadrature;
pub mod sampler;
pub mod studentt;
pub mod tailbo;
pub mod targets;

pub use error::{Error, Result};
