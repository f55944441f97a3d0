//! The shared-neuron RBF network.
//!
//! Every treatment `g` shares one pool of `K` Gaussian neurons and one
//! intercept:
//!
//! ```text
//! f_g(x) = alpha + sum_k gamma[k][g] * theta[k] * exp(-|x - mu_k|^2 / b_k^2)
//! ```
//!
//! All evaluation here is on the scaled outcome; [`cate`] converts contrasts
//! back to the original outcome units.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{OutcomeTransform, ScaledData};
use crate::error::{Error, Result};

/// Full parameter state of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "G")]
    pub g: usize,
    #[serde(rename = "P")]
    pub dim: usize,
    /// `gamma[k][g]`, K rows of G inclusion flags.
    pub gamma: Vec<Vec<u8>>,
    /// `mu[k]` is the center of neuron k (length P').
    pub mu: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub sigma: f64,
    pub p: Vec<f64>,
    pub b: Vec<f64>,
}

impl RbfParams {
    /// Zero coefficients, empty Γ, unit bandwidths and σ = 1.
    pub fn empty(k: usize, g: usize, dim: usize) -> Self {
        Self {
            k,
            g,
            dim,
            gamma: vec![vec![0; g]; k],
            mu: vec![vec![0.0; dim]; k],
            theta: vec![0.0; k],
            alpha: 0.0,
            sigma: 1.0,
            p: vec![0.5; g],
            b: vec![1.0; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(format!("invalid RbfParams: {m}")));
        if self.gamma.len() != self.k
            || self.mu.len() != self.k
            || self.theta.len() != self.k
            || self.b.len() != self.k
        {
            return bad("per-neuron vectors must have length K");
        }
        if self.p.len() != self.g || self.gamma.iter().any(|r| r.len() != self.g) {
            return bad("per-group vectors must have length G");
        }
        if self.mu.iter().any(|m| m.len() != self.dim) {
            return bad("centers must have length P");
        }
        if self.gamma.iter().flatten().any(|&v| v > 1) {
            return bad("gamma entries must be 0 or 1");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if self.b.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return bad("bandwidths must be positive");
        }
        if self.p.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("inclusion probabilities must lie in (0, 1)");
        }
        if !self.alpha.is_finite()
            || self.theta.iter().any(|t| !t.is_finite())
            || self.mu.iter().flatten().any(|m| !m.is_finite())
        {
            return bad("non-finite coefficient or center");
        }
        Ok(())
    }

    #[inline]
    pub fn included(&self, k: usize, g: usize) -> bool {
        self.gamma[k][g] == 1
    }

    /// True when neuron `k` is switched off for every treatment.
    pub fn row_is_empty(&self, k: usize) -> bool {
        self.gamma[k].iter().all(|&v| v == 0)
    }

    pub fn kernel(&self, x: &[f64], k: usize) -> f64 {
        rbf_kernel(x, &self.mu[k], self.b[k])
    }

    /// `f_g(x)` on the scaled outcome.
    pub fn evaluate(&self, g: usize, x: &[f64]) -> f64 {
        self.alpha + self.basis(g, x)
    }

    /// The intercept-free part of `f_g(x)`.
    pub fn basis(&self, g: usize, x: &[f64]) -> f64 {
        (0..self.k)
            .filter(|&k| self.included(k, g))
            .map(|k| self.theta[k] * self.kernel(x, k))
            .sum()
    }

    /// Neurons active for at least one treatment, per treatment: Σ_k γ_{k,g}.
    pub fn active_counts(&self) -> Vec<usize> {
        (0..self.g)
            .map(|g| (0..self.k).filter(|&k| self.included(k, g)).count())
            .collect()
    }
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|x - center|^2 / b^2)`.
#[inline]
pub fn rbf_kernel(x: &[f64], center: &[f64], b: f64) -> f64 {
    (-squared_distance(x, center) / (b * b)).exp()
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Prior sd of every center coordinate.
    pub sigma_mu: f64,
    /// Prior sd of the intercept and the neuron coefficients.
    pub sigma_d: f64,
    /// Beta(c, d) prior on the inclusion probabilities.
    pub c: f64,
    pub d: f64,
    /// Half-Cauchy scale for σ.
    pub sigma_hat: f64,
    /// Prior mean of each θ_k; empty means zero for every neuron.
    #[serde(default)]
    pub theta_mean: Vec<f64>,
}

impl Hyperparams {
    pub fn theta_prior_mean(&self, k: usize) -> f64 {
        self.theta_mean.get(k).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("theta prior mean must be finite".into()));
        }
        let all = [self.sigma_mu, self.sigma_d, self.c, self.d, self.sigma_hat];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Argument(format!("hyperparameters must be positive: {self:?}")))
        }
    }
}

/// `f_g(x)` for treatment `g` (zero-based).
pub fn evaluate_outcome(params: &RbfParams, g: usize, x: &[f64]) -> f64 {
    params.evaluate(g, x)
}

/// N×K matrix with entry `(i, k) = γ_{k,g(i)} · kernel(x_i, k)`.
pub fn design_matrix(params: &RbfParams, data: &ScaledData) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(data.n(), params.k);
    for i in 0..data.n() {
        let x = data.row(i);
        let g = data.z[i];
        for k in 0..params.k {
            if params.included(k, g) {
                m[(i, k)] = params.kernel(&x, k);
            }
        }
    }
    m
}

/// `τ_{gg'}(x)` on the original outcome scale.
pub fn cate(params: &RbfParams, outcome: &OutcomeTransform, g: usize, g2: usize, x: &[f64]) -> f64 {
    if g == g2 {
        return 0.0;
    }
    outcome.range() * (params.basis(g, x) - params.basis(g2, x))
}

/// Residuals `y_i - f_{g(i)}(x_i)`.
pub fn residuals(params: &RbfParams, data: &ScaledData) -> Vec<f64> {
    (0..data.n())
        .map(|i| data.y[i] - params.evaluate(data.z[i], &data.row(i)))
        .collect()
}

/// Gaussian log-likelihood of the scaled outcomes, normalizing constant included.
pub fn log_likelihood(params: &RbfParams, data: &ScaledData) -> f64 {
    let s2 = params.sigma * params.sigma;
    let ss: f64 = residuals(params, data).iter().map(|r| r * r).sum();
    -0.5 * data.n() as f64 * (2.0 * std::f64::consts::PI * s2).ln() - ss / (2.0 * s2)
}
