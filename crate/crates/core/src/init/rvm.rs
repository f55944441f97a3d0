//! Relevance vector machine: sparse Bayesian regression on a Gaussian kernel
//! basis centred at the training points, fitted by type-II maximum
//! likelihood (MacKay re-estimation of per-weight precisions and the noise).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, median};
use crate::model::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvmOptions {
    /// Weights whose precision exceeds this are pruned.
    pub prune_threshold: f64,
    /// Convergence on the max absolute change of log precisions.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for RvmOptions {
    fn default() -> Self {
        Self {
            prune_threshold: 1e8,
            tolerance: 1e-3,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvmFit {
    /// Row indices (into the fitted group) of the retained basis functions.
    pub relevance_indices: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Kernel is `exp(-kernel_width * |x - x'|^2)`.
    pub kernel_width: f64,
    pub noise_var: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl RvmFit {
    /// Number of relevance vectors `v`.
    pub fn v(&self) -> usize {
        self.relevance_indices.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (-self.kernel_width * squared_distance(x, c)).exp())
            .sum()
    }
}

/// `1 / median` of the pairwise squared distances between rows.
pub fn median_kernel_width(x: &DMatrix<f64>) -> f64 {
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut d: Vec<f64> = Vec::with_capacity(rows.len() * (rows.len().saturating_sub(1)) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(squared_distance(&rows[i], &rows[j]));
        }
    }
    let positive: Vec<f64> = d.into_iter().filter(|v| *v > 0.0).collect();
    if positive.is_empty() {
        return 1.0;
    }
    let mut positive = positive;
    1.0 / median(&mut positive)
}

pub fn fit_rvm(x: &DMatrix<f64>, y: &[f64]) -> Result<RvmFit> {
    fit_rvm_observed(x, y, RvmOptions::default(), |_| {})
}

/// As [`fit_rvm`], calling `observe` with the retained indices after every
/// re-estimation.
pub fn fit_rvm_observed(
    x: &DMatrix<f64>,
    y: &[f64],
    opts: RvmOptions,
    mut observe: impl FnMut(&[usize]),
) -> Result<RvmFit> {
    let n = x.nrows();
    if n < 2 || y.len() != n {
        return Err(Error::Argument("RVM needs at least two points and matching outcomes".into()));
    }
    let width = median_kernel_width(x);
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let phi = DMatrix::from_fn(n, n, |i, j| (-width * squared_distance(&rows[i], &rows[j])).exp());
    let yv = DVector::from_column_slice(y);
    let y_mean = yv.mean();
    let y_var = (yv.map(|v| (v - y_mean).powi(2)).sum() / n as f64).max(1e-12);
    let noise_floor = 1e-10 * y_var;

    let mut active: Vec<usize> = (0..n).collect();
    let mut alpha: Vec<f64> = vec![1.0 / y_var; n];
    let mut beta = 1.0 / (0.1 * y_var);
    let mut mean = DVector::zeros(n);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter && !active.is_empty() {
        iterations += 1;
        let pa = phi.select_columns(&active);
        let mut h = pa.transpose() * &pa * beta;
        for (j, &a) in alpha.iter().enumerate() {
            h[(j, j)] += a;
        }
        let (chol, _) =
            cholesky_with_jitter(&h, 1e-10).ok_or_else(|| Error::numerical("RVM posterior factorization"))?;
        let sigma = chol.inverse();
        mean = chol.solve(&(pa.transpose() * &yv * beta));

        let mut gamma_sum = 0.0;
        let mut next_alpha = Vec::with_capacity(active.len());
        let mut max_change: f64 = 0.0;
        for j in 0..active.len() {
            let g = (1.0 - alpha[j] * sigma[(j, j)]).clamp(0.0, 1.0);
            gamma_sum += g;
            let a_new = if mean[j] == 0.0 { f64::INFINITY } else { g / (mean[j] * mean[j]) };
            let a_new = if a_new.is_nan() { f64::INFINITY } else { a_new };
            if a_new <= opts.prune_threshold {
                max_change = max_change.max((a_new.ln() - alpha[j].ln()).abs());
            }
            next_alpha.push(a_new);
        }
        let resid = &yv - &pa * &mean;
        let rss = resid.norm_squared();
        let noise = ((rss / (n as f64 - gamma_sum).max(1e-12)).max(noise_floor)).min(1e6 * y_var);
        beta = 1.0 / noise;

        let keep: Vec<usize> = (0..active.len()).filter(|&j| next_alpha[j] <= opts.prune_threshold).collect();
        let pruned = keep.len() != active.len();
        active = keep.iter().map(|&j| active[j]).collect();
        alpha = keep.iter().map(|&j| next_alpha[j]).collect();
        mean = DVector::from_iterator(keep.len(), keep.iter().map(|&j| mean[j]));
        observe(&active);
        if !pruned && max_change < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("RVM did not converge after {iterations} iterations; keeping {} vectors", active.len());
    }

    // refit the retained weights at the final hyperparameters
    if !active.is_empty() {
        let pa = phi.select_columns(&active);
        let mut h = pa.transpose() * &pa * beta;
        for (j, &a) in alpha.iter().enumerate() {
            h[(j, j)] += a;
        }
        if let Some((chol, _)) = cholesky_with_jitter(&h, 1e-10) {
            mean = chol.solve(&(pa.transpose() * &yv * beta));
        }
    }

    Ok(RvmFit {
        vectors: active.iter().map(|&i| rows[i].clone()).collect(),
        weights: mean.iter().copied().collect(),
        relevance_indices: active,
        kernel_width: width,
        noise_var: 1.0 / beta,
        converged,
        iterations,
    })
}
