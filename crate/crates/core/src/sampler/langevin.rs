//! Metropolis-adjusted Langevin updates of the RBF centers.
//!
//! Proposal: `μ' = μ + (ε/2) ∇log π(μ) + δ`, `δ ~ Normal(0, ε I)`, so the
//! transition density is `q(μ' | μ) ∝ exp(-|μ' − μ − (ε/2)∇log π(μ)|² / (2ε))`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::state::SamplerState;
use crate::data::ScaledData;
use crate::model::rbf_kernel;

/// An unnormalized log density with gradient.
pub trait LogDensity {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// `log q(to | from)` up to its normalizing constant.
pub fn mala_log_transition(from: &[f64], grad_from: &[f64], to: &[f64], eps: f64) -> f64 {
    let mut ss = 0.0;
    for j in 0..from.len() {
        let d = to[j] - from[j] - 0.5 * eps * grad_from[j];
        ss += d * d;
    }
    -ss / (2.0 * eps)
}

/// Log of the MALA acceptance ratio for the move `from → to`, before capping at 0.
pub fn mala_log_acceptance<T: LogDensity + ?Sized>(target: &T, from: &[f64], to: &[f64], eps: f64) -> f64 {
    let (lp_from, g_from) = target.value_and_gradient(from);
    let (lp_to, g_to) = target.value_and_gradient(to);
    lp_to - lp_from + mala_log_transition(to, &g_to, from, eps) - mala_log_transition(from, &g_from, to, eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalaStep {
    pub next: Vec<f64>,
    pub accepted: bool,
    /// The proposal (or its gradient) was not finite and was rejected outright.
    pub non_finite: bool,
}

pub fn mala_step<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    current: &[f64],
    eps: f64,
    rng: &mut R,
) -> MalaStep {
    let (lp, grad) = target.value_and_gradient(current);
    let reject = |non_finite| MalaStep {
        next: current.to_vec(),
        accepted: false,
        non_finite,
    };
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return reject(true);
    }
    let sd = eps.sqrt();
    let proposal: Vec<f64> = current
        .iter()
        .zip(&grad)
        .map(|(m, g)| m + 0.5 * eps * g + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (lp_new, grad_new) = target.value_and_gradient(&proposal);
    if !lp_new.is_finite() || grad_new.iter().any(|g| !g.is_finite()) {
        return reject(true);
    }
    let log_a = lp_new - lp + mala_log_transition(&proposal, &grad_new, current, eps)
        - mala_log_transition(current, &grad, &proposal, eps);
    let u: f64 = rng.random();
    if log_a >= 0.0 || u.ln() < log_a {
        MalaStep {
            next: proposal,
            accepted: true,
            non_finite: false,
        }
    } else {
        reject(false)
    }
}

/// Multiplicative step-size control toward the `[low, high]` acceptance band.
pub fn tune_step_size(accept_rate: f64, eps: f64, low: f64, high: f64) -> f64 {
    let next = if accept_rate < low {
        eps * 0.8
    } else if accept_rate > high {
        eps * 1.25
    } else {
        eps
    };
    next.clamp(1e-10, 1e2)
}

/// Conditional log posterior of one center given everything else:
/// `−(n/2) log(2πσ²) − Σ_i r_i²/(2σ²) − |μ_k|²/(2σ_μ²)`.
pub struct MuConditional<'a> {
    state: &'a SamplerState,
    k: usize,
    /// Subjects whose treatment includes neuron k.
    members: Vec<usize>,
}

impl<'a> MuConditional<'a> {
    pub fn new(state: &'a SamplerState, data: &ScaledData, k: usize) -> Self {
        let p = state.params();
        let members = (0..data.n()).filter(|&i| p.included(k, data.z[i])).collect();
        Self { state, k, members }
    }

    /// Members' new kernel values at `mu`.
    fn kernels_at(&self, mu: &[f64]) -> Vec<f64> {
        let b = self.state.params().b[self.k];
        self.members
            .iter()
            .map(|&i| rbf_kernel(self.state.x_row(i), mu, b))
            .collect()
    }
}

impl LogDensity for MuConditional<'_> {
    fn dim(&self) -> usize {
        self.state.dim()
    }

    fn value_and_gradient(&self, mu: &[f64]) -> (f64, Vec<f64>) {
        let p = self.state.params();
        let h = self.state.hyper();
        let k = self.k;
        let s2 = p.sigma * p.sigma;
        let theta = p.theta[k];
        let b2 = p.b[k] * p.b[k];
        let old = self.state.kernel_column(k);
        let resid = self.state.residuals();
        let new = self.kernels_at(mu);

        let mut ss = self.state.sum_sq_resid();
        let mut grad = vec![0.0; mu.len()];
        for (&i, &phi) in self.members.iter().zip(&new) {
            let r_old = resid[i];
            let r = r_old + theta * (old[i] - phi);
            ss += r * r - r_old * r_old;
            let w = r * theta * phi * 2.0 / (b2 * s2);
            let xi = self.state.x_row(i);
            for j in 0..mu.len() {
                grad[j] += w * (xi[j] - mu[j]);
            }
        }
        let s_mu2 = h.sigma_mu * h.sigma_mu;
        let mut prior = 0.0;
        for j in 0..mu.len() {
            prior += mu[j] * mu[j];
            grad[j] -= mu[j] / s_mu2;
        }
        let n = self.state.n() as f64;
        let lp = -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - ss / (2.0 * s2) - prior / (2.0 * s_mu2);
        (lp, grad)
    }
}

/// Conditional log posterior of μ_k evaluated at `mu`.
pub fn log_post_mu(state: &SamplerState, data: &ScaledData, k: usize, mu: &[f64]) -> f64 {
    MuConditional::new(state, data, k).log_density(mu)
}

/// `∇ log P(μ_k | rest)` at the current center.
pub fn grad_log_post_mu(state: &SamplerState, data: &ScaledData, k: usize) -> Vec<f64> {
    MuConditional::new(state, data, k).gradient(&state.params().mu[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MuStep {
    pub accepted: bool,
    pub non_finite: bool,
}

/// One MALA update of center `k`; caches are refreshed on acceptance.
pub fn update_mu_k<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &ScaledData,
    k: usize,
    eps: f64,
    rng: &mut R,
) -> MuStep {
    let step = {
        let target = MuConditional::new(state, data, k);
        let current = state.params().mu[k].clone();
        mala_step(&target, &current, eps, rng)
    };
    if step.non_finite {
        log::warn!("non-finite MALA proposal for center {k}; rejected");
    }
    if step.accepted {
        let theta = state.params.theta[k];
        let old: Vec<f64> = state.kernel_column(k).to_vec();
        state.params.mu[k] = step.next;
        state.refresh_kernel(k);
        let gamma_k = state.params.gamma[k].clone();
        let new: Vec<f64> = state.kernel_column(k).to_vec();
        let resid = state.resid_mut();
        for i in 0..resid.len() {
            if gamma_k[data.z[i]] == 1 {
                resid[i] += theta * (old[i] - new[i]);
            }
        }
    }
    MuStep {
        accepted: step.accepted,
        non_finite: step.non_finite,
    }
}
