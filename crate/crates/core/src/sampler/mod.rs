//! MCMC for the shared-neuron network.
//!
//! One sweep updates, in order: α, θ, Γ, p, σ, then every center μ_k. During
//! burn-in the per-center Langevin step sizes and the coefficient prior scale
//! σ_d are adapted; both are frozen afterwards.

mod gibbs;
mod langevin;
mod persist;
mod state;

pub use gibbs::{
    alpha_full_conditional, gamma_log_likelihood_ratio, half_cauchy_pdf, inclusion_probability,
    pg_posterior_shapes, recalibrate_sigma_d, sigma_acceptance_prob, sigma_d_for, theta_full_conditional,
    update_alpha, update_gamma, update_pg, update_sigma, update_theta, SigmaStep, ThetaConditional,
};
pub use langevin::{
    grad_log_post_mu, log_post_mu, mala_log_acceptance, mala_log_transition, mala_step, tune_step_size,
    update_mu_k, LogDensity, MalaStep, MuConditional, MuStep,
};
pub use persist::{read_chain, write_chain, ChainHeader};
pub use state::SamplerState;

use serde::{Deserialize, Serialize};

use crate::data::{CovariateTransform, OutcomeTransform, Prepared};
use crate::error::{Error, Result};
use crate::init::InitPlan;
use crate::model::{Hyperparams, RbfParams};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    /// Iterations during which γ_{k,g}, k ∈ I_g, stay at 1.
    pub n_fixed_gamma: usize,
    pub tune_interval: usize,
    pub acc_low: f64,
    pub acc_high: f64,
    pub epsilon0: f64,
    pub recalib_interval: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 6000,
            n_burn: 3000,
            n_fixed_gamma: 1000,
            tune_interval: 200,
            acc_low: 0.45,
            acc_high: 0.70,
            epsilon0: 0.01,
            recalib_interval: 100,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Argument(format!("sampler config: {m}")));
        if self.n_burn >= self.n_iter {
            return fail("n_burn must be smaller than n_iter");
        }
        if self.n_fixed_gamma > self.n_burn {
            return fail("n_fixed_gamma must not exceed n_burn");
        }
        if !(0.0 < self.acc_low && self.acc_low < self.acc_high && self.acc_high < 1.0) {
            return fail("need 0 < acc_low < acc_high < 1");
        }
        if !(self.epsilon0 > 0.0) {
            return fail("epsilon0 must be positive");
        }
        if self.tune_interval == 0 || self.recalib_interval == 0 {
            return fail("intervals must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    /// Post-burn-in acceptance rate of each center's Langevin move.
    pub mu: Vec<f64>,
    /// Post-burn-in acceptance rate of the σ move.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adaptation {
    StepSize { neuron: usize, from: f64, to: f64 },
    SigmaD { from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    pub iteration: usize,
    pub change: Adaptation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Every step-size or σ_d change, with its iteration.
    pub adaptation: Vec<AdaptationEvent>,
    /// Final per-center step sizes.
    pub step_sizes: Vec<f64>,
    pub degenerate_residual_steps: usize,
    pub non_finite_rejections: usize,
}

/// Post-burn-in samples of the network plus everything needed to use them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub samples: Vec<RbfParams>,
    pub acceptance: Acceptance,
    /// Zero-based neuron indices pinned on for each group early in the chain.
    pub fixed_sets: Vec<Vec<usize>>,
    pub outcome: OutcomeTransform,
    pub covariates: CovariateTransform,
    /// Hyperparameters in effect after burn-in.
    pub hyper: Hyperparams,
    pub diagnostics: Diagnostics,
}

impl PosteriorChain {
    pub fn n_groups(&self) -> usize {
        self.samples.first().map_or(0, |s| s.g)
    }

    /// Posterior mean of `f_g(x)` on the original outcome scale, `x` scaled.
    pub fn mean_outcome(&self, g: usize, x: &[f64]) -> f64 {
        let m = self.samples.iter().map(|s| s.evaluate(g, x)).sum::<f64>() / self.samples.len() as f64;
        self.outcome.invert(m)
    }
}

/// Runs the sampler from `init` on already-scaled data.
pub fn run_chain(prepared: &Prepared, config: &SamplerConfig, init: &InitPlan) -> Result<PosteriorChain> {
    config.validate()?;
    let data = &prepared.data;
    let params = init.initial_params(data.dim(), data.n_groups);
    params.validate()?;
    let hyper = init.hyperparams();
    hyper.validate()?;
    let fixed = &init.fixed_sets;
    if fixed.len() != data.n_groups {
        return Err(Error::Argument("one fixed index set per treatment is required".into()));
    }

    let mut rng = stream(config.seed, Stream::Chain);
    let mut state = SamplerState::new(params, hyper, data);
    let k_total = state.params().k;
    let mut eps = vec![config.epsilon0; k_total];
    let mut window_acc = vec![0usize; k_total];
    let mut diag = Diagnostics::default();
    let mut post_mu_acc = vec![0usize; k_total];
    let mut post_sigma_acc = 0usize;
    let n_keep = config.n_iter - config.n_burn;
    let mut samples = Vec::with_capacity(n_keep);

    for t in 1..=config.n_iter {
        let in_fixed = t <= config.n_fixed_gamma;
        let burning = t <= config.n_burn;
        let fixed_now = in_fixed.then_some(fixed.as_slice());

        update_alpha(&mut state, data, &mut rng);
        update_theta(&mut state, data, &mut rng).map_err(|e| e.at_iteration(t))?;
        update_gamma(&mut state, fixed_now, &mut rng);
        update_pg(&mut state, fixed_now, &mut rng).map_err(|e| e.at_iteration(t))?;
        let sig = update_sigma(&mut state, data, &mut rng).map_err(|e| e.at_iteration(t))?;
        diag.degenerate_residual_steps += sig.degenerate as usize;
        for k in 0..k_total {
            let step = update_mu_k(&mut state, data, k, eps[k], &mut rng);
            diag.non_finite_rejections += step.non_finite as usize;
            if burning {
                window_acc[k] += step.accepted as usize;
            } else {
                post_mu_acc[k] += step.accepted as usize;
            }
        }

        if burning {
            if t % config.tune_interval == 0 {
                for k in 0..k_total {
                    let rate = window_acc[k] as f64 / config.tune_interval as f64;
                    let next = tune_step_size(rate, eps[k], config.acc_low, config.acc_high);
                    if next != eps[k] {
                        diag.adaptation.push(AdaptationEvent {
                            iteration: t,
                            change: Adaptation::StepSize {
                                neuron: k,
                                from: eps[k],
                                to: next,
                            },
                        });
                        eps[k] = next;
                    }
                    window_acc[k] = 0;
                }
            }
            if t % config.recalib_interval == 0 {
                let next = recalibrate_sigma_d(state.params());
                let cur = state.hyper().sigma_d;
                if next != cur {
                    diag.adaptation.push(AdaptationEvent {
                        iteration: t,
                        change: Adaptation::SigmaD { from: cur, to: next },
                    });
                    state.hyper_mut().sigma_d = next;
                }
            }
        } else {
            post_sigma_acc += sig.accepted as usize;
            samples.push(state.params().clone());
        }
    }

    diag.step_sizes = eps;
    let acceptance = Acceptance {
        mu: post_mu_acc.iter().map(|&a| a as f64 / n_keep as f64).collect(),
        sigma: post_sigma_acc as f64 / n_keep as f64,
    };
    Ok(PosteriorChain {
        samples,
        acceptance,
        fixed_sets: fixed.clone(),
        outcome: prepared.outcome,
        covariates: prepared.covariates.clone(),
        hyper: state.hyper().clone(),
        diagnostics: diag,
    })
}
