//! Bayesian shared-neuron RBF networks for multi-treatment conditional
//! average treatment effects.
//!
//! The usual path is [`Prepared::fit`] → [`build_init_plan`] → [`run_chain`],
//! wrapped up by [`fit`]; [`blp`] summarizes the resulting chain and [`sim`]
//! runs simulated comparisons against simple meta-learners.

pub mod blp;
pub mod config;
pub mod data;
pub mod error;
pub mod init;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod sim;

pub use nalgebra;
pub use data::{load_covariates, load_dataset, Dataset, OutcomeTransform, Prepared, ScaledData, Schema};
pub use error::{Error, Result};
pub use init::{build_init_plan, InitOptions, InitPlan};
pub use model::{Hyperparams, RbfParams};
pub use sampler::{read_chain, run_chain, write_chain, PosteriorChain, SamplerConfig};

/// Everything produced by one fit.
#[derive(Debug, Clone)]
pub struct Fit {
    pub prepared: Prepared,
    pub plan: InitPlan,
    pub chain: PosteriorChain,
}

/// Scales `dataset`, builds the initialization from `config.seed` and runs the chain.
pub fn fit(dataset: &Dataset, config: &SamplerConfig, init: &InitOptions) -> Result<Fit> {
    config.validate()?;
    let prepared = Prepared::fit(dataset)?;
    let plan = build_init_plan(&prepared.data, init, config.seed)?;
    let chain = run_chain(&prepared, config, &plan)?;
    Ok(Fit { prepared, plan, chain })
}
