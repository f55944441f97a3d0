//! JSON-lines chain files: one header object, then one `RbfParams` per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Acceptance, Diagnostics, PosteriorChain, SamplerConfig};
use crate::data::{CovariateTransform, OutcomeTransform};
use crate::error::{Error, Result};
use crate::init::InitPlan;
use crate::model::{Hyperparams, RbfParams};

pub const CHAIN_FORMAT: &str = "sharedrbf-chain/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub format: String,
    pub config: SamplerConfig,
    pub outcome: OutcomeTransform,
    pub covariates: CovariateTransform,
    pub fixed_sets: Vec<Vec<usize>>,
    pub init: InitPlan,
    pub hyper: Hyperparams,
    pub acceptance: Acceptance,
    pub diagnostics: Diagnostics,
    pub n_samples: usize,
}

pub fn write_chain(path: impl AsRef<Path>, chain: &PosteriorChain, config: &SamplerConfig, init: &InitPlan) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = ChainHeader {
        format: CHAIN_FORMAT.to_string(),
        config: config.clone(),
        outcome: chain.outcome,
        covariates: chain.covariates.clone(),
        fixed_sets: chain.fixed_sets.clone(),
        init: init.clone(),
        hyper: chain.hyper.clone(),
        acceptance: chain.acceptance.clone(),
        diagnostics: chain.diagnostics.clone(),
        n_samples: chain.samples.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for s in &chain.samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<(ChainHeader, PosteriorChain)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty chain file", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: ChainHeader = serde_json::from_str(&first)?;
    if header.format != CHAIN_FORMAT {
        return Err(Error::Schema(format!("unsupported chain format `{}`", header.format)));
    }
    let mut samples = Vec::with_capacity(header.n_samples);
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: RbfParams = serde_json::from_str(&line)?;
        s.validate()?;
        samples.push(s);
    }
    if samples.len() != header.n_samples || samples.is_empty() {
        return Err(Error::Schema(format!(
            "chain header announces {} samples, file holds {}",
            header.n_samples,
            samples.len()
        )));
    }
    let chain = PosteriorChain {
        samples,
        acceptance: header.acceptance.clone(),
        fixed_sets: header.fixed_sets.clone(),
        outcome: header.outcome,
        covariates: header.covariates.clone(),
        hyper: header.hyper.clone(),
        diagnostics: header.diagnostics.clone(),
    };
    Ok((header, chain))
}
