//! Flat `key = value` run configuration shared by every CLI command.
//!
//! A config file sets any subset of the keys below; command-line flags are
//! applied afterwards through [`RunConfig::set`] and therefore win.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::blp;
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::init::{InitOptions, ThetaPrior};
use crate::sampler::SamplerConfig;
use crate::sim::{ExternalCovariates, Method, Setting, SimConfig};

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "data",
    "covariates",
    "chain",
    "output",
    "nominal",
    "ordinal",
    "n_iter",
    "n_burn",
    "n_fixed_gamma",
    "tune_interval",
    "acc_low",
    "acc_high",
    "epsilon0",
    "recalib_interval",
    "seed",
    "ewkm_lambda",
    "ewkm_max_iter",
    "jitter_sd",
    "theta_prior",
    "pair",
    "thresholds",
    "setting",
    "n",
    "replications",
    "split_fraction",
    "covariate_file",
    "active_columns",
    "noise_sd",
    "methods",
    "pairs",
    "blp_pairs",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    pub output: PathBuf,
    pub nominal: Vec<String>,
    pub ordinal: Vec<String>,
    pub sampler: SamplerConfig,
    pub init: InitOptions,
    /// Zero-based `(g, g')`.
    pub pair: (usize, usize),
    pub thresholds: Vec<f64>,
    pub setting: Setting,
    pub n: usize,
    pub replications: usize,
    pub split_fraction: f64,
    pub covariate_file: Option<PathBuf>,
    /// Zero-based.
    pub active_columns: Vec<usize>,
    pub noise_sd: f64,
    pub methods: Vec<Method>,
    pub pairs: Vec<(usize, usize)>,
    pub blp_pairs: Vec<(usize, usize)>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            data: None,
            covariates: None,
            chain: None,
            output: PathBuf::from("."),
            nominal: Vec::new(),
            ordinal: Vec::new(),
            sampler: SamplerConfig::default(),
            init: InitOptions::default(),
            pair: (1, 0),
            thresholds: blp::simulation_thresholds(),
            setting: sim.setting,
            n: sim.n,
            replications: sim.replications,
            split_fraction: sim.split_fraction,
            covariate_file: None,
            active_columns: sim.active_columns,
            noise_sd: sim.noise_sd,
            methods: sim.methods,
            pairs: sim.pairs,
            blp_pairs: sim.blp_pairs,
            threads: None,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// `"21"` or `"2,1"` or `"2-1"` → zero-based `(1, 0)`.
pub fn parse_pair(value: &str) -> Result<(usize, usize)> {
    let v = value.trim();
    let parts: Vec<&str> = if v.contains([',', '-', ':']) {
        v.split([',', '-', ':']).map(str::trim).collect()
    } else if v.len() == 2 {
        vec![&v[..1], &v[1..]]
    } else {
        vec![v]
    };
    let bad = || Error::Config(format!("bad treatment pair `{value}` (expected e.g. 21 or 2,1)"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let g: usize = parts[0].parse().map_err(|_| bad())?;
    let h: usize = parts[1].parse().map_err(|_| bad())?;
    if g == 0 || h == 0 {
        return Err(bad());
    }
    Ok((g - 1, h - 1))
}

fn parse_pairs(value: &str) -> Result<Vec<(usize, usize)>> {
    value
        .split([';', ' '])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .flat_map(|s| if s.contains(',') && s.len() > 3 { s.split(',').collect() } else { vec![s] })
        .map(parse_pair)
        .collect()
}

fn parse_thresholds(value: &str) -> Result<Vec<f64>> {
    match value.trim() {
        "simulation" => Ok(blp::simulation_thresholds()),
        "coarse" => Ok(blp::COARSE_THRESHOLDS.to_vec()),
        other => list(other).into_iter().map(|v| num("thresholds", v)).collect(),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "data" => self.data = opt_path(v),
            "covariates" => self.covariates = opt_path(v),
            "chain" => self.chain = opt_path(v),
            "output" => self.output = PathBuf::from(v),
            "nominal" => self.nominal = list(v).into_iter().map(String::from).collect(),
            "ordinal" => self.ordinal = list(v).into_iter().map(String::from).collect(),
            "n_iter" => self.sampler.n_iter = num(key, v)?,
            "n_burn" => self.sampler.n_burn = num(key, v)?,
            "n_fixed_gamma" => self.sampler.n_fixed_gamma = num(key, v)?,
            "tune_interval" => self.sampler.tune_interval = num(key, v)?,
            "acc_low" => self.sampler.acc_low = num(key, v)?,
            "acc_high" => self.sampler.acc_high = num(key, v)?,
            "epsilon0" => self.sampler.epsilon0 = num(key, v)?,
            "recalib_interval" => self.sampler.recalib_interval = num(key, v)?,
            "seed" => self.sampler.seed = num(key, v)?,
            "ewkm_lambda" => self.init.ewkm_lambda = num(key, v)?,
            "ewkm_max_iter" => self.init.ewkm_max_iter = num(key, v)?,
            "jitter_sd" => self.init.jitter_sd = num(key, v)?,
            "theta_prior" => self.init.theta_prior = ThetaPrior::parse(v)?,
            "pair" => self.pair = parse_pair(v)?,
            "thresholds" => self.thresholds = parse_thresholds(v)?,
            "setting" => {
                self.setting = match v {
                    "setting1" => Setting::Setting1,
                    "from-covariates" => Setting::FromCovariates,
                    _ => return Err(Error::Config(format!("unknown setting `{v}` (setting1 | from-covariates)"))),
                }
            }
            "n" => self.n = num(key, v)?,
            "replications" => self.replications = num(key, v)?,
            "split_fraction" => self.split_fraction = num(key, v)?,
            "covariate_file" => self.covariate_file = opt_path(v),
            "active_columns" => {
                self.active_columns = list(v)
                    .into_iter()
                    .map(|c| {
                        let j: usize = num(key, c)?;
                        j.checked_sub(1)
                            .ok_or_else(|| Error::Config("active_columns are one-based".into()))
                    })
                    .collect::<Result<_>>()?
            }
            "noise_sd" => self.noise_sd = num(key, v)?,
            "methods" => self.methods = list(v).into_iter().map(Method::parse).collect::<Result<_>>()?,
            "pairs" => self.pairs = parse_pairs(v)?,
            "blp_pairs" => self.blp_pairs = parse_pairs(v)?,
            "threads" => self.threads = if v.is_empty() { None } else { Some(num(key, v)?) },
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys may appear once.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn schema(&self) -> Schema {
        Schema {
            nominal: self.nominal.clone(),
            ordinal: self.ordinal.clone(),
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is required")))
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let covariates = match &self.covariate_file {
            Some(p) => Some(ExternalCovariates::load(p)?),
            None => None,
        };
        let setting = if covariates.is_some() && self.setting == Setting::Setting1 {
            return Err(Error::Config("covariate_file is only used with setting = from-covariates".into()));
        } else {
            self.setting
        };
        let cfg = SimConfig {
            setting,
            n: self.n,
            replications: self.replications,
            split_fraction: self.split_fraction,
            chain: self.sampler.clone(),
            init: self.init,
            covariates,
            active_columns: self.active_columns.clone(),
            noise_sd: self.noise_sd,
            methods: self.methods.clone(),
            pairs: self.pairs.clone(),
            blp_pairs: self.blp_pairs.clone(),
            blp_thresholds: self.thresholds.clone(),
            seed: self.sampler.seed,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn strip_prefix(e: &Error) -> String {
    let s = e.to_string();
    s.strip_prefix("config error: ").map(str::to_string).unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("data", "a.csv"),
            ("covariates", "b.csv"),
            ("chain", "c.jsonl"),
            ("output", "out"),
            ("nominal", "a, b"),
            ("ordinal", "c"),
            ("n_iter", "10"),
            ("n_burn", "5"),
            ("n_fixed_gamma", "2"),
            ("tune_interval", "3"),
            ("acc_low", "0.3"),
            ("acc_high", "0.8"),
            ("epsilon0", "0.02"),
            ("recalib_interval", "7"),
            ("seed", "42"),
            ("ewkm_lambda", "2"),
            ("ewkm_max_iter", "50"),
            ("jitter_sd", "0.001"),
            ("theta_prior", "zero"),
            ("pair", "3,1"),
            ("thresholds", "0, 0.5, 1"),
            ("setting", "from-covariates"),
            ("n", "90"),
            ("replications", "2"),
            ("split_fraction", "0.5"),
            ("covariate_file", "x.csv"),
            ("active_columns", "1,2,3,4,6"),
            ("noise_sd", "0.5"),
            ("methods", "shared-rbf, ols-t"),
            ("pairs", "21 31"),
            ("blp_pairs", "23;13"),
            ("threads", "2"),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut c = RunConfig::default();
        for (k, v) in samples {
            assert!(KEYS.contains(&k));
            c.set(k, v).unwrap();
        }
        assert_eq!(c.nominal, vec!["a", "b"]);
        assert_eq!(c.sampler.seed, 42);
        assert_eq!(c.pair, (2, 0));
        assert_eq!(c.active_columns, vec![0, 1, 2, 3, 5]);
        assert_eq!(c.pairs, vec![(1, 0), (2, 0)]);
        assert_eq!(c.blp_pairs, vec![(1, 2), (0, 2)]);
        assert_eq!(c.init.theta_prior, ThetaPrior::Zero);
        assert_eq!(c.thresholds, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.threads, Some(2));
    }

    #[test]
    fn file_parsing() {
        let c = RunConfig::parse_str("# comment\nn_iter = 100 # trailing\n\nseed=3\n").unwrap();
        assert_eq!(c.sampler.n_iter, 100);
        assert_eq!(c.sampler.seed, 3);
        assert!(RunConfig::parse_str("bogus = 1").is_err());
        assert!(RunConfig::parse_str("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse_str("seed 1").is_err());
        assert!(RunConfig::parse_str("seed = x").is_err());
    }

    #[test]
    fn pair_forms() {
        assert_eq!(parse_pair("21").unwrap(), (1, 0));
        assert_eq!(parse_pair("2,1").unwrap(), (1, 0));
        assert_eq!(parse_pair("10-2").unwrap(), (9, 1));
        assert!(parse_pair("0,1").is_err());
        assert!(parse_pair("213").is_err());
    }

    #[test]
    fn defaults_match_library_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.sampler, SamplerConfig::default());
        assert_eq!(c.init, InitOptions::default());
        let s = c.sim_config().unwrap();
        let d = SimConfig::default();
        assert_eq!((s.n, s.replications, s.pairs.clone()), (d.n, d.replications, d.pairs.clone()));
    }
}
