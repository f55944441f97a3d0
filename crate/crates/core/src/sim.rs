//! Simulated comparisons: Friedman-type outcome surfaces for three
//! treatments, train/test splits, simple T- and S-learners, and a
//! replication driver.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blp;
use crate::data::{ColumnKind, Dataset, Prepared, ScaledData, TREATMENT_COLUMN, OUTCOME_COLUMN};
use crate::error::{Error, Result};
use crate::init::{fit_rvm, treatment_design, InitOptions};
use crate::linalg::{least_squares, median};
use crate::rng::{replication_seed, stream, Stream};
use crate::sampler::SamplerConfig;

pub const N_TREATMENTS: usize = 3;

/// `(f₁⁰, f₂⁰, f₃⁰)` at the first five coordinates of `x`.
pub fn friedman_components(x: &[f64]) -> [f64; 3] {
    let (x1, x2, x3, x4, x5) = (x[0], x[1], x[2], x[3], x[4]);
    let pi = std::f64::consts::PI;
    let f1 = 10.0 * (pi * x1 * x2).sin() + 20.0 * (x3 - 0.5).powi(2) + (10.0 * x4 + 5.0 * x5);
    let f2 = 5.0 * x2 / (1.0 + x1 * x1) + 5.0 * (x3 * x4).sin() + x5;
    let f3 = 0.1 * (4.0 * x1).exp() + 4.0 / (1.0 + (-20.0 * (x2 - 0.5)).exp()) + 3.0 * x3 * x3 + 2.0 * x4 + x5;
    [f1, f2, f3]
}

/// Treatment mean functions `(f₁, f₂, f₃)`.
pub fn outcome_functions(x: &[f64]) -> [f64; 3] {
    let [a, b, c] = friedman_components(x);
    [a + b, (a + b) / 2.0 + c / 3.0, (b + c) / 2.0 + a / 3.0]
}

/// A simulated dataset together with the true treatment means at every row.
#[derive(Debug, Clone)]
pub struct SimData {
    pub dataset: Dataset,
    /// `N×G`, entry `(i, g) = f_g(x_i)`.
    pub truth: DMatrix<f64>,
}

impl SimData {
    pub fn tau(&self, i: usize, g: usize, g2: usize) -> f64 {
        self.truth[(i, g)] - self.truth[(i, g2)]
    }
}

/// Outcomes from the first-five-column surfaces applied to `active`, keeping
/// every column of `x` and the labels `z` (zero-based) as given.
pub fn gen_from_covariates<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    z: &[usize],
    names: &[String],
    active: &[usize],
    noise_sd: f64,
    rng: &mut R,
) -> Result<SimData> {
    if active.len() != 5 {
        return Err(Error::Argument(format!("need exactly 5 active columns, got {}", active.len())));
    }
    if let Some(&bad) = active.iter().find(|&&c| c >= x.ncols()) {
        return Err(Error::Argument(format!("active column {} does not exist", bad + 1)));
    }
    if z.len() != x.nrows() {
        return Err(Error::Argument("one treatment label per row required".into()));
    }
    if let Some(&g) = z.iter().find(|&&g| g >= N_TREATMENTS) {
        return Err(Error::Argument(format!("treatment {} outside 1..=3", g + 1)));
    }
    let n = x.nrows();
    let mut truth = DMatrix::zeros(n, N_TREATMENTS);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let xa: Vec<f64> = active.iter().map(|&c| x[(i, c)]).collect();
        let f = outcome_functions(&xa);
        for g in 0..N_TREATMENTS {
            truth[(i, g)] = f[g];
        }
        let e: f64 = rng.sample(StandardNormal);
        y[i] = f[z[i]] + noise_sd * e;
    }
    let kinds = vec![ColumnKind::Continuous; x.ncols()];
    let dataset = Dataset::new(x.clone(), y, z.to_vec(), names.to_vec(), kinds)?;
    Ok(SimData { dataset, truth })
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// `n` rows of Uniform(0,1)^`p` covariates and `n/3` shuffled labels per group.
pub fn uniform_design<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if n == 0 || n % N_TREATMENTS != 0 {
        return Err(Error::Argument(format!("n = {n} is not a positive multiple of 3")));
    }
    let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
    let mut z: Vec<usize> = (0..n).map(|i| i * N_TREATMENTS / n).collect();
    z.shuffle(rng);
    Ok((x, z))
}

/// Five uniform covariates, balanced labels, `y ~ Normal(f_z(x), noise_sd²)`.
pub fn gen_setting1<R: Rng + ?Sized>(n: usize, noise_sd: f64, rng: &mut R) -> Result<SimData> {
    let (x, z) = uniform_design(n, 5, rng)?;
    gen_from_covariates(&x, &z, &default_names(5), &[0, 1, 2, 3, 4], noise_sd, rng)
}

/// Stratified train/test split: `⌈fraction·n⌉` training rows, allotted to
/// groups by largest remainder, drawn without replacement within each group.
/// Both index lists are sorted.
pub fn stratified_split<R: Rng + ?Sized>(z: &[usize], fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!("split fraction {fraction} outside (0, 1)")));
    }
    let n_groups = z.iter().max().map_or(0, |g| g + 1);
    let mut groups = vec![Vec::new(); n_groups];
    for (i, &g) in z.iter().enumerate() {
        groups[g].push(i);
    }
    let target = (fraction * z.len() as f64).ceil() as usize;
    let quota: Vec<f64> = groups.iter().map(|g| fraction * g.len() as f64).collect();
    let mut take: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.sort_by(|&a, &b| (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor())).then(a.cmp(&b)));
    let mut missing = target.saturating_sub(take.iter().sum());
    for &g in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if take[g] < groups[g].len() {
            take[g] += 1;
            missing -= 1;
        }
    }
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(z.len() - target);
    for (g, rows) in groups.iter().enumerate() {
        let mut rows = rows.clone();
        rows.shuffle(rng);
        train.extend_from_slice(&rows[..take[g]]);
        test.extend_from_slice(&rows[take[g]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn mse(estimate: &[f64], truth: &[f64]) -> f64 {
    assert!(!estimate.is_empty() && estimate.len() == truth.len());
    estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / estimate.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SharedRbf,
    OlsT,
    OlsS,
    RvmT,
    RvmS,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::SharedRbf, Method::OlsT, Method::OlsS, Method::RvmT, Method::RvmS];

    pub fn name(self) -> &'static str {
        match self {
            Method::SharedRbf => "shared-rbf",
            Method::OlsT => "ols-t",
            Method::OlsS => "ols-s",
            Method::RvmT => "rvm-t",
            Method::RvmS => "rvm-s",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown method `{s}`")))
    }
}

/// Estimated treatment means at test points, `N_test×G`, on the original scale.
pub type GroupPredictions = DMatrix<f64>;

fn design_with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (beta, ridged) = least_squares(x, y, 0.0, 1e-8)?;
    if ridged {
        log::warn!("singular OLS design; used a ridge fallback");
    }
    Ok(beta)
}

/// One OLS fit per treatment group.
pub fn ols_t_learner(train: &ScaledData, test_x: &DMatrix<f64>) -> Result<GroupPredictions> {
    let test = design_with_intercept(test_x);
    let mut out = DMatrix::zeros(test_x.nrows(), train.n_groups);
    for (g, rows) in train.group_indices().iter().enumerate() {
        let x = design_with_intercept(&train.x.select_rows(rows));
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| train.y[i]));
        out.set_column(g, &(&test * ols(&x, &y)?));
    }
    Ok(out)
}

fn with_dummies(x: &DMatrix<f64>, g: usize, n_groups: usize) -> DMatrix<f64> {
    treatment_design(x, &vec![g; x.nrows()], n_groups)
}

/// One OLS fit on covariates plus treatment dummies; predictions switch the dummies.
pub fn ols_s_learner(train: &ScaledData, test_x: &DMatrix<f64>) -> Result<GroupPredictions> {
    let beta = ols(&treatment_design(&train.x, &train.z, train.n_groups), &train.y)?;
    let mut out = DMatrix::zeros(test_x.nrows(), train.n_groups);
    for g in 0..train.n_groups {
        out.set_column(g, &(with_dummies(test_x, g, train.n_groups) * &beta));
    }
    Ok(out)
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// One RVM per treatment group.
pub fn rvm_t_learner(train: &ScaledData, test_x: &DMatrix<f64>) -> Result<GroupPredictions> {
    let test = rows_of(test_x);
    let mut out = DMatrix::zeros(test.len(), train.n_groups);
    for (g, rows) in train.group_indices().iter().enumerate() {
        let y: Vec<f64> = rows.iter().map(|&i| train.y[i]).collect();
        let fit = fit_rvm(&train.x.select_rows(rows), &y)?;
        for (i, r) in test.iter().enumerate() {
            out[(i, g)] = fit.predict(r);
        }
    }
    Ok(out)
}

/// One RVM on covariates plus treatment dummies.
pub fn rvm_s_learner(train: &ScaledData, test_x: &DMatrix<f64>) -> Result<GroupPredictions> {
    let strip = |d: DMatrix<f64>| d.remove_column(0);
    let x = strip(treatment_design(&train.x, &train.z, train.n_groups));
    let fit = fit_rvm(&x, train.y.as_slice())?;
    let mut out = DMatrix::zeros(test_x.nrows(), train.n_groups);
    for g in 0..train.n_groups {
        for (i, r) in rows_of(&strip(with_dummies(test_x, g, train.n_groups))).iter().enumerate() {
            out[(i, g)] = fit.predict(r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// Fresh uniform covariates and balanced labels every replication.
    Setting1,
    /// Fixed external covariates and labels; only the noise and split change.
    FromCovariates,
}

/// Covariates and labels supplied from outside for [`Setting::FromCovariates`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCovariates {
    pub x: DMatrix<f64>,
    /// Zero-based.
    pub z: Vec<usize>,
    pub names: Vec<String>,
}

impl ExternalCovariates {
    /// Reads a CSV with a `treatment` column (1..=3) and numeric covariates.
    /// An `outcome` column, if present, is ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        crate::data::check_unique(&header)?;
        let t_col = header
            .iter()
            .position(|h| h == TREATMENT_COLUMN)
            .ok_or_else(|| Error::Schema(format!("missing `{TREATMENT_COLUMN}` column")))?;
        let cov: Vec<usize> = (0..header.len())
            .filter(|&j| j != t_col && header[j] != OUTCOME_COLUMN)
            .collect();
        let mut values = Vec::new();
        let mut z = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                let s = rec.get(j).unwrap_or("").trim();
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    row: r + 1,
                    column: header[j].clone(),
                    value: s.to_string(),
                })
            };
            let t = parse(t_col)?;
            if t < 1.0 || t.fract() != 0.0 || t > N_TREATMENTS as f64 {
                return Err(Error::Schema(format!("row {}: treatment {t} outside 1..=3", r + 1)));
            }
            z.push(t as usize - 1);
            for &j in &cov {
                values.push(parse(j)?);
            }
        }
        let names: Vec<String> = cov.iter().map(|&j| header[j].clone()).collect();
        let x = DMatrix::from_row_slice(z.len(), names.len(), &values);
        Ok(Self { x, z, names })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub setting: Setting,
    /// Rows per replication in [`Setting::Setting1`].
    pub n: usize,
    pub replications: usize,
    pub split_fraction: f64,
    pub chain: SamplerConfig,
    pub init: InitOptions,
    pub covariates: Option<ExternalCovariates>,
    /// Zero-based columns feeding the outcome surfaces.
    pub active_columns: Vec<usize>,
    pub noise_sd: f64,
    pub methods: Vec<Method>,
    /// Zero-based `(g, g')` pairs scored by MSE.
    pub pairs: Vec<(usize, usize)>,
    /// If set, BLP threshold scores of the shared-RBF fit are kept for these pairs.
    pub blp_pairs: Vec<(usize, usize)>,
    pub blp_thresholds: Vec<f64>,
    pub seed: u64,
    /// Worker cap; `None` reads `SHAREDRBF_THREADS`, falling back to all cores.
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            setting: Setting::Setting1,
            n: 180,
            replications: 10,
            split_fraction: 2.0 / 3.0,
            chain: SamplerConfig::default(),
            init: InitOptions::default(),
            covariates: None,
            active_columns: vec![0, 1, 2, 3, 4],
            noise_sd: 1.0,
            methods: Method::ALL.to_vec(),
            pairs: vec![(1, 0), (2, 0), (1, 2)],
            blp_pairs: Vec::new(),
            blp_thresholds: blp::simulation_thresholds(),
            seed: 1,
            threads: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return fail(format!("split_fraction {} outside (0, 1)", self.split_fraction));
        }
        if self.active_columns.len() != 5 {
            return fail("active_columns needs exactly 5 entries".into());
        }
        if !(self.noise_sd >= 0.0) {
            return fail("noise_sd must be non-negative".into());
        }
        for &(g, g2) in self.pairs.iter().chain(&self.blp_pairs) {
            if g >= N_TREATMENTS || g2 >= N_TREATMENTS || g == g2 {
                return fail(format!("invalid treatment pair {}{}", g + 1, g2 + 1));
            }
        }
        match self.setting {
            Setting::Setting1 => {
                if self.n == 0 || self.n % N_TREATMENTS != 0 {
                    return fail(format!("n = {} must be a positive multiple of 3", self.n));
                }
                if self.active_columns.iter().any(|&c| c >= 5) {
                    return fail("setting1 has only 5 covariates".into());
                }
            }
            Setting::FromCovariates => {
                let Some(c) = &self.covariates else {
                    return fail("from-covariates needs a covariate file".into());
                };
                if let Some(&bad) = self.active_columns.iter().find(|&&j| j >= c.x.ncols()) {
                    return fail(format!("active column {} does not exist", bad + 1));
                }
            }
        }
        self.chain.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    /// One-based.
    pub replication: usize,
    pub method: Method,
    pub pair: (usize, usize),
    pub mse: f64,
}

/// `s_{p,t}` of the shared-RBF fit for one replication and pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BlpRecord {
    pub replication: usize,
    pub pair: (usize, usize),
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    pub thresholds: Vec<f64>,
    pub scores: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub pair: (usize, usize),
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Sorted by replication, then method, then pair order of the config.
    pub records: Vec<MseRecord>,
    pub blp: Vec<BlpRecord>,
    /// Replications that failed, with the error message.
    pub failures: Vec<(usize, String)>,
}

impl SimReport {
    pub fn mses(&self, method: Method, pair: (usize, usize)) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.pair == pair)
            .map(|r| r.mse)
            .collect()
    }

    pub fn median(&self, method: Method, pair: (usize, usize)) -> Option<f64> {
        let mut v = self.mses(method, pair);
        (!v.is_empty()).then(|| median(&mut v))
    }

    /// Median and range per method and pair, in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(Method, (usize, usize))> = Vec::new();
        for r in &self.records {
            if !keys.contains(&(r.method, r.pair)) {
                keys.push((r.method, r.pair));
            }
        }
        keys.into_iter()
            .map(|(method, pair)| {
                let mut v = self.mses(method, pair);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                SummaryRow {
                    method,
                    pair,
                    median: median(&mut v),
                    min,
                    max,
                    count: v.len(),
                }
            })
            .collect()
    }
}

struct ReplicationOutput {
    records: Vec<MseRecord>,
    blp: Vec<BlpRecord>,
}

fn predictions(method: Method, config: &SimConfig, train: &Prepared, test_x: &DMatrix<f64>, seed: u64) -> Result<(GroupPredictions, Option<crate::PosteriorChain>)> {
    let scaled = match method {
        Method::OlsT => ols_t_learner(&train.data, test_x)?,
        Method::OlsS => ols_s_learner(&train.data, test_x)?,
        Method::RvmT => rvm_t_learner(&train.data, test_x)?,
        Method::RvmS => rvm_s_learner(&train.data, test_x)?,
        Method::SharedRbf => {
            let chain_cfg = SamplerConfig { seed, ..config.chain.clone() };
            let plan = crate::init::build_init_plan(&train.data, &config.init, seed)?;
            let chain = crate::sampler::run_chain(train, &chain_cfg, &plan)?;
            let rows = rows_of(test_x);
            let out = DMatrix::from_fn(rows.len(), train.data.n_groups, |i, g| chain.mean_outcome(g, &rows[i]));
            return Ok((out, Some(chain)));
        }
    };
    Ok((scaled.map(|v| train.outcome.invert(v)), None))
}

fn replicate(config: &SimConfig, r: usize) -> Result<ReplicationOutput> {
    let seed = replication_seed(config.seed, r);
    let mut rng = stream(seed, Stream::Simulation);
    let sim = match config.setting {
        Setting::Setting1 => {
            let (x, z) = uniform_design(config.n, 5, &mut rng)?;
            gen_from_covariates(&x, &z, &default_names(5), &config.active_columns, config.noise_sd, &mut rng)?
        }
        Setting::FromCovariates => {
            let c = config.covariates.as_ref().expect("validated");
            gen_from_covariates(&c.x, &c.z, &c.names, &config.active_columns, config.noise_sd, &mut rng)?
        }
    };
    let (train_idx, test_idx) = stratified_split(sim.dataset.treatment(), config.split_fraction, &mut rng)?;
    let train_ds = sim.dataset.subset(&train_idx)?;
    let test_ds = sim.dataset.subset(&test_idx)?;
    let train = Prepared::fit(&train_ds)?;
    let test_x = train.covariates.apply(test_ds.covariates())?;

    let mut records = Vec::new();
    let mut blp_out = Vec::new();
    for &method in &config.methods {
        let (pred, chain) = predictions(method, config, &train, &test_x, seed)?;
        for &(g, g2) in &config.pairs {
            let est: Vec<f64> = (0..test_idx.len()).map(|i| pred[(i, g)] - pred[(i, g2)]).collect();
            let truth: Vec<f64> = test_idx.iter().map(|&i| sim.tau(i, g, g2)).collect();
            records.push(MseRecord {
                replication: r + 1,
                method,
                pair: (g, g2),
                mse: mse(&est, &truth),
            });
        }
        if let Some(chain) = chain {
            for &(g, g2) in &config.blp_pairs {
                let s = blp::summarize(&chain, &train.data.x, &train.covariates.output_names(), g, g2, &config.blp_thresholds)?;
                blp_out.push(BlpRecord {
                    replication: r + 1,
                    pair: (g, g2),
                    names: s.names,
                    thresholds: s.thresholds,
                    scores: s.scores,
                });
            }
        }
    }
    Ok(ReplicationOutput { records, blp: blp_out })
}

/// Worker count: explicit value, else `SHAREDRBF_THREADS`, else rayon's default.
pub fn worker_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("SHAREDRBF_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs every replication (in parallel), collecting failures as warnings.
pub fn run_replications(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(config.threads))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<(usize, Result<ReplicationOutput>)> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| (r, replicate(config, r)))
            .collect()
    });
    let mut report = SimReport {
        records: Vec::new(),
        blp: Vec::new(),
        failures: Vec::new(),
    };
    for (r, out) in outputs {
        match out {
            Ok(o) => {
                report.records.extend(o.records);
                report.blp.extend(o.blp);
            }
            Err(e) => {
                log::warn!("replication {} failed: {e}", r + 1);
                report.failures.push((r + 1, e.to_string()));
            }
        }
    }
    Ok(report)
}

pub fn pair_label(pair: (usize, usize)) -> String {
    format!("{}{}", pair.0 + 1, pair.1 + 1)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// `method,pair,replication,mse`.
pub fn write_report(path: impl AsRef<Path>, report: &SimReport) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "method,pair,replication,mse").map_err(io)?;
    for r in &report.records {
        writeln!(w, "{},{},{},{}", r.method.name(), pair_label(r.pair), r.replication, r.mse).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `method,pair,median,min,max`.
pub fn write_summary(path: impl AsRef<Path>, report: &SimReport) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "method,pair,median,min,max").map_err(io)?;
    for s in report.summary() {
        writeln!(w, "{},{},{},{},{}", s.method.name(), pair_label(s.pair), s.median, s.min, s.max).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `replication,pair,threshold,predictor,score`.
pub fn write_blp_scores(path: impl AsRef<Path>, report: &SimReport) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "replication,pair,threshold,predictor,score").map_err(io)?;
    for b in &report.blp {
        for (j, t) in b.thresholds.iter().enumerate() {
            for (p, name) in b.names.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", b.replication, pair_label(b.pair), t, name, b.scores[(p, j)]).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}
