use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use sharedrbf::blp;
use sharedrbf::config::RunConfig;
use sharedrbf::linalg::quantile_sorted;
use sharedrbf::sampler::{Acceptance, Diagnostics};
use sharedrbf::sim;
use sharedrbf::{load_covariates, load_dataset, read_chain, write_chain, Error, Hyperparams, PosteriorChain, Result};

#[derive(Parser, Debug)]
#[command(name = "sharedrbf", version, about = "Bayesian shared-neuron RBF networks for multi-treatment CATEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the model to a CSV dataset and write the posterior chain.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "CSV", help = "training data with treatment and outcome columns")]
        data: Option<String>,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        init: InitArgs,
        #[arg(long, value_name = "NAMES", help = "comma-separated nominal columns [default: none]")]
        nominal: Option<String>,
        #[arg(long, value_name = "NAMES", help = "comma-separated ordinal columns [default: none]")]
        ordinal: Option<String>,
    },
    /// Posterior CATE (mean and 95% interval) for each row of a covariate file.
    PredictCate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_name = "G,G'", help = "one-based treatment pair [default: 2,1]")]
        pair: Option<String>,
    },
    /// Best linear projection of the CATE and threshold scores.
    Blp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_name = "G,G'", help = "one-based treatment pair [default: 2,1]")]
        pair: Option<String>,
        #[arg(long, value_name = "LIST", help = "simulation | coarse | comma-separated values [default: simulation]")]
        thresholds: Option<String>,
    },
    /// Simulated comparison against meta-learner baselines.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Print the version.
    Version,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "FILE", help = "key = value config file; flags override it")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR", help = "output directory [default: .]")]
    output: Option<String>,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[arg(long, value_name = "JSONL", help = "chain written by `fit`")]
    chain: Option<String>,
    #[arg(long, value_name = "CSV", help = "covariate rows to evaluate")]
    covariates: Option<String>,
}

#[derive(Args, Debug)]
struct SamplerArgs {
    #[arg(long, value_name = "N", help = "iterations [default: 6000]")]
    n_iter: Option<String>,
    #[arg(long, value_name = "N", help = "burn-in iterations [default: 3000]")]
    n_burn: Option<String>,
    #[arg(long, value_name = "N", help = "iterations with the neuron sets frozen [default: 1000]")]
    n_fixed_gamma: Option<String>,
    #[arg(long, value_name = "N", help = "step-size tuning interval [default: 200]")]
    tune_interval: Option<String>,
    #[arg(long, value_name = "X", help = "lower target acceptance [default: 0.45]")]
    acc_low: Option<String>,
    #[arg(long, value_name = "X", help = "upper target acceptance [default: 0.7]")]
    acc_high: Option<String>,
    #[arg(long, value_name = "X", help = "initial Langevin step size [default: 0.01]")]
    epsilon0: Option<String>,
    #[arg(long, value_name = "N", help = "prior-scale recalibration interval during burn-in [default: 100]")]
    recalib_interval: Option<String>,
    #[arg(long, value_name = "N", help = "random seed [default: 1]")]
    seed: Option<String>,
}

#[derive(Args, Debug)]
struct InitArgs {
    #[arg(long, value_name = "X", help = "clustering entropy weight [default: 1]")]
    ewkm_lambda: Option<String>,
    #[arg(long, value_name = "N", help = "clustering iteration cap [default: 100]")]
    ewkm_max_iter: Option<String>,
    #[arg(long, value_name = "X", help = "center jitter sd [default: 0.0001]")]
    jitter_sd: Option<String>,
    #[arg(long, value_name = "KIND", help = "zero | least-squares [default: least-squares]")]
    theta_prior: Option<String>,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, value_name = "NAME", help = "setting1 | from-covariates [default: setting1]")]
    setting: Option<String>,
    #[arg(long, value_name = "N", help = "rows per replication [default: 180]")]
    n: Option<String>,
    #[arg(long, value_name = "N", help = "replications [default: 10]")]
    replications: Option<String>,
    #[arg(long, value_name = "X", help = "training fraction [default: 0.6667]")]
    split_fraction: Option<String>,
    #[arg(long, value_name = "CSV", help = "covariates and treatment for from-covariates")]
    covariate_file: Option<String>,
    #[arg(long, value_name = "LIST", help = "one-based covariates driving the outcome [default: 1,2,3,4,5]")]
    active_columns: Option<String>,
    #[arg(long, value_name = "X", help = "noise sd [default: 1]")]
    noise_sd: Option<String>,
    #[arg(long, value_name = "LIST", help = "shared-rbf,ols-t,ols-s,rvm-t,rvm-s [default: all]")]
    methods: Option<String>,
    #[arg(long, value_name = "LIST", help = "pairs scored by MSE [default: 21 31 12]")]
    pairs: Option<String>,
    #[arg(long, value_name = "LIST", help = "pairs summarized by threshold scores [default: none]")]
    blp_pairs: Option<String>,
    #[arg(long, value_name = "X", help = "score thresholds [default: simulation]")]
    thresholds: Option<String>,
    #[arg(long, value_name = "N", help = "worker threads [default: SHAREDRBF_THREADS or all cores]")]
    threads: Option<String>,
}

type Overrides<'a> = Vec<(&'static str, &'a Option<String>)>;

impl SamplerArgs {
    fn overrides(&self) -> Overrides<'_> {
        vec![
            ("n_iter", &self.n_iter),
            ("n_burn", &self.n_burn),
            ("n_fixed_gamma", &self.n_fixed_gamma),
            ("tune_interval", &self.tune_interval),
            ("acc_low", &self.acc_low),
            ("acc_high", &self.acc_high),
            ("epsilon0", &self.epsilon0),
            ("recalib_interval", &self.recalib_interval),
            ("seed", &self.seed),
        ]
    }
}

impl InitArgs {
    fn overrides(&self) -> Overrides<'_> {
        vec![
            ("ewkm_lambda", &self.ewkm_lambda),
            ("ewkm_max_iter", &self.ewkm_max_iter),
            ("jitter_sd", &self.jitter_sd),
            ("theta_prior", &self.theta_prior),
        ]
    }
}

impl SimArgs {
    fn overrides(&self) -> Overrides<'_> {
        vec![
            ("setting", &self.setting),
            ("n", &self.n),
            ("replications", &self.replications),
            ("split_fraction", &self.split_fraction),
            ("covariate_file", &self.covariate_file),
            ("active_columns", &self.active_columns),
            ("noise_sd", &self.noise_sd),
            ("methods", &self.methods),
            ("pairs", &self.pairs),
            ("blp_pairs", &self.blp_pairs),
            ("thresholds", &self.thresholds),
            ("threads", &self.threads),
        ]
    }
}

impl ChainArgs {
    fn overrides(&self) -> Overrides<'_> {
        vec![("chain", &self.chain), ("covariates", &self.covariates)]
    }
}

fn resolve(common: &Common, overrides: Overrides<'_>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.output {
        cfg.set("output", o)?;
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    Ok(cfg.output.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize)]
struct DiagnosticsOut<'a> {
    n_samples: usize,
    k: usize,
    acceptance: &'a Acceptance,
    hyper: &'a Hyperparams,
    diagnostics: &'a Diagnostics,
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let data_path = cfg.require(&cfg.data, "data")?;
    let ds = load_dataset(data_path, &cfg.schema())?;
    let fit = sharedrbf::fit(&ds, &cfg.sampler, &cfg.init)?;
    write_chain(out_path(cfg, "chain.jsonl")?, &fit.chain, &cfg.sampler, &fit.plan)?;
    write_json(&out_path(cfg, "init_plan.json")?, &fit.plan)?;
    write_json(
        &out_path(cfg, "diagnostics.json")?,
        &DiagnosticsOut {
            n_samples: fit.chain.samples.len(),
            k: fit.plan.k,
            acceptance: &fit.chain.acceptance,
            hyper: &fit.chain.hyper,
            diagnostics: &fit.chain.diagnostics,
        },
    )?;
    let g = fit.chain.n_groups();
    let mut header = String::from("row,treatment,outcome");
    for j in 0..g {
        header.push_str(&format!(",f{}", j + 1));
    }
    let data = &fit.prepared.data;
    let rows = (0..data.n()).map(|i| {
        let x = data.row(i);
        let mut line = format!("{},{},{}", i + 1, data.z[i] + 1, ds.outcome()[i]);
        for j in 0..g {
            line.push_str(&format!(",{}", fit.chain.mean_outcome(j, &x)));
        }
        line
    });
    write_lines(&out_path(cfg, "fitted.csv")?, &header, rows)?;
    eprintln!(
        "fit: K = {}, {} posterior samples written to {}",
        fit.plan.k,
        fit.chain.samples.len(),
        cfg.output.join("chain.jsonl").display()
    );
    Ok(())
}

/// Loads the chain and maps the covariate file through its transform.
fn chain_and_covariates(cfg: &RunConfig) -> Result<(PosteriorChain, DMatrix<f64>)> {
    let (_, chain) = read_chain(cfg.require(&cfg.chain, "chain")?)?;
    let cov_path = cfg.require(&cfg.covariates, "covariates")?;
    let raw = load_covariates(cov_path, &chain.covariates.input_names())?;
    let x = chain.covariates.apply(&raw)?;
    Ok((chain, x))
}

fn check_pair(chain: &PosteriorChain, pair: (usize, usize)) -> Result<()> {
    let g = chain.n_groups();
    if pair.0 >= g || pair.1 >= g {
        return Err(Error::Config(format!(
            "pair {}: the chain has {g} treatment groups",
            sim::pair_label(pair)
        )));
    }
    Ok(())
}

fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let (chain, x) = chain_and_covariates(cfg)?;
    check_pair(&chain, cfg.pair)?;
    let (g, h) = cfg.pair;
    let n = x.nrows();
    let rows: Vec<String> = if g == h {
        (0..n).map(|i| format!("{},0,0,0", i + 1)).collect()
    } else {
        let cates = blp::posterior_cate_samples(&chain, &x, g, h)?;
        (0..n)
            .map(|i| {
                let mut col: Vec<f64> = cates.values.column(i).iter().copied().collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                col.sort_by(|a, b| a.total_cmp(b));
                format!(
                    "{},{},{},{}",
                    i + 1,
                    mean,
                    quantile_sorted(&col, 0.025),
                    quantile_sorted(&col, 0.975)
                )
            })
            .collect()
    };
    write_lines(&out_path(cfg, "cate.csv")?, "row,mean,q2.5,q97.5", rows)?;
    eprintln!("predict-cate: {n} rows, pair {}", sim::pair_label(cfg.pair));
    Ok(())
}

fn cmd_blp(cfg: &RunConfig) -> Result<()> {
    let (chain, x) = chain_and_covariates(cfg)?;
    check_pair(&chain, cfg.pair)?;
    let names = chain.covariates.output_names();
    let summary = blp::summarize(&chain, &x, &names, cfg.pair.0, cfg.pair.1, &cfg.thresholds)?;
    blp::write_coefficients(out_path(cfg, "blp_coefficients.csv")?, &summary)?;
    blp::write_scores(out_path(cfg, "blp_scores.csv")?, &summary)?;
    eprintln!(
        "blp: {} predictors, {} thresholds, pair {}",
        names.len(),
        cfg.thresholds.len(),
        sim::pair_label(cfg.pair)
    );
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let sim_cfg = cfg.sim_config()?;
    let report = sim::run_replications(&sim_cfg)?;
    sim::write_report(out_path(cfg, "sim_report.csv")?, &report)?;
    sim::write_summary(out_path(cfg, "sim_summary.csv")?, &report)?;
    if !sim_cfg.blp_pairs.is_empty() {
        sim::write_blp_scores(out_path(cfg, "sim_blp_scores.csv")?, &report)?;
    }
    for s in report.summary() {
        eprintln!(
            "{:<10} tau{}  median MSE {:.4}  (min {:.4}, max {:.4}, n = {})",
            s.method.name(),
            sim::pair_label(s.pair),
            s.median,
            s.min,
            s.max,
            s.count
        );
    }
    if !report.failures.is_empty() {
        eprintln!("{} replication(s) failed", report.failures.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            common,
            data,
            sampler,
            init,
            nominal,
            ordinal,
        } => {
            let mut o = vec![("data", &data), ("nominal", &nominal), ("ordinal", &ordinal)];
            o.extend(sampler.overrides());
            o.extend(init.overrides());
            cmd_fit(&resolve(&common, o)?)
        }
        Command::PredictCate { common, chain, pair } => {
            let mut o = chain.overrides();
            o.push(("pair", &pair));
            cmd_predict(&resolve(&common, o)?)
        }
        Command::Blp {
            common,
            chain,
            pair,
            thresholds,
        } => {
            let mut o = chain.overrides();
            o.push(("pair", &pair));
            o.push(("thresholds", &thresholds));
            cmd_blp(&resolve(&common, o)?)
        }
        Command::Simulate {
            common,
            sampler,
            init,
            sim,
        } => {
            let mut o = sampler.overrides();
            o.extend(init.overrides());
            o.extend(sim.overrides());
            cmd_simulate(&resolve(&common, o)?)
        }
        Command::Version => {
            println!("sharedrbf {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
