//! Best linear projections of posterior CATE draws and the threshold scores
//! `s_{p,t}` built from them.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, quantile_sorted};
use crate::model::cate;
use crate::sampler::PosteriorChain;

/// Ridge added to `XᵀX` only when the plain system is singular.
pub const BLP_FALLBACK_RIDGE: f64 = 1e-10;

/// Thresholds used for real-data summaries.
pub const COARSE_THRESHOLDS: [f64; 6] = [0.0, 0.1, 0.15, 0.2, 0.25, 0.3];

/// `0.1, 0.2, …, 2.0`.
pub fn simulation_thresholds() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 10.0).collect()
}

/// `B×N` posterior draws of `τ_{gg'}(x_i)` on the original outcome scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CateSampleMatrix {
    pub values: DMatrix<f64>,
    /// Zero-based treatment pair `(g, g')`.
    pub pair: (usize, usize),
}

/// Evaluates every posterior sample at every row of `x` (scaled covariates).
pub fn posterior_cate_samples(chain: &PosteriorChain, x: &DMatrix<f64>, g: usize, g2: usize) -> Result<CateSampleMatrix> {
    let groups = chain.n_groups();
    if g >= groups || g2 >= groups {
        return Err(Error::Argument(format!(
            "treatment pair ({}, {}) outside 1..={groups}",
            g + 1,
            g2 + 1
        )));
    }
    if g == g2 {
        return Err(Error::Argument("BLP needs two different treatments".into()));
    }
    if chain.samples.is_empty() {
        return Err(Error::Argument("chain holds no samples".into()));
    }
    let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
    let b = chain.samples.len();
    let per_sample: Vec<Vec<f64>> = chain
        .samples
        .par_iter()
        .map(|s| rows.iter().map(|r| cate(s, &chain.outcome, g, g2, r)).collect())
        .collect();
    let values = DMatrix::from_fn(b, x.nrows(), |bi, i| per_sample[bi][i]);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite CATE sample"));
    }
    Ok(CateSampleMatrix { values, pair: (g, g2) })
}

/// `[1, X]` together with the map `z ↦ (XᵀX)⁻¹Xᵀz`.
#[derive(Debug, Clone)]
pub struct BlpDesign {
    pub x: DMatrix<f64>,
    pub hat: DMatrix<f64>,
    /// Whether the ridge fallback was needed.
    pub ridged: bool,
}

impl BlpDesign {
    pub fn new(covariates: &DMatrix<f64>) -> Result<Self> {
        let n = covariates.nrows();
        let p = covariates.ncols();
        if n <= p + 1 {
            return Err(Error::Argument(format!("BLP needs N > P' + 1 ({n} <= {})", p + 1)));
        }
        let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] });
        let xtx = x.transpose() * &x;
        let (chol, ridged) = cholesky_with_jitter(&xtx, BLP_FALLBACK_RIDGE)
            .ok_or_else(|| Error::numerical("BLP design is singular"))?;
        if ridged {
            log::warn!("singular BLP design; added a {BLP_FALLBACK_RIDGE:e} ridge");
        }
        let hat = chol.solve(&x.transpose());
        Ok(Self { x, hat, ridged })
    }

    pub fn n_coefficients(&self) -> usize {
        self.x.ncols()
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.hat * z
    }

    /// Fitted projection `X(XᵀX)⁻¹Xᵀz`.
    pub fn fitted(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.x * self.project(z)
    }
}

/// Row `b` holds `(XᵀX)⁻¹Xᵀ τ_b`, intercept first.
pub fn blp_coefficients(cates: &CateSampleMatrix, design: &BlpDesign) -> Result<DMatrix<f64>> {
    if cates.values.ncols() != design.x.nrows() {
        return Err(Error::Argument(format!(
            "CATE samples cover {} subjects but the design has {}",
            cates.values.ncols(),
            design.x.nrows()
        )));
    }
    Ok(&cates.values * design.hat.transpose())
}

/// `s_{p,t}`: share of rows with `|β_p| > t`. Output is `coefficients × thresholds`.
pub fn threshold_scores(beta: &DMatrix<f64>, thresholds: &[f64]) -> Result<DMatrix<f64>> {
    if thresholds.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Argument("thresholds must be non-negative".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Argument("thresholds must be sorted ascending".into()));
    }
    let b = beta.nrows() as f64;
    Ok(DMatrix::from_fn(beta.ncols(), thresholds.len(), |p, j| {
        beta.column(p).iter().filter(|v| v.abs() > thresholds[j]).count() as f64 / b
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlpSummary {
    /// `B×(P'+1)` per-sample coefficients, intercept first.
    pub beta: DMatrix<f64>,
    pub thresholds: Vec<f64>,
    /// `(P'+1)×|t|`.
    pub scores: DMatrix<f64>,
    pub pair: (usize, usize),
    /// Coefficient names, starting with `intercept`.
    pub names: Vec<String>,
}

impl BlpSummary {
    pub fn mean_coefficients(&self) -> Vec<f64> {
        let b = self.beta.nrows() as f64;
        (0..self.beta.ncols()).map(|p| self.beta.column(p).sum() / b).collect()
    }

    /// Score of coefficient `p` (0 = intercept) at threshold `t`, if `t` is on the grid.
    pub fn score_at(&self, p: usize, t: f64) -> Option<f64> {
        let j = self.thresholds.iter().position(|v| (v - t).abs() < 1e-12)?;
        Some(self.scores[(p, j)])
    }
}

/// The full pipeline for one treatment pair.
pub fn summarize(
    chain: &PosteriorChain,
    x: &DMatrix<f64>,
    names: &[String],
    g: usize,
    g2: usize,
    thresholds: &[f64],
) -> Result<BlpSummary> {
    if names.len() != x.ncols() {
        return Err(Error::Argument("one name per covariate column expected".into()));
    }
    let cates = posterior_cate_samples(chain, x, g, g2)?;
    let design = BlpDesign::new(x)?;
    let beta = blp_coefficients(&cates, &design)?;
    let scores = threshold_scores(&beta, thresholds)?;
    let mut all = vec!["intercept".to_string()];
    all.extend(names.iter().cloned());
    Ok(BlpSummary {
        beta,
        thresholds: thresholds.to_vec(),
        scores,
        pair: (g, g2),
        names: all,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// `predictor,mean,q2.5,q50,q97.5`, one row per coefficient.
pub fn write_coefficients(path: impl AsRef<Path>, summary: &BlpSummary) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "predictor,mean,q2.5,q50,q97.5").map_err(io)?;
    let means = summary.mean_coefficients();
    for (p, name) in summary.names.iter().enumerate() {
        let mut col: Vec<f64> = summary.beta.column(p).iter().copied().collect();
        col.sort_by(|a, b| a.total_cmp(b));
        writeln!(
            w,
            "{name},{},{},{},{}",
            means[p],
            quantile_sorted(&col, 0.025),
            quantile_sorted(&col, 0.5),
            quantile_sorted(&col, 0.975)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row per threshold: `threshold,intercept,<predictors…>`.
pub fn write_scores(path: impl AsRef<Path>, summary: &BlpSummary) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "threshold,{}", summary.names.join(",")).map_err(io)?;
    for (j, t) in summary.thresholds.iter().enumerate() {
        let row: Vec<String> = (0..summary.names.len()).map(|p| summary.scores[(p, j)].to_string()).collect();
        writeln!(w, "{t},{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariateTransform, OutcomeTransform};
    use crate::model::{Hyperparams, RbfParams};
    use crate::sampler::{Acceptance, Diagnostics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.random::<f64>())
    }

    fn single(values: DMatrix<f64>) -> CateSampleMatrix {
        CateSampleMatrix { values, pair: (1, 0) }
    }

    fn chain_of(samples: Vec<RbfParams>) -> PosteriorChain {
        PosteriorChain {
            samples,
            acceptance: Acceptance { mu: vec![], sigma: 0.0 },
            fixed_sets: vec![],
            outcome: OutcomeTransform { y_min: 0.0, y_max: 4.0 },
            covariates: CovariateTransform { columns: vec![] },
            hyper: Hyperparams { sigma_mu: 1.0, sigma_d: 0.25, c: 1.0, d: 1.0, sigma_hat: 1.0, theta_mean: vec![] },
            diagnostics: Diagnostics::default(),
        }
    }

    fn random_params(rng: &mut ChaCha8Rng, same_columns: bool) -> RbfParams {
        let mut p = RbfParams::empty(4, 3, 2);
        for k in 0..4 {
            p.mu[k] = vec![rng.random(), rng.random()];
            p.theta[k] = rng.random::<f64>() - 0.5;
            p.b[k] = 0.5;
            for g in 0..3 {
                p.gamma[k][g] = rng.random_bool(0.5) as u8;
            }
            if same_columns {
                p.gamma[k][1] = p.gamma[k][0];
            }
        }
        p.alpha = 0.1;
        p
    }

    #[test]
    fn identical_columns_give_zero_cates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chain = chain_of((0..5).map(|_| random_params(&mut rng, true)).collect());
        let m = posterior_cate_samples(&chain, &uniform(10, 2, 2), 1, 0).unwrap();
        assert!(m.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cate_samples_match_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chain = chain_of((0..6).map(|_| random_params(&mut rng, false)).collect());
        let x = uniform(12, 2, 4);
        let m = posterior_cate_samples(&chain, &x, 2, 0).unwrap();
        for (b, s) in chain.samples.iter().enumerate() {
            for i in 0..12 {
                let (x1, x2) = (x[(i, 0)], x[(i, 1)]);
                let mut f = [0.0; 3];
                for (g, fg) in f.iter_mut().enumerate() {
                    for k in 0..4 {
                        let d2 = (x1 - s.mu[k][0]).powi(2) + (x2 - s.mu[k][1]).powi(2);
                        *fg += s.gamma[k][g] as f64 * s.theta[k] * (-d2 / 0.25).exp();
                    }
                }
                assert!((m.values[(b, i)] - 4.0 * (f[2] - f[0])).abs() < 1e-12);
            }
        }
        assert!(posterior_cate_samples(&chain, &x, 3, 0).is_err());
        assert!(posterior_cate_samples(&chain, &x, 1, 1).is_err());
    }

    #[test]
    fn affine_cate_is_reproduced() {
        let x = uniform(40, 3, 5);
        let design = BlpDesign::new(&x).unwrap();
        let tau = DMatrix::from_fn(1, 40, |_, i| 2.0 + 3.0 * x[(i, 0)]);
        let beta = blp_coefficients(&single(tau), &design).unwrap();
        let expect = [2.0, 3.0, 0.0, 0.0];
        for j in 0..4 {
            assert!((beta[(0, j)] - expect[j]).abs() < 1e-10);
        }
        let tau = DMatrix::from_element(1, 40, -1.5);
        let beta = blp_coefficients(&single(tau), &design).unwrap();
        assert!((beta[(0, 0)] + 1.5).abs() < 1e-10);
        assert!((1..4).all(|j| beta[(0, j)].abs() < 1e-10));
    }

    #[test]
    fn coefficients_match_normal_equations_and_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = uniform(30, 4, 7);
        let design = BlpDesign::new(&x).unwrap();
        let a = DMatrix::from_fn(3, 30, |_, _| rng.random::<f64>() * 10.0 - 5.0);
        let b = DMatrix::from_fn(3, 30, |_, _| rng.random::<f64>() * 10.0 - 5.0);
        let beta = blp_coefficients(&single(a.clone()), &design).unwrap();
        let xd = &design.x;
        let xtx = xd.transpose() * xd;
        for r in 0..3 {
            let z: DVector<f64> = a.row(r).transpose();
            let oracle = xtx.clone().lu().solve(&(xd.transpose() * z)).unwrap();
            for j in 0..5 {
                assert!((beta[(r, j)] - oracle[j]).abs() < 1e-8);
            }
        }
        let combo = blp_coefficients(&single(&a * 2.0 - &b * 0.5), &design).unwrap();
        let parts = beta * 2.0 - blp_coefficients(&single(b), &design).unwrap() * 0.5;
        assert!((combo - parts).amax() < 1e-10);
    }

    #[test]
    fn fitted_projection_is_idempotent() {
        let x = uniform(25, 2, 8);
        let design = BlpDesign::new(&x).unwrap();
        let z = DVector::from_fn(25, |i, _| (i as f64).sin());
        let h = design.fitted(&z);
        assert!((design.fitted(&h) - &h).amax() < 1e-10);
    }

    #[test]
    fn design_needs_more_rows_than_coefficients() {
        assert!(BlpDesign::new(&uniform(3, 2, 1)).is_err());
    }

    #[test]
    fn score_examples() {
        let beta = DMatrix::from_column_slice(4, 1, &[0.1, -0.2, 0.3, -0.4]);
        let s = threshold_scores(&beta, &[0.0, 0.25, 0.4, 1.0]).unwrap();
        assert_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(0, 1)], 0.5);
        assert_eq!(s[(0, 2)], 0.0);
        assert_eq!(s[(0, 3)], 0.0);
        assert!(threshold_scores(&beta, &[0.2, 0.1]).is_err());
        assert!(threshold_scores(&beta, &[-0.1]).is_err());
    }

    #[test]
    fn scores_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let beta = DMatrix::from_fn(50, 6, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let s = threshold_scores(&beta, &simulation_thresholds()).unwrap();
        for p in 0..6 {
            for j in 1..20 {
                assert!(s[(p, j)] <= s[(p, j - 1)]);
            }
        }
    }

    #[test]
    fn report_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let chain = chain_of(vec![random_params(&mut rng, false)]);
        let x = uniform(20, 2, 11);
        let names = vec!["a".to_string(), "b".to_string()];
        let s = summarize(&chain, &x, &names, 1, 0, &COARSE_THRESHOLDS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cp = dir.path().join("c.csv");
        let sp = dir.path().join("s.csv");
        write_coefficients(&cp, &s).unwrap();
        write_scores(&sp, &s).unwrap();
        let coef = std::fs::read_to_string(cp).unwrap();
        let lines: Vec<&str> = coef.lines().collect();
        assert_eq!(lines.len(), 4);
        for (p, line) in lines[1..].iter().enumerate() {
            let f: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
            assert!(f.iter().all(|v| *v == s.beta[(0, p)]));
        }
        let scores = std::fs::read_to_string(sp).unwrap();
        for line in scores.lines() {
            assert_eq!(line.split(',').count(), 2 + 2);
        }
    }
}
