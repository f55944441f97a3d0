//! Empirical-Bayes initialization: per-group RVMs fix the neuron budget `K`
//! and the pinned index sets `I_g`, entropy-weighted k-means places the
//! centers, and least squares / OLS supply θ, α and the σ scale.

mod ewkm;
mod rvm;

pub use ewkm::{ewkm, ewkm_objective, EwkmFit};
pub use rvm::{fit_rvm, fit_rvm_observed, median_kernel_width, RvmFit, RvmOptions};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::ScaledData;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::{design_matrix, Hyperparams, RbfParams};
use crate::rng::{stream, Stream};
use crate::sampler::sigma_d_for;

/// Smallest σ̂ the plan will hand to the sampler.
const SIGMA_HAT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitPlan {
    pub k: usize,
    /// Relevance-vector count `v_g` of each group.
    pub relevance_counts: Vec<usize>,
    /// Zero-based neuron indices `I_g`.
    pub fixed_sets: Vec<Vec<usize>>,
    pub mu0: Vec<Vec<f64>>,
    pub b0: f64,
    pub theta0: Vec<f64>,
    pub alpha0: f64,
    pub gamma0: Vec<Vec<u8>>,
    pub p0: Vec<f64>,
    pub sigma_hat: f64,
    pub sigma_d0: f64,
    /// Prior mean of θ: `theta0` or all zeros.
    pub theta_prior: ThetaPrior,
    pub sigma_mu: f64,
    pub c: f64,
    pub d: f64,
}

impl InitPlan {
    pub fn initial_params(&self, dim: usize, n_groups: usize) -> RbfParams {
        RbfParams {
            k: self.k,
            g: n_groups,
            dim,
            gamma: self.gamma0.clone(),
            mu: self.mu0.clone(),
            theta: self.theta0.clone(),
            alpha: self.alpha0,
            sigma: self.sigma_hat,
            p: self.p0.clone(),
            b: vec![self.b0; self.k],
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            sigma_mu: self.sigma_mu,
            sigma_d: self.sigma_d0,
            c: self.c,
            d: self.d,
            sigma_hat: self.sigma_hat,
            theta_mean: match self.theta_prior {
                ThetaPrior::Zero => Vec::new(),
                ThetaPrior::LeastSquares => self.theta0.clone(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Argument(format!("invalid init plan: {m}")));
        let vmax = self.relevance_counts.iter().copied().max().unwrap_or(0);
        if self.k != self.relevance_counts.len() * vmax {
            return fail(format!("K = {} is not G * max v", self.k));
        }
        let mut seen = vec![false; self.k];
        for (g, set) in self.fixed_sets.iter().enumerate() {
            if set.len() != self.relevance_counts[g] {
                return fail(format!("|I_{}| != v_{}", g + 1, g + 1));
            }
            for &k in set {
                if k >= self.k || seen[k] {
                    return fail(format!("I_{} is not disjoint or exceeds K", g + 1));
                }
                seen[k] = true;
            }
        }
        Ok(())
    }
}

/// Centre of the Gaussian prior on the neuron coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaPrior {
    Zero,
    /// The least-squares coefficients of the initial network.
    LeastSquares,
}

impl ThetaPrior {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "least-squares" => Ok(Self::LeastSquares),
            _ => Err(Error::Config(format!("unknown theta prior `{s}` (zero | least-squares)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::LeastSquares => "least-squares",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitOptions {
    pub ewkm_lambda: f64,
    pub ewkm_max_iter: usize,
    pub jitter_sd: f64,
    pub theta_prior: ThetaPrior,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            ewkm_lambda: 1.0,
            ewkm_max_iter: 100,
            jitter_sd: 1e-4,
            theta_prior: ThetaPrior::LeastSquares,
        }
    }
}

/// `K = G · max_g v_g`.
pub fn select_k(v: &[usize]) -> Result<usize> {
    if v.is_empty() || v.contains(&0) {
        return Err(Error::Argument("every group needs at least one relevance vector".into()));
    }
    Ok(v.len() * v.iter().max().unwrap())
}

/// Consecutive blocks `I_g = {Σ_{t<g} v_t, …, Σ_{t≤g} v_t − 1}` (zero-based)
/// and the matching initial Γ with ones exactly on `I_g`.
pub fn build_fixed_sets(v: &[usize], k: usize) -> Result<(Vec<Vec<usize>>, Vec<Vec<u8>>)> {
    let total: usize = v.iter().sum();
    if total > k {
        return Err(Error::Argument(format!("sum of v ({total}) exceeds K ({k})")));
    }
    let mut sets = Vec::with_capacity(v.len());
    let mut gamma = vec![vec![0u8; v.len()]; k];
    let mut offset = 0;
    for (g, &vg) in v.iter().enumerate() {
        let set: Vec<usize> = (offset..offset + vg).collect();
        for &kk in &set {
            gamma[kk][g] = 1;
        }
        sets.push(set);
        offset += vg;
    }
    Ok((sets, gamma))
}

/// Adds `Normal(0, sd²)` noise to every coordinate, re-drawing until no two
/// centers coincide.
pub fn jitter_centers<R: Rng + ?Sized>(centers: &mut [Vec<f64>], sd: f64, rng: &mut R) {
    for c in centers.iter_mut() {
        for v in c.iter_mut() {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    loop {
        let mut collided = false;
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if centers[i] == centers[j] {
                    collided = true;
                    for v in centers[j].iter_mut() {
                        *v += sd * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
        }
        if !collided {
            break;
        }
    }
}

/// `b = √2 / (K(K−1)) · Σ_{i<j} |μ_i − μ_j|`.
pub fn init_bandwidth(centers: &[Vec<f64>]) -> Result<f64> {
    let k = centers.len();
    if k < 2 {
        return Err(Error::Argument("bandwidth needs at least two centers".into()));
    }
    let mut sum = 0.0;
    for i in 0..k - 1 {
        for j in i + 1..k {
            sum += crate::model::squared_distance(&centers[i], &centers[j]).sqrt();
        }
    }
    let b = std::f64::consts::SQRT_2 / (k * (k - 1)) as f64 * sum;
    if b > 0.0 {
        Ok(b)
    } else {
        Err(Error::DegenerateCenters)
    }
}

/// Least-squares `(θ, α)` for the network with Γ, centers and bandwidth fixed.
/// A 1e-8 ridge on the θ block keeps unused neurons at zero.
pub fn init_theta_ls(data: &ScaledData, gamma: &[Vec<u8>], mu: &[Vec<f64>], b: f64) -> Result<(Vec<f64>, f64)> {
    let k = mu.len();
    let mut p = RbfParams::empty(k, data.n_groups, data.dim());
    p.gamma = gamma.to_vec();
    p.mu = mu.to_vec();
    p.b = vec![b; k];
    let xs = design_matrix(&p, data);
    let n = data.n();
    let mut a = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    a[(0, 0)] = n as f64;
    rhs[0] = data.y.sum();
    let xty = xs.transpose() * &data.y;
    let xtx = xs.transpose() * &xs;
    let col_sums = xs.row_sum();
    for i in 0..k {
        a[(0, i + 1)] = col_sums[i];
        a[(i + 1, 0)] = col_sums[i];
        rhs[i + 1] = xty[i];
        for j in 0..k {
            a[(i + 1, j + 1)] = xtx[(i, j)];
        }
        a[(i + 1, i + 1)] += 1e-8;
    }
    let sol = a
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| a.lu().solve(&rhs))
        .ok_or_else(|| Error::numerical("initial least-squares fit"))?;
    Ok((sol.iter().skip(1).copied().collect(), sol[0]))
}

/// Design `[1, X, z_2, …, z_G]` used for the σ̂ pre-fit and the OLS S-learner.
pub(crate) fn treatment_design(x: &DMatrix<f64>, z: &[usize], n_groups: usize) -> DMatrix<f64> {
    let n = x.nrows();
    let p = x.ncols();
    DMatrix::from_fn(n, 1 + p + n_groups - 1, |i, j| {
        if j == 0 {
            1.0
        } else if j <= p {
            x[(i, j - 1)]
        } else {
            (z[i] == j - p) as u8 as f64
        }
    })
}

/// Residual sd of OLS of the outcome on the covariates plus treatment dummies
/// (denominator `N − P′ − G`).
pub fn estimate_sigma_hat(data: &ScaledData) -> Result<f64> {
    let n = data.n();
    let params = data.dim() + data.n_groups;
    if n <= params {
        return Err(Error::Argument(format!(
            "sigma-hat pre-fit needs N > P' + G ({n} <= {params})"
        )));
    }
    let design = treatment_design(&data.x, &data.z, data.n_groups);
    let (beta, fallback) = least_squares(&design, &data.y, 0.0, 1e-8)?;
    if fallback {
        log::warn!("rank-deficient design in the sigma-hat pre-fit; used a ridge fallback");
    }
    let rss = (&data.y - design * beta).norm_squared();
    Ok((rss / (n - params) as f64).sqrt())
}

/// The full pipeline: RVM per group → K → I_g → EWKM → jitter → bandwidth →
/// least-squares θ → σ̂.
pub fn build_init_plan(data: &ScaledData, options: &InitOptions, seed: u64) -> Result<InitPlan> {
    let groups = data.group_indices();
    let mut v = Vec::with_capacity(groups.len());
    for (g, rows) in groups.iter().enumerate() {
        let xg = data.x.select_rows(rows);
        let yg: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
        let fit = fit_rvm(&xg, &yg)?;
        if fit.v() == 0 {
            log::warn!("RVM for group {} kept no vectors; using v = 1", g + 1);
        }
        v.push(fit.v().max(1));
    }
    let k = select_k(&v)?;
    let (fixed_sets, gamma0) = build_fixed_sets(&v, k)?;

    let mut rng = stream(seed, Stream::Init);
    let clusters = ewkm(&data.x, k, options.ewkm_lambda, options.ewkm_max_iter, &mut rng)?;
    let mut mu0 = clusters.centers;
    let mut jrng = stream(seed, Stream::Jitter);
    jitter_centers(&mut mu0, options.jitter_sd, &mut jrng);
    let b0 = init_bandwidth(&mu0)?;
    let (theta0, alpha0) = init_theta_ls(data, &gamma0, &mu0, b0)?;
    let sigma_hat = estimate_sigma_hat(data)?.max(SIGMA_HAT_FLOOR);
    let k1 = v.iter().copied().max().unwrap_or(1);

    let plan = InitPlan {
        k,
        relevance_counts: v,
        fixed_sets,
        mu0,
        b0,
        theta0,
        alpha0,
        gamma0,
        p0: vec![0.5; data.n_groups],
        sigma_hat,
        sigma_d0: sigma_d_for(k1),
        theta_prior: options.theta_prior,
        sigma_mu: 1.0,
        c: 1.0,
        d: 1.0,
    };
    plan.validate()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn select_k_examples() {
        assert_eq!(select_k(&[3, 5, 4]).unwrap(), 15);
        assert_eq!(select_k(&[1, 1, 1]).unwrap(), 3);
        assert_eq!(select_k(&[2, 2, 7]).unwrap(), 21);
        assert!(select_k(&[0, 2]).is_err());
    }

    #[test]
    fn fixed_set_examples() {
        let one_based = |sets: Vec<Vec<usize>>| -> Vec<Vec<usize>> {
            sets.into_iter().map(|s| s.into_iter().map(|k| k + 1).collect()).collect()
        };
        let (s, g) = build_fixed_sets(&[2, 3, 1], 9).unwrap();
        assert_eq!(one_based(s), vec![vec![1, 2], vec![3, 4, 5], vec![6]]);
        assert_eq!(g[0], vec![1, 0, 0]);
        assert_eq!(g[4], vec![0, 1, 0]);
        assert_eq!(g[5], vec![0, 0, 1]);
        assert_eq!(g[8], vec![0, 0, 0]);
        let (s, _) = build_fixed_sets(&[1, 1, 1], 3).unwrap();
        assert_eq!(one_based(s), vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn jitter_separates_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = vec![vec![0.5, 0.5]; 4];
        jitter_centers(&mut c, 1e-4, &mut rng);
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(c[i], c[j]);
            }
            assert!(c[i].iter().all(|v| (v - 0.5).abs() < 1e-3));
        }
    }

    #[test]
    fn jitter_tail_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64; 1000]).collect();
        let orig = c.clone();
        jitter_centers(&mut c, 1e-4, &mut rng);
        let max = c
            .iter()
            .flatten()
            .zip(orig.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max < 6e-4, "max perturbation {max}");
    }

    #[test]
    fn bandwidth_examples() {
        let b = init_bandwidth(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!((b - 0.707107).abs() < 1e-6);
        let h = 3f64.sqrt() / 2.0;
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]];
        assert!((init_bandwidth(&tri).unwrap() - 0.707107).abs() < 1e-6);
        let scaled: Vec<Vec<f64>> = tri.iter().map(|c| c.iter().map(|v| v * 3.5).collect()).collect();
        assert!((init_bandwidth(&scaled).unwrap() - 3.5 * init_bandwidth(&tri).unwrap()).abs() < 1e-12);
        assert!(init_bandwidth(&[vec![1.0]]).is_err());
        assert!(matches!(init_bandwidth(&[vec![1.0], vec![1.0]]), Err(Error::DegenerateCenters)));
    }

    fn data_from(x: DMatrix<f64>, y: Vec<f64>, g: usize) -> ScaledData {
        let n = y.len();
        ScaledData::new(x, DVector::from_vec(y), (0..n).map(|i| i % g).collect(), g).unwrap()
    }

    #[test]
    fn theta_ls_exact_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(30, 2, |_, _| rng.random::<f64>());
        let gamma = vec![vec![1u8, 0], vec![0, 1], vec![1, 1]];
        let mu = vec![vec![0.2, 0.2], vec![0.8, 0.5], vec![0.5, 0.9]];
        let mut truth = RbfParams::empty(3, 2, 2);
        truth.gamma = gamma.clone();
        truth.mu = mu.clone();
        truth.b = vec![0.4; 3];
        truth.theta = vec![0.3, -0.2, 0.25];
        truth.alpha = 0.05;
        let y: Vec<f64> = (0..30)
            .map(|i| truth.evaluate(i % 2, &[x[(i, 0)], x[(i, 1)]]))
            .collect();
        let data = data_from(x.clone(), y, 2);
        let (theta, alpha) = init_theta_ls(&data, &gamma, &mu, 0.4).unwrap();
        assert!((alpha - 0.05).abs() < 1e-6);
        for k in 0..3 {
            assert!((theta[k] - truth.theta[k]).abs() < 1e-6);
        }

        let y: Vec<f64> = (0..30).map(|_| rng.random::<f64>() - 0.5).collect();
        let mean = y.iter().sum::<f64>() / 30.0;
        let data = data_from(x, y, 2);
        let zero = vec![vec![0u8, 0]; 3];
        let (theta, alpha) = init_theta_ls(&data, &zero, &mu, 0.4).unwrap();
        assert!(theta.iter().all(|t| *t == 0.0));
        assert!((alpha - mean).abs() < 1e-12);
    }

    #[test]
    fn sigma_hat_perfect_fit_and_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..40)
            .map(|i| 0.1 + 0.3 * x[(i, 0)] - 0.2 * x[(i, 1)] + 0.05 * (i % 3) as f64)
            .collect();
        assert!(estimate_sigma_hat(&data_from(x, y, 3)).unwrap() <= 1e-8);

        let n = 500;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s = estimate_sigma_hat(&data_from(x, y, 3)).unwrap();
        assert!((0.08..=0.12).contains(&s), "{s}");
    }

    #[test]
    fn sigma_hat_needs_enough_rows() {
        let x = DMatrix::from_fn(4, 2, |i, j| (i * j) as f64);
        assert!(estimate_sigma_hat(&data_from(x, vec![0.0, 1.0, 2.0, 3.0], 2)).is_err());
    }
}
