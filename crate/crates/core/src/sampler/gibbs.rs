//! Conjugate and Metropolis updates for α, θ, Γ, p and σ, plus the burn-in
//! recalibration of σ_d.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use super::state::SamplerState;
use crate::data::ScaledData;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, sample_from_precision};
use crate::model::RbfParams;

/// Mean and sd of the full conditional of α.
pub fn alpha_full_conditional(state: &SamplerState, data: &ScaledData) -> (f64, f64) {
    let p = state.params();
    let s2 = p.sigma * p.sigma;
    let sd2 = state.hyper().sigma_d.powi(2);
    // y_i - basis_i = resid_i + α
    let sum: f64 = state.residuals().iter().map(|r| r + p.alpha).sum();
    let var = 1.0 / (1.0 / sd2 + data.n() as f64 / s2);
    (var * sum / s2, var.sqrt())
}

pub fn update_alpha<R: Rng + ?Sized>(state: &mut SamplerState, data: &ScaledData, rng: &mut R) -> f64 {
    let (mean, sd) = alpha_full_conditional(state, data);
    let z: f64 = rng.sample(StandardNormal);
    let new = mean + sd * z;
    let shift = new - state.params.alpha;
    state.params.alpha = new;
    for r in state.resid_mut() {
        *r -= shift;
    }
    new
}

/// Full conditional of the coefficients of neurons used by some treatment.
#[derive(Debug, Clone)]
pub struct ThetaConditional {
    /// Neurons whose Γ row is non-empty, in increasing order.
    pub active: Vec<usize>,
    pub mean: DVector<f64>,
    /// Posterior covariance `D`.
    pub cov: DMatrix<f64>,
}

/// Gated design restricted to the active neurons.
fn active_design(state: &SamplerState, data: &ScaledData, active: &[usize]) -> DMatrix<f64> {
    let p = state.params();
    let n = data.n();
    let mut xs = DMatrix::zeros(n, active.len());
    for (c, &k) in active.iter().enumerate() {
        let col = state.kernel_column(k);
        for i in 0..n {
            if p.included(k, data.z[i]) {
                xs[(i, c)] = col[i];
            }
        }
    }
    xs
}

struct ThetaParts {
    active: Vec<usize>,
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn theta_parts(state: &SamplerState, data: &ScaledData) -> Result<ThetaParts> {
    let p = state.params();
    let active: Vec<usize> = (0..p.k).filter(|&k| !p.row_is_empty(k)).collect();
    let xs = active_design(state, data, &active);
    let s2 = p.sigma * p.sigma;
    let r = DVector::from_iterator(data.n(), data.y.iter().map(|y| y - p.alpha));
    let mut prec = xs.transpose() * &xs / s2;
    let prior = 1.0 / state.hyper().sigma_d.powi(2);
    for j in 0..active.len() {
        prec[(j, j)] += prior;
    }
    let mut rhs = xs.transpose() * r / s2;
    for (j, &k) in active.iter().enumerate() {
        rhs[j] += prior * state.hyper().theta_prior_mean(k);
    }
    let (chol, _) = cholesky_with_jitter(&prec, 1e-10)
        .ok_or_else(|| Error::numerical("theta full-conditional factorization"))?;
    let mean = chol.solve(&rhs);
    Ok(ThetaParts { active, mean, chol })
}

pub fn theta_full_conditional(state: &SamplerState, data: &ScaledData) -> Result<ThetaConditional> {
    let parts = theta_parts(state, data)?;
    Ok(ThetaConditional {
        cov: parts.chol.inverse(),
        active: parts.active,
        mean: parts.mean,
    })
}

/// Two-part draw: neurons unused by every treatment come from the prior,
/// the rest jointly from their Gaussian full conditional.
pub fn update_theta<R: Rng + ?Sized>(state: &mut SamplerState, data: &ScaledData, rng: &mut R) -> Result<()> {
    let parts = theta_parts(state, data)?;
    let xi = DVector::from_fn(parts.active.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let draw = sample_from_precision(&parts.mean, &parts.chol, xi);
    let sd = state.hyper.sigma_d;
    let mut next = 0;
    for k in 0..state.params.k {
        if next < parts.active.len() && parts.active[next] == k {
            state.params.theta[k] = draw[next];
            next += 1;
        } else {
            state.params.theta[k] = state.hyper.theta_prior_mean(k) + sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    state.refresh_residuals(data);
    Ok(())
}

/// `log l¹ − log l⁰` for entry (k, g), computed from group-g subjects only.
pub fn gamma_log_likelihood_ratio(state: &SamplerState, k: usize, g: usize) -> f64 {
    let p = state.params();
    let theta = p.theta[k];
    if theta == 0.0 {
        return 0.0;
    }
    let on = p.included(k, g);
    let col = state.kernel_column(k);
    let resid = state.residuals();
    let mut ss1 = 0.0;
    let mut ss0 = 0.0;
    for &i in state.group(g) {
        let c = theta * col[i];
        let (r1, r0) = if on { (resid[i], resid[i] + c) } else { (resid[i] - c, resid[i]) };
        ss1 += r1 * r1;
        ss0 += r0 * r0;
    }
    -(ss1 - ss0) / (2.0 * p.sigma * p.sigma)
}

/// `p l¹ / (p l¹ + (1 − p) l⁰)` from the log-likelihood difference, stable for
/// any magnitude of `log_ratio`.
pub fn inclusion_probability(p: f64, log_ratio: f64) -> f64 {
    let t = log_ratio + (p / (1.0 - p)).ln();
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Gibbs sweep over the free Γ entries in a fresh random order. Entries in
/// `fixed[g]` are held at 1 when `fixed` is given.
pub fn update_gamma<R: Rng + ?Sized>(
    state: &mut SamplerState,
    fixed: Option<&[Vec<usize>]>,
    rng: &mut R,
) {
    let (k_total, g_total) = (state.params.k, state.params.g);
    let mut entries: Vec<(usize, usize)> = Vec::with_capacity(k_total * g_total);
    for k in 0..k_total {
        for g in 0..g_total {
            if fixed.is_some_and(|f| f[g].contains(&k)) {
                continue;
            }
            entries.push((k, g));
        }
    }
    entries.shuffle(rng);
    for (k, g) in entries {
        let delta = gamma_log_likelihood_ratio(state, k, g);
        let prob = inclusion_probability(state.params.p[g], delta);
        let draw = u8::from(rng.random::<f64>() < prob);
        let old = state.params.gamma[k][g];
        if draw != old {
            state.params.gamma[k][g] = draw;
            // switching on subtracts θ_k φ_ik from group-g residuals
            let scale = if draw == 1 { -state.params.theta[k] } else { state.params.theta[k] };
            state.shift_group_residuals(k, g, scale);
        }
    }
}

/// Beta posterior shapes for `p_g`. With `fixed`, the counts run over the
/// indices not in `fixed` only.
pub fn pg_posterior_shapes(params: &RbfParams, g: usize, fixed: Option<&[usize]>, c: f64, d: f64) -> (f64, f64) {
    let free = |k: &usize| fixed.is_none_or(|f| !f.contains(k));
    let considered = (0..params.k).filter(free).count();
    let on = (0..params.k).filter(free).filter(|&k| params.included(k, g)).count();
    (c + on as f64, d + (considered - on) as f64)
}

pub fn update_pg<R: Rng + ?Sized>(state: &mut SamplerState, fixed: Option<&[Vec<usize>]>, rng: &mut R) -> Result<()> {
    let (c, d) = (state.hyper.c, state.hyper.d);
    for g in 0..state.params.g {
        let (a, b) = pg_posterior_shapes(&state.params, g, fixed.map(|f| f[g].as_slice()), c, d);
        let beta = Beta::new(a, b).map_err(|e| Error::numerical(format!("beta({a}, {b}): {e}")))?;
        state.params.p[g] = beta.sample(rng).clamp(1e-12, 1.0 - 1e-12);
    }
    Ok(())
}

/// Half-Cauchy density `C⁺(σ | 0, scale)`.
pub fn half_cauchy_pdf(sigma: f64, scale: f64) -> f64 {
    2.0 / (std::f64::consts::PI * scale * (1.0 + (sigma / scale).powi(2)))
}

/// Acceptance probability of the σ move: prior ratio times the σ³ Jacobian.
pub fn sigma_acceptance_prob(sigma_hat: f64, current: f64, proposed: f64) -> f64 {
    let num = half_cauchy_pdf(proposed, sigma_hat) * proposed.powi(3);
    let den = half_cauchy_pdf(current, sigma_hat) * current.powi(3);
    (num / den).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaStep {
    pub proposed: f64,
    pub accepted: bool,
    /// Residual sum of squares was zero and had to be floored.
    pub degenerate: bool,
}

/// Independence Metropolis–Hastings step for σ. The proposal draws the
/// precision from `Gamma(1 + N/2, rate = SS/2)`, the flat-prior full
/// conditional of σ⁻², so the acceptance reduces to the prior ratio.
pub fn update_sigma<R: Rng + ?Sized>(state: &mut SamplerState, data: &ScaledData, rng: &mut R) -> Result<SigmaStep> {
    let ss = state.sum_sq_resid();
    let mut rate = 0.5 * ss;
    let degenerate = !(rate >= 1e-300);
    if degenerate {
        log::warn!("all residuals are zero; flooring the sigma proposal rate");
        rate = 1e-300;
    }
    let shape = 1.0 + data.n() as f64 / 2.0;
    let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::numerical(format!("sigma proposal: {e}")))?;
    let precision: f64 = gamma.sample(rng);
    let proposed = precision.sqrt().recip();
    let u: f64 = rng.random();
    let mut accepted = false;
    if proposed > 0.0 && proposed.is_finite() {
        let a = sigma_acceptance_prob(state.hyper.sigma_hat, state.params.sigma, proposed);
        if u < a {
            state.params.sigma = proposed;
            accepted = true;
        }
    }
    Ok(SigmaStep {
        proposed,
        accepted,
        degenerate,
    })
}

/// `σ_d = 1 / (4 √K₁)` with `K₁ = max_g Σ_k γ_{k,g}`, floored at 1.
pub fn recalibrate_sigma_d(params: &RbfParams) -> f64 {
    let k1 = params.active_counts().into_iter().max().unwrap_or(0).max(1);
    sigma_d_for(k1)
}

pub fn sigma_d_for(k1: usize) -> f64 {
    1.0 / (4.0 * (k1.max(1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_likelihood, Hyperparams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper() -> Hyperparams {
        Hyperparams {
            sigma_mu: 1.0,
            sigma_d: 1.0,
            c: 1.0,
            d: 1.0,
            sigma_hat: 1.0,
            theta_mean: Vec::new(),
        }
    }

    #[test]
    fn alpha_with_no_bases() {
        let data = ScaledData::new(
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DVector::from_vec(vec![1.0, -1.0]),
            vec![0, 0],
            1,
        )
        .unwrap();
        let params = RbfParams::empty(2, 1, 1);
        let s = SamplerState::new(params, hyper(), &data);
        let (m, sd) = alpha_full_conditional(&s, &data);
        assert!(m.abs() < 1e-15);
        assert!((sd - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn alpha_flat_prior_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 5000;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let data = ScaledData::new(DMatrix::zeros(n, 1), DVector::from_vec(y), vec![0; n], 1).unwrap();
        let mut h = hyper();
        h.sigma_d = 1e8;
        let s = SamplerState::new(RbfParams::empty(1, 1, 1), h, &data);
        let (m, _) = alpha_full_conditional(&s, &data);
        assert!((m - mean).abs() < 1e-9);
    }

    #[test]
    fn theta_hand_example() {
        // One neuron centred far from nothing: b huge makes the kernel 1 everywhere.
        let data = ScaledData::new(DMatrix::zeros(4, 1), DVector::from_vec(vec![1.0; 4]), vec![0; 4], 1).unwrap();
        let mut p = RbfParams::empty(1, 1, 1);
        p.gamma[0][0] = 1;
        p.b[0] = 1e200;
        let s = SamplerState::new(p, hyper(), &data);
        let tc = theta_full_conditional(&s, &data).unwrap();
        assert!((tc.cov[(0, 0)] - 0.2).abs() < 1e-15);
        assert!((tc.mean[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn theta_prior_mean_shifts_conditional() {
        // D = 0.2 as above; mean = D (θ₀/σ_d² + ΣR/σ²) = 0.2 (1 + 4).
        let data = ScaledData::new(DMatrix::zeros(4, 1), DVector::from_vec(vec![1.0; 4]), vec![0; 4], 1).unwrap();
        let mut p = RbfParams::empty(1, 1, 1);
        p.gamma[0][0] = 1;
        p.b[0] = 1e200;
        let mut h = hyper();
        h.theta_mean = vec![1.0];
        let s = SamplerState::new(p, h.clone(), &data);
        let tc = theta_full_conditional(&s, &data).unwrap();
        assert!((tc.mean[0] - 1.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        h.theta_mean = vec![-0.7];
        h.sigma_d = 0.1;
        let mut s = SamplerState::new(RbfParams::empty(1, 1, 1), h, &data);
        let mut sum = 0.0;
        for _ in 0..10000 {
            update_theta(&mut s, &data, &mut rng).unwrap();
            sum += s.params().theta[0];
        }
        assert!((sum / 10000.0 + 0.7).abs() < 4.0 * 0.1 / 100.0);
    }

    #[test]
    fn theta_empty_row_drawn_from_prior() {
        let data = ScaledData::new(DMatrix::zeros(3, 1), DVector::from_vec(vec![0.4; 3]), vec![0; 3], 1).unwrap();
        let mut h = hyper();
        h.sigma_d = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut draws = Vec::new();
        let mut s = SamplerState::new(RbfParams::empty(1, 1, 1), h, &data);
        for _ in 0..20000 {
            update_theta(&mut s, &data, &mut rng).unwrap();
            draws.push(s.params().theta[0]);
        }
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(m.abs() < 4.0 * 0.3 / (20000f64).sqrt());
        assert!((v.sqrt() - 0.3).abs() < 0.01);
    }

    #[test]
    fn theta_draws_centre_on_conditional_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 12;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let z = (0..n).map(|i| i % 2).collect();
        let data = ScaledData::new(x, y, z, 2).unwrap();
        let mut p = RbfParams::empty(3, 2, 2);
        p.gamma = vec![vec![1, 0], vec![1, 1], vec![0, 1]];
        p.mu = vec![vec![0.2, 0.3], vec![0.5, 0.5], vec![0.9, 0.1]];
        p.b = vec![0.5; 3];
        p.sigma = 0.3;
        let mut s = SamplerState::new(p, hyper(), &data);
        let tc = theta_full_conditional(&s, &data).unwrap();
        let reps = 100_000;
        let mut sum = [0.0; 3];
        for _ in 0..reps {
            update_theta(&mut s, &data, &mut rng).unwrap();
            for k in 0..3 {
                sum[k] += s.params().theta[k];
            }
        }
        for k in 0..3 {
            let se = (tc.cov[(k, k)] / reps as f64).sqrt();
            assert!((sum[k] / reps as f64 - tc.mean[k]).abs() < 3.0 * se, "neuron {k}");
        }
    }

    #[test]
    fn inclusion_probability_examples() {
        assert!((inclusion_probability(0.3, 0.0) - 0.3).abs() < 1e-15);
        assert!((inclusion_probability(0.5, 2f64.ln()) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(inclusion_probability(0.5, 1e6), 1.0);
        assert_eq!(inclusion_probability(0.5, -1e6), 0.0);
    }

    #[test]
    fn group_restricted_ratio_matches_full_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let z = (0..n).map(|i| i % 3).collect();
        let data = ScaledData::new(x, y, z, 3).unwrap();
        let mut p = RbfParams::empty(4, 3, 2);
        for k in 0..4 {
            for g in 0..3 {
                p.gamma[k][g] = rng.random_range(0..2);
            }
            p.mu[k] = vec![rng.random(), rng.random()];
            p.theta[k] = rng.random_range(-1.0..1.0);
        }
        p.b = vec![0.6; 4];
        p.sigma = 0.4;
        let s = SamplerState::new(p.clone(), hyper(), &data);
        for k in 0..4 {
            for g in 0..3 {
                let mut on = p.clone();
                on.gamma[k][g] = 1;
                let mut off = p.clone();
                off.gamma[k][g] = 0;
                let full = log_likelihood(&on, &data) - log_likelihood(&off, &data);
                assert!((gamma_log_likelihood_ratio(&s, k, g) - full).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gamma_sweep_keeps_fixed_entries_and_caches() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 30;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let z = (0..n).map(|i| i % 3).collect();
        let data = ScaledData::new(x, y, z, 3).unwrap();
        let mut p = RbfParams::empty(6, 3, 2);
        for k in 0..6 {
            p.mu[k] = vec![rng.random(), rng.random()];
            p.theta[k] = rng.random_range(-1.0..1.0);
        }
        p.gamma[0][0] = 1;
        p.gamma[1][1] = 1;
        p.gamma[2][2] = 1;
        let fixed = vec![vec![0], vec![1], vec![2]];
        let mut s = SamplerState::new(p, hyper(), &data);
        for _ in 0..50 {
            update_gamma(&mut s, Some(&fixed), &mut rng);
            assert_eq!(s.params().gamma[0][0], 1);
            assert_eq!(s.params().gamma[1][1], 1);
            assert_eq!(s.params().gamma[2][2], 1);
        }
        let mut fresh = s.clone();
        fresh.refresh(&data);
        for (a, b) in s.residuals().iter().zip(fresh.residuals()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_shape_examples() {
        let mut p = RbfParams::empty(5, 1, 1);
        for k in 0..5 {
            p.gamma[k][0] = 1;
        }
        assert_eq!(pg_posterior_shapes(&p, 0, None, 1.0, 1.0), (6.0, 1.0));

        let mut p = RbfParams::empty(5, 1, 1);
        p.gamma[0][0] = 1;
        p.gamma[1][0] = 1;
        p.gamma[3][0] = 1;
        assert_eq!(pg_posterior_shapes(&p, 0, Some(&[0, 1]), 1.0, 1.0), (2.0, 3.0));

        let p = RbfParams::empty(4, 1, 1);
        assert_eq!(pg_posterior_shapes(&p, 0, None, 2.0, 3.0), (2.0, 7.0));
    }

    #[test]
    fn sigma_acceptance_examples() {
        assert_eq!(sigma_acceptance_prob(1.0, 0.7, 0.7), 1.0);
        assert_eq!(sigma_acceptance_prob(1.0, 1.0, 2.0), 1.0);
        assert!((sigma_acceptance_prob(1.0, 2.0, 1.0) - 0.3125).abs() < 1e-12);
    }

    #[test]
    fn sigma_stays_positive_on_exact_fit() {
        let data = ScaledData::new(DMatrix::zeros(3, 1), DVector::from_vec(vec![0.0; 3]), vec![0; 3], 1).unwrap();
        let mut s = SamplerState::new(RbfParams::empty(1, 1, 1), hyper(), &data);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let step = update_sigma(&mut s, &data, &mut rng).unwrap();
        assert!(step.degenerate);
        assert!(s.params().sigma > 0.0);
    }

    #[test]
    fn sigma_d_examples() {
        assert_eq!(sigma_d_for(1), 0.25);
        assert_eq!(sigma_d_for(16), 0.0625);
        let mut p = RbfParams::empty(8, 3, 1);
        for k in 0..3 {
            p.gamma[k][0] = 1;
        }
        for k in 0..7 {
            p.gamma[k][1] = 1;
        }
        for k in 0..5 {
            p.gamma[k][2] = 1;
        }
        assert!((recalibrate_sigma_d(&p) - 0.094491).abs() < 1e-6);
        assert_eq!(recalibrate_sigma_d(&RbfParams::empty(3, 2, 1)), 0.25);
    }
}
