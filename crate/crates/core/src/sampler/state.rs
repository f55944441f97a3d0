use crate::data::ScaledData;
use crate::model::{rbf_kernel, Hyperparams, RbfParams};

/// Parameter state plus the caches the sweep keeps in sync with it: kernel
/// values for every (subject, neuron) pair and the current residuals.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub(crate) params: RbfParams,
    pub(crate) hyper: Hyperparams,
    n: usize,
    dim: usize,
    /// Row-major copy of the covariates.
    x: Vec<f64>,
    /// `phi[k * n + i]` = kernel(x_i, μ_k), regardless of Γ.
    phi: Vec<f64>,
    /// `y_i - f_{g(i)}(x_i)`.
    resid: Vec<f64>,
    groups: Vec<Vec<usize>>,
}

impl SamplerState {
    pub fn new(params: RbfParams, hyper: Hyperparams, data: &ScaledData) -> Self {
        let n = data.n();
        let dim = data.dim();
        let mut x = Vec::with_capacity(n * dim);
        for i in 0..n {
            x.extend(data.x.row(i).iter());
        }
        let mut s = Self {
            phi: vec![0.0; params.k * n],
            resid: vec![0.0; n],
            params,
            hyper,
            n,
            dim,
            x,
            groups: data.group_indices(),
        };
        s.refresh(data);
        s
    }

    /// Recomputes every cache from the parameters.
    pub fn refresh(&mut self, data: &ScaledData) {
        for k in 0..self.params.k {
            self.refresh_kernel(k);
        }
        self.refresh_residuals(data);
    }

    pub(crate) fn refresh_kernel(&mut self, k: usize) {
        let n = self.n;
        for i in 0..n {
            let xi = &self.x[i * self.dim..(i + 1) * self.dim];
            self.phi[k * n + i] = rbf_kernel(xi, &self.params.mu[k], self.params.b[k]);
        }
    }

    pub(crate) fn refresh_residuals(&mut self, data: &ScaledData) {
        let p = &self.params;
        for i in 0..self.n {
            let g = data.z[i];
            let mut f = p.alpha;
            for k in 0..p.k {
                if p.gamma[k][g] == 1 {
                    f += p.theta[k] * self.phi[k * self.n + i];
                }
            }
            self.resid[i] = data.y[i] - f;
        }
    }

    pub fn params(&self) -> &RbfParams {
        &self.params
    }
    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }
    pub fn hyper_mut(&mut self) -> &mut Hyperparams {
        &mut self.hyper
    }
    pub fn residuals(&self) -> &[f64] {
        &self.resid
    }
    pub fn into_params(self) -> RbfParams {
        self.params
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }
    pub(crate) fn dim(&self) -> usize {
        self.dim
    }
    pub(crate) fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
    pub(crate) fn kernel_column(&self, k: usize) -> &[f64] {
        &self.phi[k * self.n..(k + 1) * self.n]
    }
    pub(crate) fn resid_mut(&mut self) -> &mut [f64] {
        &mut self.resid
    }
    pub(crate) fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }
    /// `resid_i += scale * φ_ik` for every subject i in group g.
    pub(crate) fn shift_group_residuals(&mut self, k: usize, g: usize, scale: f64) {
        let col = &self.phi[k * self.n..(k + 1) * self.n];
        for &i in &self.groups[g] {
            self.resid[i] += scale * col[i];
        }
    }

    pub(crate) fn sum_sq_resid(&self) -> f64 {
        self.resid.iter().map(|r| r * r).sum()
    }
}
