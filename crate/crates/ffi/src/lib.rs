//! C ABI over `sharedrbf`.
//!
//! Every function returns an [`SrbfStatus`]; on failure the message is kept
//! per thread and read back with [`srbf_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sharedrbf::blp::posterior_cate_samples;
use sharedrbf::init::ThetaPrior;
use sharedrbf::linalg::quantile_sorted;
use sharedrbf::nalgebra::DMatrix;
use sharedrbf::{Dataset, Error, InitOptions, InitPlan, PosteriorChain, SamplerConfig, Schema};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// Malformed or unusable input data.
    Data = 4,
    Io = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrbfThetaPrior {
    Zero = 0,
    LeastSquares = 1,
}

/// Chain and initialization settings; start from [`srbf_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrbfFitOptions {
    pub n_iter: usize,
    pub n_burn: usize,
    pub n_fixed_gamma: usize,
    pub tune_interval: usize,
    pub acc_low: f64,
    pub acc_high: f64,
    pub epsilon0: f64,
    pub recalib_interval: usize,
    pub seed: u64,
    pub ewkm_lambda: f64,
    pub ewkm_max_iter: usize,
    pub jitter_sd: f64,
    pub theta_prior: SrbfThetaPrior,
}

impl SrbfFitOptions {
    fn split(&self) -> (SamplerConfig, InitOptions) {
        let sampler = SamplerConfig {
            n_iter: self.n_iter,
            n_burn: self.n_burn,
            n_fixed_gamma: self.n_fixed_gamma,
            tune_interval: self.tune_interval,
            acc_low: self.acc_low,
            acc_high: self.acc_high,
            epsilon0: self.epsilon0,
            recalib_interval: self.recalib_interval,
            seed: self.seed,
        };
        let init = InitOptions {
            ewkm_lambda: self.ewkm_lambda,
            ewkm_max_iter: self.ewkm_max_iter,
            jitter_sd: self.jitter_sd,
            theta_prior: match self.theta_prior {
                SrbfThetaPrior::Zero => ThetaPrior::Zero,
                SrbfThetaPrior::LeastSquares => ThetaPrior::LeastSquares,
            },
        };
        (sampler, init)
    }
}

/// A loaded dataset.
pub struct SrbfDataset {
    inner: Dataset,
}

/// A posterior chain plus what is needed to save it again.
pub struct SrbfChain {
    chain: PosteriorChain,
    config: SamplerConfig,
    plan: InitPlan,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SrbfStatus {
    match e {
        _ if e.is_numerical() => SrbfStatus::Numerical,
        Error::Io { .. } => SrbfStatus::Io,
        Error::Argument(_) | Error::Config(_) => SrbfStatus::InvalidArgument,
        _ => SrbfStatus::Data,
    }
}

struct Fail(SrbfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SrbfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrbfStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SrbfStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SrbfStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn to_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SrbfStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn to_strings(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<String>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|&s| to_str(s, what).map(str::to_string))
        .collect()
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn srbf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn srbf_fit_options_default() -> SrbfFitOptions {
    let s = SamplerConfig::default();
    let i = InitOptions::default();
    SrbfFitOptions {
        n_iter: s.n_iter,
        n_burn: s.n_burn,
        n_fixed_gamma: s.n_fixed_gamma,
        tune_interval: s.tune_interval,
        acc_low: s.acc_low,
        acc_high: s.acc_high,
        epsilon0: s.epsilon0,
        recalib_interval: s.recalib_interval,
        seed: s.seed,
        ewkm_lambda: i.ewkm_lambda,
        ewkm_max_iter: i.ewkm_max_iter,
        jitter_sd: i.jitter_sd,
        theta_prior: match i.theta_prior {
            ThetaPrior::Zero => SrbfThetaPrior::Zero,
            ThetaPrior::LeastSquares => SrbfThetaPrior::LeastSquares,
        },
    }
}

/// Loads a CSV with `treatment` and `outcome` columns. `nominal`/`ordinal`
/// list column names (either may be NULL when its count is 0).
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` receives a handle
/// owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn srbf_dataset_load(
    path: *const c_char,
    nominal: *const *const c_char,
    n_nominal: usize,
    ordinal: *const *const c_char,
    n_ordinal: usize,
    out: *mut *mut SrbfDataset,
) -> SrbfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(to_str(path, "path")?);
        let schema = Schema {
            nominal: to_strings(nominal, n_nominal, "nominal")?,
            ordinal: to_strings(ordinal, n_ordinal, "ordinal")?,
        };
        let inner = sharedrbf::load_dataset(path, &schema)?;
        *out = Box::into_raw(Box::new(SrbfDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle from [`srbf_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srbf_dataset_free(ds: *mut SrbfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Rows, covariate columns and treatment groups. Any out pointer may be NULL.
///
/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn srbf_dataset_shape(
    ds: *const SrbfDataset,
    n_rows: *mut usize,
    n_covariates: *mut usize,
    n_groups: *mut usize,
) -> SrbfStatus {
    guard(|| {
        let ds = &ds.as_ref().ok_or_else(|| null("dataset"))?.inner;
        if let Some(p) = n_rows.as_mut() {
            *p = ds.n();
        }
        if let Some(p) = n_covariates.as_mut() {
            *p = ds.p();
        }
        if let Some(p) = n_groups.as_mut() {
            *p = ds.n_groups();
        }
        Ok(())
    })
}

/// Fits the model. `options` may be NULL for defaults.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` receives a chain handle.
#[no_mangle]
pub unsafe extern "C" fn srbf_fit(
    ds: *const SrbfDataset,
    options: *const SrbfFitOptions,
    out: *mut *mut SrbfChain,
) -> SrbfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let ds = &ds.as_ref().ok_or_else(|| null("dataset"))?.inner;
        let opts = options.as_ref().copied().unwrap_or_else(|| srbf_fit_options_default());
        let (config, init) = opts.split();
        let fit = sharedrbf::fit(ds, &config, &init)?;
        *out = Box::into_raw(Box::new(SrbfChain {
            chain: fit.chain,
            config,
            plan: fit.plan,
        }));
        Ok(())
    })
}

/// # Safety
/// `chain` must be NULL or a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn srbf_chain_free(chain: *mut SrbfChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Posterior samples, treatment groups and raw covariate columns expected by
/// [`srbf_predict_cate`]. Any out pointer may be NULL.
///
/// # Safety
/// `chain` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn srbf_chain_shape(
    chain: *const SrbfChain,
    n_samples: *mut usize,
    n_groups: *mut usize,
    n_covariates: *mut usize,
) -> SrbfStatus {
    guard(|| {
        let c = &chain.as_ref().ok_or_else(|| null("chain"))?.chain;
        if let Some(p) = n_samples.as_mut() {
            *p = c.samples.len();
        }
        if let Some(p) = n_groups.as_mut() {
            *p = c.n_groups();
        }
        if let Some(p) = n_covariates.as_mut() {
            *p = c.covariates.input_names().len();
        }
        Ok(())
    })
}

/// # Safety
/// `chain` must be a live chain handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn srbf_chain_save(chain: *const SrbfChain, path: *const c_char) -> SrbfStatus {
    guard(|| {
        let c = chain.as_ref().ok_or_else(|| null("chain"))?;
        let path = to_str(path, "path")?;
        sharedrbf::write_chain(path, &c.chain, &c.config, &c.plan)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` receives a chain handle.
#[no_mangle]
pub unsafe extern "C" fn srbf_chain_load(path: *const c_char, out: *mut *mut SrbfChain) -> SrbfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let path = to_str(path, "path")?;
        let (header, chain) = sharedrbf::read_chain(path)?;
        *out = Box::into_raw(Box::new(SrbfChain {
            chain,
            config: header.config,
            plan: header.init,
        }));
        Ok(())
    })
}

/// Posterior CATE `tau_{g,g'}` on the original outcome scale for `n_rows`
/// rows of raw covariates `x` (row-major, `n_cols` columns in training
/// order). `g` and `g2` are one-based treatment labels. Writes the posterior
/// mean and the 2.5% / 97.5% quantiles; `lower`/`upper` may be NULL.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` values and each non-NULL output `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn srbf_predict_cate(
    chain: *const SrbfChain,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    g: usize,
    g2: usize,
    mean: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> SrbfStatus {
    guard(|| {
        let c = &chain.as_ref().ok_or_else(|| null("chain"))?.chain;
        if mean.is_null() {
            return Err(null("mean"));
        }
        let groups = c.n_groups();
        if g == 0 || g2 == 0 || g > groups || g2 > groups {
            return Err(Fail(
                SrbfStatus::InvalidArgument,
                format!("treatment labels must be in 1..={groups}"),
            ));
        }
        if n_rows == 0 {
            return Ok(());
        }
        if x.is_null() {
            return Err(null("x"));
        }
        let raw = DMatrix::from_row_slice(n_rows, n_cols, std::slice::from_raw_parts(x, n_rows * n_cols));
        let scaled = c.covariates.apply(&raw)?;
        let mean = std::slice::from_raw_parts_mut(mean, n_rows);
        let mut lower = (!lower.is_null()).then(|| std::slice::from_raw_parts_mut(lower, n_rows));
        let mut upper = (!upper.is_null()).then(|| std::slice::from_raw_parts_mut(upper, n_rows));
        if g == g2 {
            mean.fill(0.0);
            lower.iter_mut().for_each(|s| s.fill(0.0));
            upper.iter_mut().for_each(|s| s.fill(0.0));
            return Ok(());
        }
        let cates = posterior_cate_samples(c, &scaled, g - 1, g2 - 1)?;
        for i in 0..n_rows {
            let mut col: Vec<f64> = cates.values.column(i).iter().copied().collect();
            mean[i] = col.iter().sum::<f64>() / col.len() as f64;
            col.sort_by(|a, b| a.total_cmp(b));
            if let Some(l) = lower.as_deref_mut() {
                l[i] = quantile_sorted(&col, 0.025);
            }
            if let Some(u) = upper.as_deref_mut() {
                u[i] = quantile_sorted(&col, 0.975);
            }
        }
        Ok(())
    })
}
