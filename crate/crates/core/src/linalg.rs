//! Small dense linear-algebra helpers shared by the fitting routines.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky factor of `a`; on failure retries once with `jitter` added to the
/// diagonal. The flag reports whether the retry was needed.
pub fn cholesky_with_jitter(a: &DMatrix<f64>, jitter: f64) -> Option<(Cholesky<f64, Dyn>, bool)> {
    if let Some(c) = a.clone().cholesky() {
        return Some((c, false));
    }
    let mut b = a.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += jitter;
    }
    b.cholesky().map(|c| (c, true))
}

/// Least-squares coefficients of `y` on the columns of `x` through the normal
/// equations. `ridge` is always added to the diagonal of `XᵀX`; if the system
/// is still not positive definite, `fallback_ridge` is added as well.
///
/// Returns the coefficients and whether the fallback was used.
pub fn least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    ridge: f64,
    fallback_ridge: f64,
) -> Result<(DVector<f64>, bool)> {
    let mut xtx = x.transpose() * x;
    for i in 0..xtx.nrows() {
        xtx[(i, i)] += ridge;
    }
    let xty = x.transpose() * y;
    let (chol, fallback) = cholesky_with_jitter(&xtx, fallback_ridge)
        .ok_or_else(|| Error::numerical("least-squares normal equations"))?;
    Ok((chol.solve(&xty), fallback))
}

/// Draws from `Normal(mean, Q⁻¹)` given the Cholesky factor `L` of the
/// precision `Q = LLᵀ`: `mean + L⁻ᵀ ξ`.
pub fn sample_from_precision(
    mean: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
    std_normal: DVector<f64>,
) -> DVector<f64> {
    let lt = chol.l().transpose();
    let shift = lt
        .solve_upper_triangular(&std_normal)
        .expect("Cholesky factor has a positive diagonal");
    mean + shift
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Linear-interpolation quantile (type 7) of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_exact_fit() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let (b, fb) = least_squares(&x, &y, 0.0, 1e-8).unwrap();
        assert!(!fb);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_design_uses_fallback() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (b, fb) = least_squares(&x, &y, 0.0, 1e-8).unwrap();
        assert!(fb);
        assert!(((x * b) - y).norm() < 1e-6);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
