//! Entropy-weighted k-means.
//!
//! Minimizes `Σ_l Σ_{i∈l} Σ_p w_{l,p} (x_{i,p} − c_{l,p})² + λ Σ_l Σ_p w_{l,p} log w_{l,p}`
//! by block coordinate descent over assignments, centers and per-cluster
//! feature weights (rows of `w` sum to one).

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EwkmFit {
    /// `centers[l]` is the center of cluster l.
    pub centers: Vec<Vec<f64>>,
    /// `weights[l][p]`.
    pub weights: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Objective after every iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn weighted_dist(x: &[f64], c: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(c).zip(w).map(|((a, b), w)| w * (a - b) * (a - b)).sum()
}

pub fn ewkm_objective(
    rows: &[Vec<f64>],
    assignments: &[usize],
    centers: &[Vec<f64>],
    weights: &[Vec<f64>],
    lambda: f64,
) -> f64 {
    let fit: f64 = rows
        .iter()
        .zip(assignments)
        .map(|(x, &l)| weighted_dist(x, &centers[l], &weights[l]))
        .sum();
    let entropy: f64 = weights
        .iter()
        .flatten()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum();
    fit + lambda * entropy
}

pub fn ewkm<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    k: usize,
    lambda: f64,
    max_iter: usize,
    rng: &mut R,
) -> Result<EwkmFit> {
    let n = x.nrows();
    let p = x.ncols();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("EWKM needs 1 <= K <= N (K = {k}, N = {n})")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Argument("EWKM lambda must be positive".into()));
    }
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let seeds = rand::seq::index::sample(rng, n, k).into_vec();
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&i| rows[i].clone()).collect();
    let mut weights = vec![vec![1.0 / p as f64; p]; k];
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, x) in rows.iter().enumerate() {
            let cur = assignments[i];
            let mut best = cur;
            let mut best_d = if cur == usize::MAX {
                f64::INFINITY
            } else {
                weighted_dist(x, &centers[cur], &weights[cur])
            };
            for l in 0..k {
                let d = weighted_dist(x, &centers[l], &weights[l]);
                if d < best_d {
                    best_d = d;
                    best = l;
                }
            }
            if best != cur {
                assignments[i] = best;
                changed = true;
            }
        }
        changed |= reseed_empty(&rows, &mut assignments, &centers, &weights, k);
        if !changed {
            break;
        }

        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; p]; k];
        for (x, &l) in rows.iter().zip(&assignments) {
            counts[l] += 1;
            for j in 0..p {
                sums[l][j] += x[j];
            }
        }
        for l in 0..k {
            for j in 0..p {
                centers[l][j] = sums[l][j] / counts[l] as f64;
            }
        }

        let mut disp = vec![vec![0.0; p]; k];
        for (x, &l) in rows.iter().zip(&assignments) {
            for j in 0..p {
                disp[l][j] += (x[j] - centers[l][j]).powi(2);
            }
        }
        for l in 0..k {
            let lo = disp[l].iter().copied().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = disp[l].iter().map(|d| (-(d - lo) / lambda).exp()).collect();
            let s: f64 = e.iter().sum();
            weights[l] = e.iter().map(|v| v / s).collect();
        }
        objective.push(ewkm_objective(&rows, &assignments, &centers, &weights, lambda));
    }

    Ok(EwkmFit {
        centers,
        weights,
        assignments,
        objective,
        iterations,
    })
}

/// Moves, for every empty cluster, the point farthest from its own center
/// (among clusters with more than one member) into it.
fn reseed_empty(
    rows: &[Vec<f64>],
    assignments: &mut [usize],
    centers: &[Vec<f64>],
    weights: &[Vec<f64>],
    k: usize,
) -> bool {
    let mut counts = vec![0usize; k];
    for &l in assignments.iter() {
        counts[l] += 1;
    }
    let mut moved = false;
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let far = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[assignments[*i]] > 1)
            .map(|(i, x)| (i, weighted_dist(x, &centers[assignments[i]], &weights[assignments[i]])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((i, _)) = far {
            counts[assignments[i]] -= 1;
            assignments[i] = empty;
            counts[empty] = 1;
            moved = true;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separated_masses() {
        let mut data = Vec::new();
        for _ in 0..6 {
            data.extend([0.1, 0.2]);
        }
        for _ in 0..4 {
            data.extend([0.9, 0.7]);
        }
        let x = DMatrix::from_row_slice(10, 2, &data);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fit = ewkm(&x, 2, 1.0, 100, &mut rng).unwrap();
            let mut c = fit.centers.clone();
            c.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert!((c[0][0] - 0.1).abs() < 1e-6 && (c[0][1] - 0.2).abs() < 1e-6);
            assert!((c[1][0] - 0.9).abs() < 1e-6 && (c[1][1] - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn k_equals_n_gives_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(7, 3, |_, _| rng.random::<f64>());
        let fit = ewkm(&x, 7, 1.0, 100, &mut rng).unwrap();
        let fit_part: f64 = (0..7)
            .map(|i| {
                let r: Vec<f64> = x.row(i).iter().copied().collect();
                weighted_dist(&r, &fit.centers[fit.assignments[i]], &fit.weights[fit.assignments[i]])
            })
            .sum();
        assert_eq!(fit_part, 0.0);
        for i in 0..7 {
            let r: Vec<f64> = x.row(i).iter().copied().collect();
            assert!(fit.centers.contains(&r));
        }
    }

    #[test]
    fn weights_are_distributions_and_objective_descends() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(60, 4, |_, j| rng.random::<f64>() * (j + 1) as f64);
            let fit = ewkm(&x, 5, 0.5, 100, &mut rng).unwrap();
            for w in &fit.weights {
                assert!(w.iter().all(|v| *v >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for pair in fit.objective.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }

    #[test]
    fn too_many_clusters() {
        let x = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(ewkm(&x, 4, 1.0, 10, &mut rng), Err(Error::Argument(_))));
    }
}
