#![allow(dead_code)]

use gpc_mc::kernels::Dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `Q diag(λ) Qᵀ` with Haar-ish `Q` and `log10 λ` uniform on `[0, log10 cond]`.
pub fn spd_with_condition(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, n, n).qr().q();
    let top = cond.log10();
    let mut lambda: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(0.0..=top))).collect();
    if n > 1 {
        lambda[0] = 1.0;
        lambda[n - 1] = cond;
    }
    let r = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda)) * q.transpose();
    symmetrize(r)
}

/// Random correlation-like matrix: `A Aᵀ + n I`, rescaled to unit diagonal.
pub fn random_correlation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = gaussian_matrix(rng, n, n);
    let s = &a * a.transpose() + DMatrix::identity(n, n) * (0.3 * n as f64);
    let d: Vec<f64> = (0..n).map(|i| s[(i, i)].sqrt()).collect();
    symmetrize(DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (d[i] * d[j])))
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize, spread: f64) -> Dataset {
    let x = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-spread..spread));
    let y = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    Dataset::new(x, y).unwrap()
}

/// `n1` class +1 patterns followed by `n2` class -1 patterns on one feature.
pub fn two_class_dataset(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> Dataset {
    let x: Vec<f64> = (0..n1 + n2)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            if i < n1 {
                0.2 * z
            } else {
                1.0 + 0.3 * z
            }
        })
        .collect();
    let y = (0..n1 + n2).map(|i| if i < n1 { 1 } else { -1 }).collect();
    Dataset::from_column(&x, y).unwrap()
}
