//! Seeded synthetic datasets used by the benchmarks and test fixtures.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;
use crate::space::PointCloud;

/// Isotropic Gaussian blob centered at `center` with the given deviation.
pub fn gaussian_blob<T: Real>(
    n: usize,
    center: &[T],
    stdev: f64,
    seed: u64,
) -> PointCloud<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<T>> = (0..n)
        .map(|_| {
            center
                .iter()
                .map(|&c| {
                    let z: f64 = rng.sample(StandardNormal);
                    c + T::from_f64(z * stdev).unwrap()
                })
                .collect()
        })
        .collect();
    PointCloud::from_rows(&rows).expect("generated cloud is valid")
}

/// Uniform sample from the axis-aligned box `[lo, hi]^d`.
pub fn uniform_box<T: Real>(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> PointCloud<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<T>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| T::from_f64(rng.random_range(lo..hi)).unwrap())
                .collect()
        })
        .collect();
    PointCloud::from_rows(&rows).expect("generated cloud is valid")
}

/// Two interleaving half-circles with Gaussian jitter.
pub fn moons<T: Real>(n: usize, noise: f64, seed: u64) -> PointCloud<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let rows: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let (cx, cy) = if i < half {
                let theta = std::f64::consts::PI * i as f64 / (half.max(2) - 1) as f64;
                (theta.cos(), theta.sin())
            } else {
                let j = i - half;
                let m = n - half;
                let theta = std::f64::consts::PI * j as f64 / (m.max(2) - 1) as f64;
                (1.0 - theta.cos(), 0.5 - theta.sin())
            };
            let jx: f64 = rng.sample(StandardNormal);
            let jy: f64 = rng.sample(StandardNormal);
            vec![
                T::from_f64(cx + jx * noise).unwrap(),
                T::from_f64(cy + jy * noise).unwrap(),
            ]
        })
        .collect();
    PointCloud::from_rows(&rows).expect("generated cloud is valid")
}

/// Equispaced points on the interval `[0, length]`.
pub fn interval_grid<T: Real>(n: usize, length: f64) -> PointCloud<T> {
    assert!(n >= 2);
    let rows: Vec<Vec<T>> = (0..n)
        .map(|i| vec![T::from_f64(length * i as f64 / (n - 1) as f64).unwrap()])
        .collect();
    PointCloud::from_rows(&rows).expect("generated cloud is valid")
}

/// Regular m x m grid on `[0, 1]^2`, row-major node order.
pub fn square_grid<T: Real>(m: usize) -> PointCloud<T> {
    assert!(m >= 2);
    let rows: Vec<Vec<T>> = (0..m * m)
        .map(|k| {
            let i = k / m;
            let j = k % m;
            vec![
                T::from_f64(i as f64 / (m - 1) as f64).unwrap(),
                T::from_f64(j as f64 / (m - 1) as f64).unwrap(),
            ]
        })
        .collect();
    PointCloud::from_rows(&rows).expect("generated cloud is valid")
}

/// Mask for [`square_grid`] marking interior nodes (true) vs the outer ring.
pub fn square_grid_interior_mask(m: usize) -> Vec<bool> {
    (0..m * m)
        .map(|k| {
            let i = k / m;
            let j = k % m;
            i != 0 && j != 0 && i != m - 1 && j != m - 1
        })
        .collect()
}
