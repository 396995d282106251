//! Linear-time approximations of the weighting vector.
//!
//! When the scaled space is scattered (`exp(-eps) < 1/(n-1)` for the minimum
//! scaled distance `eps`), the weighting satisfies
//!
//! ```text
//! |w(x) - 1/(n f(x))| <= (n(n-1)^2 e^{-2eps} + n(n-1) e^{-eps}) / (1 - (n-1) e^{-eps})
//! ```
//!
//! with `f` the Laplacian-kernel density (row means of `zeta`). The kernel
//! density can itself be estimated by counting neighbors in an axis-aligned
//! box, which drops the cost per point to O(log n) after a spatial index is
//! built. The Neumann-series inverse that powers the proof is also exposed,
//! as an independent route to `zeta^{-1}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;
use crate::space::{DistanceMatrix, PointCloud, ScaleParameter};
use crate::spatial::{KdTree, RangeNorm};
use crate::weighting::SimilarityMatrix;

/// Scatteredness of the scaled space `tX`, the threshold scale, and the
/// kernel-density error bound where it applies.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterReport<T> {
    pub is_scattered: bool,
    /// Minimum distance between distinct points of the *unscaled* space;
    /// `None` for a single point.
    pub eps_min: Option<T>,
    pub n: usize,
    /// Smallest scale that makes the space scattered: `ln(n-1) / eps_min`.
    /// `None` when undefined (single point, or duplicate points).
    pub t_required: Option<T>,
    /// Right-hand side of the error bound, evaluated on the scaled space.
    /// `None` when the space is not scattered (the bound does not apply).
    pub bound: Option<T>,
}

fn kde_bound<T: Real>(n: usize, scaled_eps: T) -> T {
    let nf = T::from_usize(n).unwrap();
    let nm1 = T::from_usize(n - 1).unwrap();
    let e1 = (-scaled_eps).exp();
    let e2 = (-(scaled_eps + scaled_eps)).exp();
    (nf * nm1 * nm1 * e2 + nf * nm1 * e1) / (T::one() - nm1 * e1)
}

/// Evaluates the scattered definition on the scaled space `tX`.
pub fn scatter_report<T: Real>(dist: &DistanceMatrix<T>, t: ScaleParameter<T>) -> ScatterReport<T> {
    let n = dist.len();
    if n <= 1 {
        // A single point is trivially scattered with a vanishing bound.
        return ScatterReport {
            is_scattered: true,
            eps_min: None,
            n,
            t_required: None,
            bound: Some(T::zero()),
        };
    }
    let eps = dist.eps_min().expect("n >= 2 has eps_min");
    if eps == T::zero() {
        // Duplicate points: never scattered at any scale.
        return ScatterReport { is_scattered: false, eps_min: Some(eps), n, t_required: None, bound: None };
    }
    let nm1 = T::from_usize(n - 1).unwrap();
    let scaled_eps = t.get() * eps;
    let is_scattered = (-scaled_eps).exp() < T::one() / nm1;
    let t_required = nm1.ln() / eps;
    let bound = is_scattered.then(|| kde_bound(n, scaled_eps));
    ScatterReport { is_scattered, eps_min: Some(eps), n, t_required: Some(t_required), bound }
}

/// How a density estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityKind<T> {
    /// Row means of the similarity matrix (self term included).
    LaplacianKde,
    /// Box count normalized by `n (2h)^d`.
    RectCount { h: T },
    /// Raw reciprocal-count variant: the estimate is `count / n` so that
    /// `1/(n f)` is `1/count`.
    RectCountUnnormalized { h: T },
}

/// Per-point density estimates; every entry is positive because each point
/// counts itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate<T> {
    pub f: Vec<T>,
    pub kind: DensityKind<T>,
}

/// Kernel density under the Laplacian kernel: `f_i = mean_j zeta(i, j)`.
pub fn kde_laplacian<T: Real>(zeta: &SimilarityMatrix<T>) -> DensityEstimate<T> {
    let n = zeta.len();
    let nf = T::from_usize(n).unwrap();
    let f = (0..n)
        .map(|i| zeta.matrix().row(i).iter().copied().sum::<T>() / nf)
        .collect();
    DensityEstimate { f, kind: DensityKind::LaplacianKde }
}

/// The kernel-density weighting approximation `1/(n f)` (entrywise).
pub fn weight_approx_kde<T: Real>(zeta: &SimilarityMatrix<T>) -> Vec<T> {
    let n = T::from_usize(zeta.len()).unwrap();
    kde_laplacian(zeta)
        .f
        .into_iter()
        .map(|fi| T::one() / (n * fi))
        .collect()
}

/// Rectangle-count density: `f(x) = |{x' : ||x - x'||_inf <= h}| / (n (2h)^d)`,
/// counted exactly through a k-d tree (self included, boundary inclusive).
pub fn rect_count_density<T: Real>(cloud: &PointCloud<T>, h: T) -> Result<DensityEstimate<T>> {
    let counts = rect_counts(cloud, h, RangeNorm::Linf)?;
    let n = T::from_usize(cloud.len()).unwrap();
    let vol = (T::from_f64(2.0).unwrap() * h).powi(cloud.dim() as i32);
    let f = counts
        .into_iter()
        .map(|c| T::from_usize(c).unwrap() / (n * vol))
        .collect();
    Ok(DensityEstimate { f, kind: DensityKind::RectCount { h } })
}

/// Exact neighbor counts within `h` under the given norm (default callers use
/// the L-infinity cube; the L2 ball is available for comparison).
pub fn rect_counts<T: Real>(cloud: &PointCloud<T>, h: T, norm: RangeNorm) -> Result<Vec<usize>> {
    if !(h > T::zero() && h.is_finite()) {
        return Err(Error::Input(format!("box half-width must be positive, got {h}")));
    }
    let tree = KdTree::build(cloud);
    let n = cloud.len();
    let counts: Vec<usize> = if n >= 220 {
        (0..n)
            .into_par_iter()
            .map(|i| tree.range_count(cloud.point(i), h, norm))
            .collect()
    } else {
        (0..n).map(|i| tree.range_count(cloud.point(i), h, norm)).collect()
    };
    Ok(counts)
}

/// Rectangle-count weighting approximation. `normalized` selects
/// `(2h)^d / count`; the un-normalized variant is `1 / count`.
pub fn weight_approx_rect<T: Real>(
    cloud: &PointCloud<T>,
    h: T,
    normalized: bool,
) -> Result<Vec<T>> {
    let counts = rect_counts(cloud, h, RangeNorm::Linf)?;
    let vol = (T::from_f64(2.0).unwrap() * h).powi(cloud.dim() as i32);
    Ok(counts
        .into_iter()
        .map(|c| {
            let c = T::from_usize(c).unwrap();
            if normalized {
                vol / c
            } else {
                T::one() / c
            }
        })
        .collect())
}

/// Partial Neumann series for `zeta^{-1}` together with its truncation bound.
#[derive(Debug, Clone)]
pub struct NeumannInverse<T> {
    pub matrix: Mat<T>,
    /// Entrywise bound on the discarded tail: `n r^{k_max+1} / (1 - r)` with
    /// `r = (n-1) * max off-diagonal similarity`.
    pub truncation_bound: T,
    /// The contraction ratio `r`.
    pub ratio: T,
}

/// Partial sum `sum_{k <= k_max} (-1)^k E^k` where `E = zeta - I`. The powers
/// of `E` are exactly the path sums of the series proof (consecutive indices
/// must differ because `E` has a zero diagonal).
///
/// Refuses non-scattered inputs: the series is only guaranteed to converge
/// when `(n-1) * max_offdiag(zeta) < 1`.
pub fn neumann_inverse<T: Real>(
    zeta: &SimilarityMatrix<T>,
    k_max: usize,
) -> Result<NeumannInverse<T>> {
    let n = zeta.len();
    if n <= 1 {
        return Ok(NeumannInverse {
            matrix: Mat::identity(n),
            truncation_bound: T::zero(),
            ratio: T::zero(),
        });
    }
    let nm1 = T::from_usize(n - 1).unwrap();
    let max_off = zeta.max_off_diagonal().expect("n >= 2");
    let ratio = nm1 * max_off;
    if ratio >= T::one() {
        return Err(Error::NotScattered { ratio: ratio.as_f64() });
    }
    let mut e = zeta.matrix().clone();
    for i in 0..n {
        e[(i, i)] = T::zero();
    }
    let mut sum = Mat::identity(n);
    let mut power = Mat::identity(n);
    let mut sign = T::one();
    for _ in 1..=k_max {
        power = power.matmul(&e);
        sign = -sign;
        for i in 0..n {
            for j in 0..n {
                let v = sum[(i, j)] + sign * power[(i, j)];
                sum[(i, j)] = v;
            }
        }
    }
    let kf = T::from_usize(k_max + 1).unwrap();
    let truncation_bound =
        T::from_usize(n).unwrap() * ratio.powf(kf) / (T::one() - ratio);
    Ok(NeumannInverse { matrix: sum, truncation_bound, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{pairwise_distances, Metric, PointCloud};
    use crate::spatial::brute_force_count;
    use crate::weighting::{similarity_matrix, weighting_vector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn scale(t: f64) -> ScaleParameter<f64> {
        ScaleParameter::new(t).unwrap()
    }

    fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
        PointCloud::new(pts, n, d).unwrap()
    }

    #[test]
    fn two_points_always_scattered() {
        let cloud = PointCloud::from_rows(&[vec![0.0], vec![0.4]]).unwrap();
        let dm = pairwise_distances(&cloud, Metric::L2);
        let report = scatter_report(&dm, scale(1.0));
        assert!(report.is_scattered);
        // n = 2: threshold scale is ln(1)/eps = 0.
        assert_eq!(report.t_required, Some(0.0));
    }

    #[test]
    fn appendix_figure_scale_is_below_threshold() {
        // n = 50, eps = 0.182: t_required = ln(49)/0.182 ~ 21.4, so t = 6 is
        // not scattered.
        let n = 50;
        let eps = 0.182;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * eps]).collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let dm = pairwise_distances(&cloud, Metric::L2);
        let report = scatter_report(&dm, scale(6.0));
        assert!(!report.is_scattered);
        assert!(report.bound.is_none());
        let t_req = report.t_required.unwrap();
        assert!((t_req - (49.0f64).ln() / dm.eps_min().unwrap()).abs() < 1e-12);
        assert!((t_req - 21.4).abs() < 0.3);
        let at_threshold = scatter_report(&dm, scale(t_req * 1.01));
        assert!(at_threshold.is_scattered);
    }

    #[test]
    fn bound_matches_hand_formula() {
        let n = 100;
        let cloud = random_cloud(n, 3, 5);
        let dm = pairwise_distances(&cloud, Metric::L2);
        let eps = dm.eps_min().unwrap();
        let t = 10.0 / eps; // scaled eps = 10
        let report = scatter_report(&dm, scale(t));
        assert!(report.is_scattered);
        let e1 = (-10.0f64).exp();
        let e2 = (-20.0f64).exp();
        let nf = n as f64;
        let expect = (nf * (nf - 1.0).powi(2) * e2 + nf * (nf - 1.0) * e1) / (1.0 - (nf - 1.0) * e1);
        let got = report.bound.unwrap();
        assert!((got - expect).abs() / expect < 1e-10);
    }

    #[test]
    fn duplicates_never_scattered() {
        let cloud = PointCloud::from_rows(&[vec![1.0], vec![1.0], vec![3.0]]).unwrap();
        let dm = pairwise_distances(&cloud, Metric::L2);
        let report = scatter_report(&dm, scale(100.0));
        assert!(!report.is_scattered);
        assert!(report.t_required.is_none());
    }

    #[test]
    fn kde_single_point() {
        let cloud = PointCloud::from_rows(&[vec![0.0]]).unwrap();
        let zeta = similarity_matrix(&pairwise_distances(&cloud, Metric::L2), scale(1.0));
        let est = kde_laplacian(&zeta);
        assert_eq!(est.f, vec![1.0]);
        assert_eq!(weight_approx_kde(&zeta), vec![1.0]);
    }

    #[test]
    fn kde_two_points() {
        let d = 0.7;
        let cloud = PointCloud::from_rows(&[vec![0.0], vec![d]]).unwrap();
        let zeta = similarity_matrix(&pairwise_distances(&cloud, Metric::L2), scale(1.3));
        let q = (-1.3 * d).exp();
        let est = kde_laplacian(&zeta);
        assert!((est.f[0] - (1.0 + q) / 2.0).abs() < 1e-15);
        assert!((est.f[1] - (1.0 + q) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_point_density_near_one_over_n() {
        let mut rows: Vec<Vec<f64>> = random_cloud(20, 2, 8)
            .iter_points()
            .map(<[f64]>::to_vec)
            .collect();
        rows.push(vec![500.0, 500.0]);
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let zeta = similarity_matrix(&pairwise_distances(&cloud, Metric::L2), scale(1.0));
        let est = kde_laplacian(&zeta);
        assert!((est.f[20] - 1.0 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn error_bound_holds_on_scattered_instances() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(5..60);
            let cloud = random_cloud(n, 2, seed + 1000);
            let dm = pairwise_distances(&cloud, Metric::L2);
            let eps = dm.eps_min().unwrap();
            let u = rng.random_range(((n - 1) as f64).ln() + 0.5..30.0);
            let t = u / eps;
            let report = scatter_report(&dm, scale(t));
            assert!(report.is_scattered, "seed {seed}");
            let zeta = similarity_matrix(&dm, scale(t));
            let w = weighting_vector(&zeta).unwrap();
            let approx = weight_approx_kde(&zeta);
            let max_err = w
                .weights()
                .iter()
                .zip(&approx)
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(
                max_err <= report.bound.unwrap(),
                "seed {seed}: err {max_err} > bound {}",
                report.bound.unwrap()
            );
        }
    }

    #[test]
    fn rect_counts_match_brute_force() {
        let cloud = random_cloud(300, 2, 3);
        for &h in &[0.05, 0.1, 0.2] {
            let counts = rect_counts(&cloud, h, RangeNorm::Linf).unwrap();
            for i in 0..300 {
                assert_eq!(
                    counts[i],
                    brute_force_count(&cloud, cloud.point(i), h, RangeNorm::Linf)
                );
            }
        }
    }

    #[test]
    fn rect_density_degenerate_cases() {
        // isolated point: count 1
        let cloud = PointCloud::from_rows(&[vec![0.0, 0.0], vec![10.0, 10.0]]).unwrap();
        let est = rect_count_density(&cloud, 0.1).unwrap();
        let expect = 1.0 / (2.0 * (0.2f64).powi(2));
        assert!((est.f[0] - expect).abs() < 1e-12);
        // all identical: count n, f = 1/(2h)^d
        let same = PointCloud::<f64>::from_rows(&vec![vec![1.0]; 5]).unwrap();
        let est = rect_count_density(&same, 0.5).unwrap();
        for &f in &est.f {
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rect_weight_variants() {
        // singleton, h = 0.5, d = 1, normalized: (2 * 0.5)^1 / 1 = 1
        let single = PointCloud::from_rows(&[vec![0.3]]).unwrap();
        let w = weight_approx_rect(&single, 0.5, true).unwrap();
        assert_eq!(w, vec![1.0]);
        // count 5 under the un-normalized variant: 0.2
        let five = PointCloud::<f64>::from_rows(&[
            vec![0.0],
            vec![0.01],
            vec![0.02],
            vec![0.03],
            vec![0.04],
        ])
        .unwrap();
        let w = weight_approx_rect(&five, 0.1, false).unwrap();
        assert!((w[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn neumann_zeroth_order_is_identity() {
        let cloud = random_cloud(6, 2, 1);
        let dm = pairwise_distances(&cloud, Metric::L2);
        let eps = dm.eps_min().unwrap();
        let t = ((6.0f64 - 1.0).ln() + 1.0) / eps;
        let zeta = similarity_matrix(&dm, scale(t));
        let inv = neumann_inverse(&zeta, 0).unwrap();
        assert_eq!(inv.matrix, Mat::identity(6));
    }

    #[test]
    fn neumann_matches_dense_inverse() {
        let n = 20;
        let cloud = random_cloud(n, 2, 77);
        let dm = pairwise_distances(&cloud, Metric::L2);
        let eps = dm.eps_min().unwrap();
        let t = (((n - 1) as f64).ln() + 0.5) / eps;
        let zeta = similarity_matrix(&dm, scale(t));
        let neumann = neumann_inverse(&zeta, 60).unwrap();
        let dense = crate::linalg::Cholesky::factor_ref(zeta.matrix())
            .unwrap()
            .inverse();
        let mut max_err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                max_err = max_err.max((neumann.matrix[(i, j)] - dense[(i, j)]).abs());
            }
        }
        assert!(max_err < 1e-8, "max err {max_err}");
        assert!(max_err <= neumann.truncation_bound.max(1e-8));
    }

    #[test]
    fn neumann_two_points_geometric_series() {
        let d = 3.0; // q = e^{-3} < 1 so scattered for n = 2
        let cloud = PointCloud::from_rows(&[vec![0.0], vec![d]]).unwrap();
        let zeta = similarity_matrix(&pairwise_distances(&cloud, Metric::L2), scale(1.0));
        let q = (-d).exp();
        let k_max = 40;
        let got = neumann_inverse(&zeta, k_max).unwrap();
        // closed form: 1/(1-q^2) [[1, -q], [-q, 1]]
        let f = 1.0 / (1.0 - q * q);
        assert!((got.matrix[(0, 0)] - f).abs() < 1e-12);
        assert!((got.matrix[(0, 1)] + f * q).abs() < 1e-12);
        assert!((got.matrix[(1, 0)] + f * q).abs() < 1e-12);
        assert!((got.matrix[(1, 1)] - f).abs() < 1e-12);
    }

    #[test]
    fn neumann_refuses_unscattered() {
        let cloud = random_cloud(30, 2, 12);
        let zeta = similarity_matrix(&pairwise_distances(&cloud, Metric::L2), scale(0.5));
        assert!(matches!(
            neumann_inverse(&zeta, 10),
            Err(Error::NotScattered { .. })
        ));
    }

    #[test]
    fn bound_decreases_with_scale_and_vanishes() {
        let cloud = random_cloud(40, 2, 50);
        let dm = pairwise_distances(&cloud, Metric::L2);
        let eps = dm.eps_min().unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let u = 4.0 * k as f64 + 4.0; // scaled eps from 8 to 44
            let report = scatter_report(&dm, scale(u / eps));
            if let Some(b) = report.bound {
                assert!(b < last, "bound must decrease");
                last = b;
                if u >= 40.0 {
                    assert!(b < 1e-6, "bound {b} at scaled eps {u}");
                }
            }
        }
    }
}
