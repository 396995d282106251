//! Weighting-score outlier detection.
//!
//! Fit: normalize the inliers, keep at most 1000 of them, factorize and cache
//! the inverse of their similarity matrix. Score: augment the cached block
//! with the query point and read off the new point's weight; isolated points
//! get weights near 1, interior points get small weights. Classify: flag the
//! k largest scores in a batch. The scale t is chosen by searching a grid for
//! the best validation AUC.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gluing::{augment_one, AugmentCache};
use crate::scalar::Real;
use crate::space::{pairwise_distances, standardize, Metric, PointCloud, ScaleParameter, Standardizer};
use crate::weighting::similarity_matrix;

/// Largest retained training sample.
pub const MAX_TRAIN: usize = 1000;

/// Default rank threshold for classification.
pub const DEFAULT_K: usize = 10;

/// The default benchmark scale grid `{1e j, 5e j : -5 <= j <= 1}`
/// (the `paper` preset of the CLI).
pub fn default_t_grid<T: Real>() -> Vec<ScaleParameter<T>> {
    let mut grid = Vec::with_capacity(14);
    for j in -5i32..=1 {
        let base = T::from_f64(10f64.powi(j)).unwrap();
        grid.push(ScaleParameter::new(base).unwrap());
        grid.push(ScaleParameter::new(base * T::from_f64(5.0).unwrap()).unwrap());
    }
    grid.sort_by(|a, b| a.get().partial_cmp(&b.get()).unwrap());
    grid
}

/// Fitted detector: normalizer, retained training sample, scale, cached
/// inverse of the training similarity matrix, and the rank threshold.
/// Immutable after construction; scoring is concurrent-safe.
#[derive(Debug, Clone)]
pub struct OutlierModel<T> {
    standardizer: Standardizer<T>,
    train: PointCloud<T>,
    t: ScaleParameter<T>,
    cache: AugmentCache<T>,
    k: usize,
}

impl<T: Real> OutlierModel<T> {
    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn scale(&self) -> ScaleParameter<T> {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn standardizer(&self) -> &Standardizer<T> {
        &self.standardizer
    }

    /// Weighting vector of the retained training sample.
    pub fn train_weights(&self) -> &[T] {
        self.cache.train_weights()
    }
}

/// Fits the detector on inlier data at scale `t`. If more than
/// [`MAX_TRAIN`] inliers are supplied, a seeded uniform subsample of exactly
/// [`MAX_TRAIN`] is retained. The normalizer is fit on all supplied inliers
/// and frozen; later queries reuse it so the cached inverse stays valid.
pub fn fit<T: Real>(
    inliers: &PointCloud<T>,
    t: ScaleParameter<T>,
    seed: u64,
) -> Result<OutlierModel<T>> {
    if inliers.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: inliers.len() });
    }
    let (standardized, standardizer) = standardize(inliers)?;
    let retained = if standardized.len() > MAX_TRAIN {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, standardized.len(), MAX_TRAIN).into_vec();
        idx.sort_unstable();
        standardized.select(&idx)
    } else {
        standardized
    };
    if let Some((i, j)) = retained.find_duplicate() {
        return Err(Error::DuplicatePoints { first: i, second: j });
    }
    let zeta = similarity_matrix(&pairwise_distances(&retained, Metric::L2), t);
    let cache = AugmentCache::with_inverse(&zeta)?;
    debug_assert!(cache.residual_check(&zeta) <= T::from_f64(1e-8).unwrap());
    Ok(OutlierModel { standardizer, train: retained, t, cache, k: DEFAULT_K })
}

/// Weighting score of `x` inside the augmented space `(train u {x})`:
/// the new point's weight, computed in O(n^2) from the cached inverse.
pub fn score<T: Real>(model: &OutlierModel<T>, x: &[T]) -> Result<T> {
    if x.len() != model.train.dim() {
        return Err(Error::DimensionMismatch { expected: model.train.dim(), got: x.len() });
    }
    let phi_x = model.standardizer.apply_point(x);
    let tv = model.t.get();
    let cross: Vec<T> = model
        .train
        .iter_points()
        .map(|p| (-tv * Metric::L2.dist(p, &phi_x)).exp())
        .collect();
    Ok(augment_one(&model.cache, &cross)?.new_weight)
}

/// Scores a whole batch.
pub fn score_batch<T: Real>(model: &OutlierModel<T>, batch: &PointCloud<T>) -> Result<Vec<T>> {
    (0..batch.len()).map(|i| score(model, batch.point(i))).collect()
}

/// True exactly for the `k` largest scores; ties at the k-th value break
/// toward the lower index.
pub fn classify_topk<T: Real>(scores: &[T], k: usize) -> Vec<bool> {
    assert!(k <= scores.len(), "k exceeds batch size");
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut flag = vec![false; scores.len()];
    for &i in idx.iter().take(k) {
        flag[i] = true;
    }
    flag
}

/// Precision/recall/F1 at the top-k threshold plus the ranking AUC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    pub f1_at_k: f64,
    pub auc: f64,
}

/// Evaluates scores against boolean outlier labels. The AUC is the rank
/// statistic P(score_outlier > score_inlier) with ties counted 1/2, computed
/// from midranks (the Mann-Whitney form).
pub fn evaluate<T: Real>(scores: &[T], labels: &[bool], k: usize) -> Result<EvalMetrics> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), got: labels.len() });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    if k > scores.len() {
        return Err(Error::Input(format!("k = {k} exceeds batch size {}", scores.len())));
    }

    let flags = classify_topk(scores, k);
    let tp = flags
        .iter()
        .zip(labels)
        .filter(|&(&f, &l)| f && l)
        .count();
    let precision = tp as f64 / k as f64;
    let recall = tp as f64 / pos as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    // Midrank AUC.
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j + 2) as f64 / 2.0;
        for &ii in &idx[i..=j] {
            rank[ii] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = rank
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| l)
        .map(|(&r, _)| r)
        .sum();
    let auc =
        (rank_sum - pos as f64 * (pos as f64 + 1.0) / 2.0) / (pos as f64 * neg as f64);

    Ok(EvalMetrics { precision_at_k: precision, recall_at_k: recall, f1_at_k: f1, auc })
}

/// Result of the scale search: the winning scale and the whole grid with its
/// validation AUCs (`None` marks grid points that failed to fit or score).
#[derive(Debug, Clone)]
pub struct TSearchResult<T> {
    pub best_t: ScaleParameter<T>,
    pub grid: Vec<(ScaleParameter<T>, Option<f64>)>,
}

/// Fits one model per grid scale, scores the validation set, and returns the
/// scale with the best validation AUC (ties break toward the smaller t).
pub fn t_search<T: Real>(
    inliers: &PointCloud<T>,
    validation: &PointCloud<T>,
    validation_labels: &[bool],
    grid: &[ScaleParameter<T>],
    seed: u64,
) -> Result<TSearchResult<T>> {
    if grid.is_empty() {
        return Err(Error::Empty { what: "scale grid" });
    }
    let mut results = Vec::with_capacity(grid.len());
    for &t in grid {
        let auc = fit(inliers, t, seed)
            .and_then(|model| score_batch(&model, validation))
            .and_then(|scores| {
                let k = validation.len().min(DEFAULT_K);
                evaluate(&scores, validation_labels, k)
            })
            .map(|m| m.auc)
            .ok();
        results.push((t, auc));
    }
    let best = results
        .iter()
        .filter_map(|&(t, auc)| auc.map(|a| (t, a)))
        .fold(None::<(ScaleParameter<T>, f64)>, |acc, (t, a)| match acc {
            // strict improvement keeps the earlier (smaller) t on ties
            Some((bt, ba)) if a <= ba => Some((bt, ba)),
            _ => Some((t, a)),
        });
    match best {
        Some((best_t, _)) => Ok(TSearchResult { best_t, grid: results }),
        None => Err(Error::NoUsableScale),
    }
}

/// Train/validation/test split: inliers 60/20/20, labeled outliers assigned
/// to validation or test with probability 1/2 each. Deterministic under the
/// seed.
#[derive(Debug, Clone)]
pub struct DatasetSplit<T> {
    pub train: PointCloud<T>,
    pub validation: PointCloud<T>,
    pub validation_labels: Vec<bool>,
    pub test: PointCloud<T>,
    pub test_labels: Vec<bool>,
    /// False when no labeled outliers were supplied (both positive sets empty).
    pub outliers_present: bool,
}

pub fn split_dataset<T: Real>(
    inliers: &PointCloud<T>,
    outliers: Option<&PointCloud<T>>,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    if inliers.is_empty() {
        return Err(Error::Empty { what: "inliers" });
    }
    let n = inliers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let train = inliers.select(&order[..n_train]);
    let mut val_rows: Vec<Vec<T>> = order[n_train..n_train + n_val]
        .iter()
        .map(|&i| inliers.point(i).to_vec())
        .collect();
    let mut val_labels = vec![false; val_rows.len()];
    let mut test_rows: Vec<Vec<T>> = order[n_train + n_val..]
        .iter()
        .map(|&i| inliers.point(i).to_vec())
        .collect();
    let mut test_labels = vec![false; test_rows.len()];

    let mut outliers_present = false;
    if let Some(out) = outliers {
        if out.dim() != inliers.dim() && !out.is_empty() {
            return Err(Error::DimensionMismatch { expected: inliers.dim(), got: out.dim() });
        }
        outliers_present = !out.is_empty();
        for p in out.iter_points() {
            if rng.random::<bool>() {
                val_rows.push(p.to_vec());
                val_labels.push(true);
            } else {
                test_rows.push(p.to_vec());
                test_labels.push(true);
            }
        }
    }
    Ok(DatasetSplit {
        train,
        validation: PointCloud::from_rows(&val_rows)?,
        validation_labels: val_labels,
        test: PointCloud::from_rows(&test_rows)?,
        test_labels,
        outliers_present,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighting::weighting_vector;
    use rand_chacha::ChaCha8Rng;

    fn scale(t: f64) -> ScaleParameter<f64> {
        ScaleParameter::new(t).unwrap()
    }

    fn gaussian_blob(n: usize, d: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(rand_distr::StandardNormal)).collect())
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn default_grid_has_fourteen_values() {
        let grid = default_t_grid::<f64>();
        assert_eq!(grid.len(), 14);
        assert_eq!(grid[0].get(), 1e-5);
        assert_eq!(grid[13].get(), 50.0);
        assert!(grid.windows(2).all(|w| w[0].get() < w[1].get()));
    }

    #[test]
    fn fit_two_points() {
        let cloud = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let model = fit(&cloud, scale(1.0), 0).unwrap();
        assert_eq!(model.train_len(), 2);
    }

    #[test]
    fn fit_caps_training_sample_deterministically() {
        let cloud = gaussian_blob(5000, 2, 3);
        let m1 = fit(&cloud, scale(1.0), 7).unwrap();
        let m2 = fit(&cloud, scale(1.0), 7).unwrap();
        assert_eq!(m1.train_len(), MAX_TRAIN);
        assert_eq!(m1.train, m2.train);
        let m3 = fit(&cloud, scale(1.0), 8).unwrap();
        assert_ne!(m1.train, m3.train);
    }

    #[test]
    fn fit_handles_constant_feature() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, 5.0])
            .collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        assert!(fit(&cloud, scale(1.0), 0).is_ok());
    }

    #[test]
    fn fit_rejects_duplicates() {
        let cloud =
            PointCloud::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            fit(&cloud, scale(1.0), 0),
            Err(Error::DuplicatePoints { .. })
        ));
    }

    #[test]
    fn far_point_scores_near_one() {
        let cloud = gaussian_blob(100, 2, 11);
        let model = fit(&cloud, scale(1.0), 0).unwrap();
        let s = score(&model, &[1e6, 1e6]).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "score {s}");
    }

    #[test]
    fn centroid_scores_below_median_training_weight() {
        let cloud = gaussian_blob(200, 2, 13);
        let model = fit(&cloud, scale(1.0), 0).unwrap();
        // centroid of the raw data
        let mut c = vec![0.0; 2];
        for p in cloud.iter_points() {
            c[0] += p[0];
            c[1] += p[1];
        }
        c[0] /= 200.0;
        c[1] /= 200.0;
        let s = score(&model, &c).unwrap();
        let mut tw: Vec<f64> = model.train_weights().to_vec();
        tw.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = tw[tw.len() / 2];
        assert!(s < median, "score {s} >= median {median}");
    }

    #[test]
    fn scores_match_from_scratch_solves() {
        // Score held-out points against a fitted model and compare with a
        // direct solve on the augmented standardized space.
        let cloud = gaussian_blob(60, 2, 17);
        let queries = gaussian_blob(10, 2, 18);
        let model = fit(&cloud, scale(0.8), 0).unwrap();
        for q in queries.iter_points() {
            let fast = score(&model, q).unwrap();
            // oracle: standardize with the model's (frozen) normalizer, then solve
            let phi_q = model.standardizer().apply_point(q);
            let mut rows: Vec<Vec<f64>> = model.train.iter_points().map(<[f64]>::to_vec).collect();
            rows.push(phi_q);
            let full = PointCloud::from_rows(&rows).unwrap();
            let zeta = similarity_matrix(&pairwise_distances(&full, Metric::L2), scale(0.8));
            let direct = weighting_vector(&zeta).unwrap();
            let expect = direct.weights()[60];
            assert!((fast - expect).abs() < 1e-8, "{fast} vs {expect}");
        }
    }

    #[test]
    fn score_increases_along_ray_to_one() {
        let cloud = gaussian_blob(150, 2, 21);
        let model = fit(&cloud, scale(1.0), 0).unwrap();
        let mut scores = Vec::new();
        for r in [3.0, 5.0, 8.0, 12.0, 20.0, 50.0, 200.0] {
            scores.push(score(&model, &[r, r]).unwrap());
        }
        // non-decreasing, strictly so before the similarities underflow
        for pair in scores.windows(2) {
            assert!(pair[1] >= pair[0], "score dropped along the ray: {scores:?}");
        }
        assert!(scores[1] > scores[0] && scores[2] > scores[1], "{scores:?}");
        assert!((scores.last().unwrap() - 1.0).abs() < 1e-6, "isolated limit {scores:?}");
    }

    #[test]
    fn scoring_duplicate_training_point_degenerates() {
        let cloud = gaussian_blob(30, 2, 19);
        let model = fit(&cloud, scale(1.0), 0).unwrap();
        // feed back the raw coordinates of training point 4
        let raw = model.standardizer().invert_point(model.train.point(4));
        assert!(matches!(
            score(&model, &raw),
            Err(Error::DegenerateAugmentation { .. })
        ));
    }

    #[test]
    fn topk_basic_and_ties() {
        assert_eq!(classify_topk(&[0.1, 0.9, 0.5], 1), vec![false, true, false]);
        assert_eq!(classify_topk(&[0.5, 0.5, 0.5], 2), vec![true, true, false]);
        assert_eq!(classify_topk(&[1.0, 2.0], 0), vec![false, false]);
    }

    #[test]
    fn topk_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.random_range(1..30);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let k = rng.random_range(0..=n);
            let flags = classify_topk(&scores, k);
            // oracle: brute-force selection of the k largest by (score, -index)
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b))
            });
            let mut expect = vec![false; n];
            for &i in order.iter().take(k) {
                expect[i] = true;
            }
            assert_eq!(flags, expect);
        }
    }

    #[test]
    fn evaluate_perfect_and_reversed() {
        let labels = vec![false, false, true, true];
        let m = evaluate(&[1.0, 2.0, 3.0, 4.0], &labels, 2).unwrap();
        assert_eq!(
            (m.precision_at_k, m.recall_at_k, m.f1_at_k, m.auc),
            (1.0, 1.0, 1.0, 1.0)
        );
        let m = evaluate(&[4.0, 3.0, 2.0, 1.0], &labels, 2).unwrap();
        assert_eq!((m.precision_at_k, m.recall_at_k, m.auc), (0.0, 0.0, 0.0));
        assert_eq!(m.f1_at_k, 0.0);
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for round in 0..20 {
            let n = 200;
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..40) as f64) / 10.0) // force ties
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let m = evaluate(&scores, &labels, 10).unwrap();
            // O(n^2) pairwise oracle with tie convention 1/2
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] && !labels[j] {
                        den += 1.0;
                        if scores[i] > scores[j] {
                            num += 1.0;
                        } else if scores[i] == scores[j] {
                            num += 0.5;
                        }
                    }
                }
            }
            let expect = num / den;
            assert!((m.auc - expect).abs() < 1e-12, "round {round}");
        }
    }

    #[test]
    fn auc_exhaustive_small_batches() {
        // all label patterns for batches of size <= 8 on a fixed score set
        let scores = [0.3, 0.1, 0.4, 0.1, 0.5, 0.9, 0.2, 0.6];
        for n in 2..=8usize {
            for mask in 1..(1u32 << n) - 1 {
                let labels: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let m = evaluate(&scores[..n], &labels, 1).unwrap();
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if labels[i] && !labels[j] {
                            den += 1.0;
                            num += if scores[i] > scores[j] {
                                1.0
                            } else if scores[i] == scores[j] {
                                0.5
                            } else {
                                0.0
                            };
                        }
                    }
                }
                assert!((m.auc - num / den).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evaluate_rejects_single_class() {
        assert!(matches!(
            evaluate(&[1.0, 2.0], &[true, true], 1),
            Err(Error::AucUndefined)
        ));
    }

    #[test]
    fn t_search_single_grid_point() {
        let inliers = gaussian_blob(50, 2, 31);
        let split = split_dataset(&inliers, Some(&far_outliers(6, 37)), 5).unwrap();
        let grid = vec![scale(1.0)];
        let res = t_search(
            &split.train,
            &split.validation,
            &split.validation_labels,
            &grid,
            5,
        )
        .unwrap();
        assert_eq!(res.best_t.get(), 1.0);
        assert_eq!(res.grid.len(), 1);
    }

    fn far_outliers(n: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    rng.random_range(20.0..30.0) * if rng.random::<bool>() { 1.0 } else { -1.0 },
                    rng.random_range(20.0..30.0) * if rng.random::<bool>() { 1.0 } else { -1.0 },
                ]
            })
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn t_search_ties_pick_smaller_t() {
        // Perfectly separable: many scales reach AUC 1, the smallest must win.
        let inliers = gaussian_blob(80, 2, 41);
        let split = split_dataset(&inliers, Some(&far_outliers(8, 43)), 9).unwrap();
        let grid = vec![scale(0.5), scale(1.0), scale(2.0)];
        let res = t_search(
            &split.train,
            &split.validation,
            &split.validation_labels,
            &grid,
            9,
        )
        .unwrap();
        let aucs: Vec<Option<f64>> = res.grid.iter().map(|&(_, a)| a).collect();
        let best = aucs.iter().flatten().fold(f64::NEG_INFINITY, |m, &a| m.max(a));
        let first_best = res
            .grid
            .iter()
            .find(|&&(_, a)| a == Some(best))
            .unwrap()
            .0;
        assert_eq!(res.best_t.get(), first_best.get());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let inliers = gaussian_blob(1000, 2, 51);
        let outliers = far_outliers(10, 53);
        let s1 = split_dataset(&inliers, Some(&outliers), 7).unwrap();
        let s2 = split_dataset(&inliers, Some(&outliers), 7).unwrap();
        assert_eq!(s1.train.len(), 600);
        assert_eq!(
            s1.validation.len() + s1.test.len(),
            400 + 10
        );
        assert_eq!(s1.train, s2.train);
        assert_eq!(s1.validation_labels, s2.validation_labels);
        let outlier_total = s1.validation_labels.iter().filter(|&&l| l).count()
            + s1.test_labels.iter().filter(|&&l| l).count();
        assert_eq!(outlier_total, 10);
    }

    #[test]
    fn split_without_outliers_is_flagged() {
        let inliers = gaussian_blob(20, 2, 55);
        let s = split_dataset::<f64>(&inliers, None, 1).unwrap();
        assert!(!s.outliers_present);
        assert!(s.validation_labels.iter().all(|&l| !l));
    }
}
