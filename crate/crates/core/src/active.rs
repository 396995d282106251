//! Pool-based active learning driven by the weighting vector.
//!
//! Each iteration partitions the pool by the current classifier's predicted
//! label, computes the weighting vector of each partition, and queries the
//! unlabeled points with the smallest and largest absolute weight per class:
//! small-|w| points sit in a class interior (exploitation), large-|w| points
//! sit on its boundary (exploration). An uncertainty-sampling baseline and a
//! seeded experiment runner are included.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Mat};
use crate::scalar::Real;
use crate::space::{pairwise_distances, Metric, PointCloud, ScaleParameter};
use crate::weighting::{similarity_matrix, weighting_vector};

/// Default Laplacian classification-kernel width.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Default ridge term keeping the least-squares system solvable.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Queries granted per iteration (two per predicted class).
pub const QUERIES_PER_ITERATION: usize = 4;

/// Least-squares SVM (kernel ridge) classifier with decision function
/// `f(x) = K(x, L)' w - w0`, `K(x, y) = exp(-gamma ||x - y||_1)`.
#[derive(Debug, Clone)]
pub struct LssvmClassifier<T> {
    support: PointCloud<T>,
    weights: Vec<T>,
    w0: T,
    gamma: T,
    ridge: T,
}

impl<T: Real> LssvmClassifier<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.w0
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    /// Decision value f(x); the predicted label is its sign.
    pub fn decision(&self, x: &[T]) -> T {
        let k: Vec<T> = self
            .support
            .iter_points()
            .map(|p| (-self.gamma * Metric::L1.dist(p, x)).exp())
            .collect();
        dot(&k, &self.weights) - self.w0
    }

    /// Predicted class index: 0 for f(x) < 0, 1 otherwise.
    pub fn predict(&self, x: &[T]) -> usize {
        usize::from(self.decision(x) >= T::zero())
    }
}

/// Fits the LS-SVM on labeled points with labels in {-1, +1}. The bias is
/// handled by deflation, so only SPD solves of `K + ridge I` are needed.
pub fn lssvm_fit<T: Real>(
    points: &PointCloud<T>,
    labels: &[T],
    gamma: T,
    ridge: T,
) -> Result<LssvmClassifier<T>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if labels.iter().all(|&y| y > T::zero()) || labels.iter().all(|&y| y <= T::zero()) {
        return Err(Error::SingleClass);
    }
    if ridge < T::zero() {
        return Err(Error::Input("ridge must be nonnegative".into()));
    }
    let mut k = Mat::from_fn(n, n, |i, j| {
        (-gamma * Metric::L1.dist(points.point(i), points.point(j))).exp()
    });
    for i in 0..n {
        k[(i, i)] += ridge;
    }
    let chol = match Cholesky::factor_ref(&k) {
        Ok(c) => c,
        Err(Error::SingularMatrix { .. }) if ridge == T::zero() => {
            return Err(Error::RidgeRequired);
        }
        Err(e) => return Err(e),
    };
    // Eliminate the bias: alpha = S^{-1}(y - b 1) with 1' alpha = 0.
    let sy = chol.solve(labels);
    let s1 = chol.solve(&vec![T::one(); n]);
    let denom: T = s1.iter().copied().sum();
    if denom == T::zero() || !denom.is_finite() {
        return Err(Error::RidgeRequired);
    }
    let b = sy.iter().copied().sum::<T>() / denom;
    let alpha: Vec<T> = sy.iter().zip(&s1).map(|(&a, &c)| a - b * c).collect();

    // Check the full KKT system [K + ridge I, 1; 1', 0][alpha; b] = [y; 0].
    let k_alpha = k.matvec(&alpha);
    let mut residual = k_alpha
        .iter()
        .zip(labels)
        .fold(T::zero(), |m, (&ka, &y)| m.max((ka + b - y).abs()));
    let ones_alpha: T = alpha.iter().copied().sum();
    residual = residual.max(ones_alpha.abs());
    if residual > T::from_f64(1e-8).unwrap() {
        return Err(Error::Input(format!(
            "ls-svm system residual {residual} above 1e-8; increase ridge"
        )));
    }

    Ok(LssvmClassifier { support: points.clone(), weights: alpha, w0: -b, gamma, ridge })
}

/// Labeled/unlabeled bookkeeping plus the learning curve.
#[derive(Debug, Clone)]
pub struct ALState {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    /// (labels spent, test accuracy) per iteration.
    pub curve: Vec<(usize, f64)>,
}

impl ALState {
    pub fn new(pool_size: usize) -> Self {
        Self { labeled: Vec::new(), unlabeled: (0..pool_size).collect(), curve: Vec::new() }
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    fn grant(&mut self, idx: usize) {
        debug_assert!(self.unlabeled.contains(&idx));
        self.unlabeled.retain(|&u| u != idx);
        self.labeled.push(idx);
    }
}

/// Query strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Weighting,
    Uncertainty,
}

/// Queries produced for one predicted class: the unlabeled members with the
/// smallest and largest |w| in that class's weighting vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassQueries {
    pub class: usize,
    pub min_abs: Option<usize>,
    pub max_abs: Option<usize>,
}

/// Weighting-vector query strategy: partition the pool by predicted label,
/// compute each partition's weighting vector, and return per class the
/// unlabeled argmin-|w| (interior) and argmax-|w| (boundary) points.
pub fn query_weighting<T: Real>(
    pool: &PointCloud<T>,
    state: &ALState,
    clf: &LssvmClassifier<T>,
    t: ScaleParameter<T>,
) -> Result<Vec<ClassQueries>> {
    if state.unlabeled.is_empty() {
        return Err(Error::NoUnlabeled);
    }
    let n = pool.len();
    let mut class_members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in 0..n {
        class_members[clf.predict(pool.point(i))].push(i);
    }
    let unlabeled: std::collections::HashSet<usize> = state.unlabeled.iter().copied().collect();
    let mut queries = Vec::new();
    for (class, members) in class_members.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let sub = pool.select(members);
        let zeta = similarity_matrix(&pairwise_distances(&sub, Metric::L2), t);
        let w = weighting_vector(&zeta)?;
        let mut best_min: Option<(usize, T)> = None;
        let mut best_max: Option<(usize, T)> = None;
        for (pos, &orig) in members.iter().enumerate() {
            if !unlabeled.contains(&orig) {
                continue;
            }
            let a = w.weights()[pos].abs();
            if best_min.is_none_or(|(_, v)| a < v) {
                best_min = Some((orig, a));
            }
            if best_max.is_none_or(|(_, v)| a > v) {
                best_max = Some((orig, a));
            }
        }
        queries.push(ClassQueries {
            class,
            min_abs: best_min.map(|(i, _)| i),
            max_abs: best_max.map(|(i, _)| i),
        });
    }
    Ok(queries)
}

/// Flattens per-class queries into a deduplicated index list (a point that is
/// both some class's argmin and another's argmax is granted once).
pub fn flatten_queries(queries: &[ClassQueries]) -> Vec<usize> {
    let mut out = Vec::new();
    for q in queries {
        for pick in [q.min_abs, q.max_abs].into_iter().flatten() {
            if !out.contains(&pick) {
                out.push(pick);
            }
        }
    }
    out
}

/// Uncertainty-sampling baseline: the (up to) four unlabeled points with the
/// smallest |f(x)|, ties broken by index.
pub fn query_uncertainty<T: Real>(
    pool: &PointCloud<T>,
    state: &ALState,
    clf: &LssvmClassifier<T>,
) -> Result<Vec<usize>> {
    if state.unlabeled.is_empty() {
        return Err(Error::NoUnlabeled);
    }
    let mut scored: Vec<(usize, T)> = state
        .unlabeled
        .iter()
        .map(|&i| (i, clf.decision(pool.point(i)).abs()))
        .collect();
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite decisions").then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(QUERIES_PER_ITERATION)
        .map(|(i, _)| i)
        .collect())
}

/// Options for [`run_al`].
#[derive(Debug, Clone, Copy)]
pub struct RunConfig<T> {
    pub strategy: Strategy,
    pub budget: usize,
    pub seed: u64,
    /// Scale used for the query-side weighting vectors.
    pub t: ScaleParameter<T>,
    pub gamma: T,
    pub ridge: T,
}

/// Result of one active-learning run.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub state: ALState,
    pub classifier: LssvmClassifier<T>,
    /// Indices of the held-out test rows inside the original dataset.
    pub test_idx: Vec<usize>,
    pub final_accuracy: f64,
}

/// Runs the full loop on a labeled dataset: splits 67/33 into training pool
/// and test set, seeds one labeled point per class, then repeatedly queries,
/// labels, refits, and records test accuracy until the budget is spent or
/// the pool is exhausted. Labels are +-1.
pub fn run_al<T: Real>(data: &PointCloud<T>, labels: &[T], cfg: &RunConfig<T>) -> Result<RunOutcome<T>> {
    let n = data.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_pool = (n * 67).div_ceil(100);
    let pool_idx: Vec<usize> = order[..n_pool].to_vec();
    let test_idx: Vec<usize> = order[n_pool..].to_vec();
    let pool = data.select(&pool_idx);
    let pool_labels: Vec<T> = pool_idx.iter().map(|&i| labels[i]).collect();

    // Initial labeled set: one random point per class.
    let pos: Vec<usize> = (0..pool.len()).filter(|&i| pool_labels[i] > T::zero()).collect();
    let neg: Vec<usize> = (0..pool.len()).filter(|&i| pool_labels[i] <= T::zero()).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let initial = [*pos.choose(&mut rng).unwrap(), *neg.choose(&mut rng).unwrap()];
    if cfg.budget < initial.len() {
        return Err(Error::BudgetTooSmall { budget: cfg.budget, needed: initial.len() });
    }

    let mut state = ALState::new(pool.len());
    for idx in initial {
        state.grant(idx);
    }

    let accuracy = |clf: &LssvmClassifier<T>| -> f64 {
        if test_idx.is_empty() {
            return 0.0;
        }
        let correct = test_idx
            .iter()
            .filter(|&&i| {
                let predicted = clf.decision(data.point(i)) >= T::zero();
                predicted == (labels[i] > T::zero())
            })
            .count();
        correct as f64 / test_idx.len() as f64
    };

    let refit = |state: &ALState| -> Result<LssvmClassifier<T>> {
        let l_points = pool.select(state.labeled());
        let l_labels: Vec<T> = state.labeled().iter().map(|&i| pool_labels[i]).collect();
        lssvm_fit(&l_points, &l_labels, cfg.gamma, cfg.ridge)
    };

    let mut clf = refit(&state)?;
    state.curve.push((state.labeled().len(), accuracy(&clf)));

    while state.labeled().len() < cfg.budget && !state.unlabeled().is_empty() {
        let queries = match cfg.strategy {
            Strategy::Weighting => flatten_queries(&query_weighting(&pool, &state, &clf, cfg.t)?),
            Strategy::Uncertainty => query_uncertainty(&pool, &state, &clf)?,
        };
        if queries.is_empty() {
            break;
        }
        let remaining = cfg.budget - state.labeled().len();
        for &q in queries.iter().take(remaining) {
            state.grant(q);
        }
        clf = refit(&state)?;
        state.curve.push((state.labeled().len(), accuracy(&clf)));
    }
    let final_accuracy = state.curve.last().map_or(0.0, |&(_, a)| a);
    Ok(RunOutcome { state, classifier: clf, test_idx, final_accuracy })
}
