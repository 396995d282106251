//! Similarity matrices, weighting vectors, magnitude, magnitude functions,
//! and the one-class SVM objective the weighting vector optimizes.
//!
//! For a finite metric space the similarity matrix has entries
//! `exp(-t * d(x_i, x_j))`; the weighting vector solves `zeta w = 1` and the
//! magnitude is the sum of its entries. Solves go through a symmetric
//! positive definite factorization, never an explicit inverse.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{ones, residual_inf, Cholesky, Mat};
use crate::scalar::Real;
use crate::space::{DistanceMatrix, DistanceSource, Metric, ScaleParameter};

/// Provenance of a similarity matrix. Positive definiteness is guaranteed
/// only for the Euclidean case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilaritySource {
    Euclidean,
    Graph,
    Raw,
}

/// The matrix `zeta` with entries `exp(-t d_ij)`: symmetric, unit diagonal,
/// entries in (0, 1].
#[derive(Debug, Clone)]
pub struct SimilarityMatrix<T> {
    zeta: Mat<T>,
    t: ScaleParameter<T>,
    source: SimilaritySource,
}

impl<T: Real> SimilarityMatrix<T> {
    pub fn len(&self) -> usize {
        self.zeta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.zeta[(i, j)]
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.zeta
    }

    pub fn scale(&self) -> ScaleParameter<T> {
        self.t
    }

    pub fn source(&self) -> SimilaritySource {
        self.source
    }

    /// Wraps an externally built similarity matrix (unit diagonal, symmetric,
    /// entries in (0,1] are checked).
    pub fn from_raw(zeta: Mat<T>, t: ScaleParameter<T>) -> Result<Self> {
        if !zeta.is_square() {
            return Err(Error::DimensionMismatch { expected: zeta.nrows(), got: zeta.ncols() });
        }
        let n = zeta.nrows();
        for i in 0..n {
            if zeta[(i, i)] != T::one() {
                return Err(Error::Input(format!("similarity diagonal not 1 at {i}")));
            }
            for j in 0..n {
                let v = zeta[(i, j)];
                if !(v > T::zero() && v <= T::one()) {
                    return Err(Error::Input(format!("similarity entry out of (0,1] at ({i},{j})")));
                }
                if v != zeta[(j, i)] {
                    return Err(Error::Input(format!("asymmetric similarity at ({i},{j})")));
                }
            }
        }
        Ok(Self { zeta, t, source: SimilaritySource::Raw })
    }

    /// Largest off-diagonal entry, i.e. `exp(-t * eps_min)`.
    pub fn max_off_diagonal(&self) -> Option<T> {
        let n = self.len();
        if n < 2 {
            return None;
        }
        let mut m = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.zeta[(i, j)]);
                }
            }
        }
        Some(m)
    }

    /// Submatrix on `idx`, keeping scale and source tags.
    pub fn restrict(&self, idx: &[usize]) -> SimilarityMatrix<T> {
        SimilarityMatrix { zeta: self.zeta.gather(idx), t: self.t, source: self.source }
    }
}

/// Entrywise `exp(-t * dist)` with an exact unit diagonal.
pub fn similarity_matrix<T: Real>(
    dist: &DistanceMatrix<T>,
    t: ScaleParameter<T>,
) -> SimilarityMatrix<T> {
    let n = dist.len();
    let tv = t.get();
    let build_row = |i: usize| -> Vec<T> {
        (0..n)
            .map(|j| if i == j { T::one() } else { (-tv * dist.get(i, j)).exp() })
            .collect()
    };
    let rows: Vec<Vec<T>> = if n >= 220 {
        (0..n).into_par_iter().map(build_row).collect()
    } else {
        (0..n).map(build_row).collect()
    };
    let source = match dist.source() {
        DistanceSource::PointCloud(Metric::L2) => SimilaritySource::Euclidean,
        DistanceSource::Graph => SimilaritySource::Graph,
        _ => SimilaritySource::Raw,
    };
    SimilarityMatrix { zeta: Mat::from_rows(rows), t, source }
}

/// Solution of `zeta w = 1` together with its sum (the magnitude) and the
/// achieved residual.
#[derive(Debug, Clone)]
pub struct WeightingVector<T> {
    w: Vec<T>,
    magnitude: T,
    residual: T,
}

impl<T: Real> WeightingVector<T> {
    pub(crate) fn from_solution(zeta: &Mat<T>, w: Vec<T>) -> Self {
        let magnitude = w.iter().copied().sum();
        let residual = residual_inf(zeta, &w, &ones(w.len()));
        Self { w, magnitude, residual }
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Mag = sum of the weights.
    pub fn magnitude(&self) -> T {
        self.magnitude
    }

    /// Achieved `max_i |(zeta w - 1)_i|`.
    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn into_weights(self) -> Vec<T> {
        self.w
    }
}

/// Solves `zeta w = 1` by Cholesky factorization.
pub fn weighting_vector<T: Real>(zeta: &SimilarityMatrix<T>) -> Result<WeightingVector<T>> {
    let chol = Cholesky::factor_ref(zeta.matrix())?;
    let w = chol.solve(&ones(zeta.len()));
    Ok(WeightingVector::from_solution(zeta.matrix(), w))
}

/// Mag = 1^T zeta^{-1} 1.
pub fn magnitude<T: Real>(zeta: &SimilarityMatrix<T>) -> Result<T> {
    Ok(weighting_vector(zeta)?.magnitude())
}

/// Magnitude sampled over an ascending grid of scales. Failed solves are
/// recorded as gaps, never extrapolated.
#[derive(Debug, Clone)]
pub struct MagnitudeSeries<T> {
    ts: Vec<T>,
    mags: Vec<Option<T>>,
}

impl<T: Real> MagnitudeSeries<T> {
    pub fn ts(&self) -> &[T] {
        &self.ts
    }

    pub fn mags(&self) -> &[Option<T>] {
        &self.mags
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.mags.iter().filter(|m| m.is_none()).count()
    }

    /// (t, magnitude) pairs with gaps skipped.
    pub fn solved(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.ts
            .iter()
            .zip(&self.mags)
            .filter_map(|(&t, m)| m.map(|v| (t, v)))
    }
}

/// Evaluates the magnitude function over `ts`. Grid points run in parallel,
/// each with a private factorization workspace.
pub fn magnitude_function<T: Real>(
    dist: &DistanceMatrix<T>,
    ts: &[ScaleParameter<T>],
) -> Result<MagnitudeSeries<T>> {
    if ts.is_empty() {
        return Err(Error::Empty { what: "scale grid" });
    }
    if ts.windows(2).any(|w| w[1].get() <= w[0].get()) {
        return Err(Error::Input("scale grid must be strictly ascending".into()));
    }
    let mags: Vec<Option<T>> = ts
        .par_iter()
        .map(|&t| {
            let zeta = similarity_matrix(dist, t);
            magnitude(&zeta).ok()
        })
        .collect();
    if mags.iter().all(Option::is_none) {
        return Err(Error::AllGaps);
    }
    Ok(MagnitudeSeries { ts: ts.iter().map(|t| t.get()).collect(), mags })
}

/// Logarithmic scale grid with `per_decade` points per decade, inclusive of
/// the endpoints.
pub fn log_grid<T: Real>(
    t_min: T,
    t_max: T,
    per_decade: usize,
) -> Result<Vec<ScaleParameter<T>>> {
    if !(t_min > T::zero() && t_max > t_min && per_decade > 0) {
        return Err(Error::Input("need 0 < t_min < t_max and per_decade > 0".into()));
    }
    let lo = t_min.log10();
    let hi = t_max.log10();
    let decades = (hi - lo).as_f64();
    let steps = (decades * per_decade as f64).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let frac = T::from_usize(k).unwrap() / T::from_usize(steps).unwrap();
        let t = T::from_f64(10f64).unwrap().powf(lo + (hi - lo) * frac);
        out.push(ScaleParameter::new(t)?);
    }
    Ok(out)
}

/// One-class SVM objective `|| min(zeta u - (1+gamma) 1, 0) ||_1`. The
/// weighting vector scaled by `1 + gamma` attains zero.
pub fn svm_objective<T: Real>(zeta: &SimilarityMatrix<T>, u: &[T], gamma: T) -> T {
    assert_eq!(u.len(), zeta.len(), "svm_objective dimension mismatch");
    let margin = T::one() + gamma;
    zeta.matrix()
        .matvec(u)
        .into_iter()
        .map(|v| (v - margin).min(T::zero()).abs())
        .sum()
}

/// Summary of how a weighting vector splits across an interior/boundary
/// partition: the testable consequence of weightings being flat inside and
/// spiked at the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProfile<T> {
    /// Coefficient of variation (population stdev / |mean|) of the interior weights.
    pub interior_cv: T,
    /// min(boundary weights) / max(interior weights).
    pub boundary_min_over_interior_max: T,
}

/// `interior_mask[i]` is true for interior points, false for boundary points.
pub fn boundary_profile<T: Real>(
    w: &WeightingVector<T>,
    interior_mask: &[bool],
) -> Result<BoundaryProfile<T>> {
    if interior_mask.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: interior_mask.len() });
    }
    let interior: Vec<T> = w
        .weights()
        .iter()
        .zip(interior_mask)
        .filter_map(|(&v, &m)| m.then_some(v))
        .collect();
    let boundary: Vec<T> = w
        .weights()
        .iter()
        .zip(interior_mask)
        .filter_map(|(&v, &m)| (!m).then_some(v))
        .collect();
    if interior.is_empty() || boundary.is_empty() {
        return Err(Error::InvalidPartition {
            reason: "interior and boundary must both be nonempty".into(),
        });
    }
    let nf = T::from_usize(interior.len()).unwrap();
    let mean = interior.iter().copied().sum::<T>() / nf;
    let var = interior.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
    let cv = if mean == T::zero() {
        if var == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        var.sqrt() / mean.abs()
    };
    let bmin = boundary.iter().copied().fold(T::infinity(), T::min);
    let imax = interior.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(BoundaryProfile { interior_cv: cv, boundary_min_over_interior_max: bmin / imax })
}

/// Closed-form weighting of two points at similarity `q = exp(-t d)`:
/// both weights are `1/(1+q)`.
pub fn two_point_weight<T: Real>(q: T) -> T {
    T::one() / (T::one() + q)
}
