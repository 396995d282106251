//! Point clouds, pairwise distance matrices, scale parameters, and feature
//! standardization — the substrate every other module consumes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Minkowski metric used for pairwise distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    L1,
    #[default]
    L2,
    Linf,
}

impl Metric {
    pub fn dist<T: Real>(self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let d = x - y;
                    d * d
                })
                .sum::<T>()
                .sqrt(),
            Metric::Linf => a
                .iter()
                .zip(b)
                .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs())),
        }
    }
}

/// Where a distance matrix came from; downstream positive-definiteness
/// guarantees depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceSource {
    PointCloud(Metric),
    Graph,
    Raw,
}

/// Finite set of points in R^d, rows are points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<T>,
    n: usize,
    d: usize,
}

impl<T: Real> PointCloud<T> {
    /// `points` is row-major, `n * d` entries.
    pub fn new(points: Vec<T>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Empty { what: "point cloud" });
        }
        if points.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: points.len() });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "point coordinates" });
        }
        Ok(Self { points, n, d })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Input("ragged point rows".into()));
        }
        Self::new(rows.iter().flatten().copied().collect(), n, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[T]> {
        self.points.chunks(self.d)
    }

    /// Subset by row indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> PointCloud<T> {
        let mut points = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            points.extend_from_slice(self.point(i));
        }
        PointCloud { points, n: idx.len(), d: self.d }
    }

    /// Appends the rows of `other` (dimensions must match).
    pub fn concat(&self, other: &PointCloud<T>) -> Result<PointCloud<T>> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: other.d });
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Ok(PointCloud { points, n: self.n + other.n, d: self.d })
    }

    /// Index of the first pair of exactly equal rows, if any.
    pub fn find_duplicate(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.point(i) == self.point(j) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Removes exact duplicate rows, keeping first occurrences. Returns the
    /// deduplicated cloud and the kept row indices.
    pub fn dedup_exact(&self) -> (PointCloud<T>, Vec<usize>) {
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::new();
        for (i, p) in self.iter_points().enumerate() {
            let key: Vec<u64> = p
                .iter()
                .map(|&v| {
                    let v = if v == T::zero() { T::zero() } else { v };
                    v.to_f64().map_or(0, f64::to_bits)
                })
                .collect();
            if seen.insert(key) {
                kept.push(i);
            }
        }
        (self.select(&kept), kept)
    }
}

/// Positive scale multiplier t applied to all distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParameter<T>(T);

impl<T: Real> ScaleParameter<T> {
    pub fn new(t: T) -> Result<Self> {
        if t > T::zero() && t.is_finite() {
            Ok(Self(t))
        } else {
            Err(Error::InvalidScale { value: t.as_f64() })
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Symmetric nonnegative pairwise-distance matrix with its minimum positive
/// off-diagonal distance cached.
#[derive(Debug, Clone)]
pub struct DistanceMatrix<T> {
    dist: Mat<T>,
    /// Minimum over off-diagonal entries; `None` for a single point.
    eps_min: Option<T>,
    source: DistanceSource,
}

impl<T: Real> DistanceMatrix<T> {
    pub(crate) fn from_parts(dist: Mat<T>, source: DistanceSource) -> Self {
        let eps_min = min_off_diagonal(&dist);
        Self { dist, eps_min, source }
    }

    /// Validates and wraps an externally supplied matrix.
    pub fn from_raw(dist: Mat<T>) -> Result<Self> {
        if !dist.is_square() {
            return Err(Error::DimensionMismatch { expected: dist.nrows(), got: dist.ncols() });
        }
        let n = dist.nrows();
        for i in 0..n {
            if dist[(i, i)] != T::zero() {
                return Err(Error::Input(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = dist[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { what: "distance entries" });
                }
                if v < T::zero() {
                    return Err(Error::Input(format!("negative distance at ({i},{j})")));
                }
                if (v - dist[(j, i)]).abs() > T::zero() {
                    return Err(Error::Input(format!("asymmetric distance at ({i},{j})")));
                }
            }
        }
        Ok(Self::from_parts(dist, DistanceSource::Raw))
    }

    pub fn len(&self) -> usize {
        self.dist.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.dist[(i, j)]
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.dist
    }

    /// Smallest distance between distinct points; `None` when n = 1.
    /// Zero means duplicate points are present.
    pub fn eps_min(&self) -> Option<T> {
        self.eps_min
    }

    pub fn has_duplicates(&self) -> bool {
        self.eps_min.is_some_and(|e| e == T::zero())
    }

    pub fn source(&self) -> DistanceSource {
        self.source
    }
}

fn min_off_diagonal<T: Real>(dist: &Mat<T>) -> Option<T> {
    let n = dist.nrows();
    if n < 2 {
        return None;
    }
    let mut m = T::infinity();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m = m.min(dist[(i, j)]);
            }
        }
    }
    Some(m)
}

/// Pairwise distances under the chosen metric. Rows are computed in
/// parallel for large clouds; each entry is a single scalar expression, so
/// the result is identical to the sequential evaluation.
pub fn pairwise_distances<T: Real>(cloud: &PointCloud<T>, metric: Metric) -> DistanceMatrix<T> {
    let n = cloud.len();
    let build_row = |i: usize| -> Vec<T> {
        let pi = cloud.point(i);
        (0..n)
            .map(|j| if i == j { T::zero() } else { metric.dist(pi, cloud.point(j)) })
            .collect()
    };
    let rows: Vec<Vec<T>> = if n >= 220 {
        (0..n).into_par_iter().map(build_row).collect()
    } else {
        (0..n).map(build_row).collect()
    };
    DistanceMatrix::from_parts(Mat::from_rows(rows), DistanceSource::PointCloud(metric))
}

/// Per-feature affine map taking data to mean 0 / unit variance
/// (population convention; zero-variance features keep stdev 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    mean: Vec<T>,
    stdev: Vec<T>,
}

/// Relative threshold below which a feature's spread counts as zero.
const ZERO_VAR_REL: f64 = 1e-12;

impl<T: Real> Standardizer<T> {
    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn stdev(&self) -> &[T] {
        &self.stdev
    }

    pub fn apply_point(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.mean.len(), "standardizer dimension mismatch");
        x.iter()
            .zip(self.mean.iter().zip(&self.stdev))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, cloud: &PointCloud<T>) -> PointCloud<T> {
        let rows: Vec<Vec<T>> = cloud.iter_points().map(|p| self.apply_point(p)).collect();
        PointCloud::from_rows(&rows).expect("standardized cloud stays valid")
    }

    pub fn invert_point(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(self.mean.iter().zip(&self.stdev))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect()
    }

    pub fn invert(&self, cloud: &PointCloud<T>) -> PointCloud<T> {
        let rows: Vec<Vec<T>> = cloud.iter_points().map(|p| self.invert_point(p)).collect();
        PointCloud::from_rows(&rows).expect("inverted cloud stays valid")
    }
}

/// Fits the normalizer on `cloud` and returns the transformed cloud with it.
pub fn standardize<T: Real>(cloud: &PointCloud<T>) -> Result<(PointCloud<T>, Standardizer<T>)> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let d = cloud.dim();
    let nf = T::from_usize(n).unwrap();
    let mut mean = vec![T::zero(); d];
    for p in cloud.iter_points() {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut var = vec![T::zero(); d];
    let mut scale = vec![T::zero(); d];
    for p in cloud.iter_points() {
        for (k, &v) in p.iter().enumerate() {
            let c = v - mean[k];
            var[k] += c * c;
            scale[k] = scale[k].max(v.abs());
        }
    }
    let floor = T::from_f64(ZERO_VAR_REL).unwrap();
    let stdev: Vec<T> = var
        .iter()
        .zip(&scale)
        .map(|(&v, &s)| {
            let sd = (v / nf).sqrt();
            if sd <= floor * T::one().max(s) {
                T::one()
            } else {
                sd
            }
        })
        .collect();
    let std = Standardizer { mean, stdev };
    Ok((std.apply(cloud), std))
}
