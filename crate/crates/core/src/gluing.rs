//! Schur-complement gluing: reconstruct weighting vectors of unions,
//! supersets, and single-point augmentations from weightings of their parts,
//! without refactorizing from scratch.
//!
//! For a block matrix `M = [[A, B], [C, D]]` the Schur complement of `A` is
//! `M/A = D - C A^{-1} B`, and
//!
//! ```text
//! M^{-1} = [[A^{-1}, 0], [0, 0]] + rho?,   where
//! rho    = [[A^{-1} B (M/A)^{-1} C A^{-1},  -A^{-1} B (M/A)^{-1}],
//!           [-(M/A)^{-1} C A^{-1},           (M/A)^{-1}        ]]
//! ```
//!
//! Multiplying on the right by the all-ones vector turns this identity into
//! weighting-vector and magnitude update formulas.

use crate::error::{Error, Result};
use crate::linalg::{dot, ones, Cholesky, Lu, Mat};
use crate::scalar::Real;
use crate::space::{pairwise_distances, Metric, PointCloud, ScaleParameter};
use crate::weighting::{similarity_matrix, weighting_vector, SimilarityMatrix, WeightingVector};

/// Split of `0..n` into a head block and a tail block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    head: Vec<usize>,
    tail: Vec<usize>,
}

impl BlockPartition {
    /// Indices must be disjoint and jointly cover `0..n`. Either side may be
    /// empty (the degenerate conventions are handled by the callers).
    pub fn new(head: Vec<usize>, tail: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in head.iter().chain(&tail) {
            if i >= n {
                return Err(Error::InvalidPartition { reason: format!("index {i} out of range") });
            }
            if seen[i] {
                return Err(Error::InvalidPartition { reason: format!("index {i} repeated") });
            }
            seen[i] = true;
        }
        if head.len() + tail.len() != n {
            return Err(Error::InvalidPartition {
                reason: format!("covers {} of {n} indices", head.len() + tail.len()),
            });
        }
        Ok(Self { head, tail })
    }

    /// Head = `0..k`, tail = `k..n`.
    pub fn leading(k: usize, n: usize) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidPartition { reason: format!("head size {k} > {n}") });
        }
        Ok(Self { head: (0..k).collect(), tail: (k..n).collect() })
    }

    pub fn head(&self) -> &[usize] {
        &self.head
    }

    pub fn tail(&self) -> &[usize] {
        &self.tail
    }

    pub fn len(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block-order position -> original index.
    pub fn permutation(&self) -> Vec<usize> {
        self.head.iter().chain(&self.tail).copied().collect()
    }
}

/// Which block of the partition is treated as the (invertible) pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurPivot {
    Head,
    Tail,
}

/// Schur complement of the pivot block in `m` under `part`:
/// `Head` yields `M/A = D - C A^{-1} B`, `Tail` yields `M/D = A - B D^{-1} C`.
pub fn schur_complement<T: Real>(
    m: &Mat<T>,
    part: &BlockPartition,
    pivot: SchurPivot,
) -> Result<Mat<T>> {
    if !m.is_square() || m.nrows() != part.len() {
        return Err(Error::DimensionMismatch { expected: part.len(), got: m.nrows() });
    }
    let (pivot_idx, rest_idx) = match pivot {
        SchurPivot::Head => (part.head(), part.tail()),
        SchurPivot::Tail => (part.tail(), part.head()),
    };
    if pivot_idx.is_empty() {
        return Ok(m.gather(rest_idx));
    }
    let p = m.gather(pivot_idx);
    let b = m.gather_rect(pivot_idx, rest_idx);
    let c = m.gather_rect(rest_idx, pivot_idx);
    let rest = m.gather(rest_idx);
    // LU handles general invertible pivots; SPD inputs hit the same path.
    let lu = Lu::factor(p)?;
    let pinv_b = lu.solve_mat(&b);
    let correction = c.matmul(&pinv_b);
    Ok(Mat::from_fn(rest_idx.len(), rest_idx.len(), |i, j| {
        rest[(i, j)] - correction[(i, j)]
    }))
}

/// The correction matrix `rho` (in block order) plus the permutation taking
/// block positions back to the original indexing.
#[derive(Debug, Clone)]
pub struct GluingCorrection<T> {
    rho: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Real> GluingCorrection<T> {
    /// `rho` in block order (head block first).
    pub fn rho(&self) -> &Mat<T> {
        &self.rho
    }

    /// Block-order position -> original index.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `1^T rho 1`, the magnitude correction.
    pub fn magnitude_correction(&self) -> T {
        let n = self.rho.nrows();
        self.rho.matvec(&ones(n)).into_iter().sum()
    }
}

struct SchurWorkspace<T> {
    /// Factorization of the head block.
    head_chol: Cholesky<T>,
    /// Factorization of the Schur complement M/A.
    schur_chol: Cholesky<T>,
    /// Cross block B (head x tail) in block order.
    cross: Mat<T>,
}

fn schur_workspace<T: Real>(
    zeta: &SimilarityMatrix<T>,
    part: &BlockPartition,
) -> Result<SchurWorkspace<T>> {
    let a = zeta.matrix().gather(part.head());
    let b = zeta.matrix().gather_rect(part.head(), part.tail());
    let d = zeta.matrix().gather(part.tail());
    let head_chol = Cholesky::factor(a)?;
    let ainv_b = head_chol.solve_mat(&b);
    let bt_ainv_b = b.transpose().matmul(&ainv_b);
    let schur = Mat::from_fn(part.tail().len(), part.tail().len(), |i, j| {
        d[(i, j)] - bt_ainv_b[(i, j)]
    });
    let schur_chol = Cholesky::factor(schur)?;
    Ok(SchurWorkspace { head_chol, schur_chol, cross: b })
}

fn check_is_weighting<T: Real>(zeta_block: &Mat<T>, w: &WeightingVector<T>) -> Result<()> {
    if w.len() != zeta_block.nrows() {
        return Err(Error::DimensionMismatch { expected: zeta_block.nrows(), got: w.len() });
    }
    let r = crate::linalg::residual_inf(zeta_block, w.weights(), &ones(w.len()));
    if r > T::from_f64(1e-6).unwrap() {
        return Err(Error::Input(format!(
            "supplied vector is not the block weighting (residual {r})"
        )));
    }
    Ok(())
}

/// Assembles `w_X` from the weightings of the two blocks of a partition via
/// the restricted-solve identities
/// `w_X|_head = (zeta_X / zeta_tail)^{-1} (1 - B w_tail)` and
/// `w_X|_tail = (zeta_X / zeta_head)^{-1} (1 - B^T w_head)`.
pub fn weights_from_disjoint_parts<T: Real>(
    zeta_x: &SimilarityMatrix<T>,
    part: &BlockPartition,
    w_head: &WeightingVector<T>,
    w_tail: &WeightingVector<T>,
) -> Result<WeightingVector<T>> {
    if part.len() != zeta_x.len() {
        return Err(Error::DimensionMismatch { expected: zeta_x.len(), got: part.len() });
    }
    if part.head().is_empty() || part.tail().is_empty() {
        return Err(Error::InvalidPartition { reason: "both blocks must be nonempty".into() });
    }
    check_is_weighting(&zeta_x.matrix().gather(part.head()), w_head)?;
    check_is_weighting(&zeta_x.matrix().gather(part.tail()), w_tail)?;

    let b = zeta_x.matrix().gather_rect(part.head(), part.tail());

    // M/A = D - B^T A^{-1} B  (pivot = head), solves for the tail entries.
    let via_head = schur_workspace(zeta_x, part)?;
    let rhs_tail: Vec<T> = {
        let bt_wh = b.matvec_t(w_head.weights());
        bt_wh.into_iter().map(|v| T::one() - v).collect()
    };
    let tail_w = via_head.schur_chol.solve(&rhs_tail);

    // M/D = A - B D^{-1} B^T  (pivot = tail), solves for the head entries.
    let swapped = BlockPartition::new(part.tail().to_vec(), part.head().to_vec(), part.len())?;
    let via_tail = schur_workspace(zeta_x, &swapped)?;
    let rhs_head: Vec<T> = {
        let b_wt = b.matvec(w_tail.weights());
        b_wt.into_iter().map(|v| T::one() - v).collect()
    };
    let head_w = via_tail.schur_chol.solve(&rhs_head);

    let mut w = vec![T::zero(); part.len()];
    for (&orig, &v) in part.head().iter().zip(&head_w) {
        w[orig] = v;
    }
    for (&orig, &v) in part.tail().iter().zip(&tail_w) {
        w[orig] = v;
    }
    Ok(WeightingVector::from_solution(zeta_x.matrix(), w))
}

/// Extends the weighting of the head block to the full space without forming
/// `rho`: `w_X|_tail = (M/A)^{-1}(1 - B^T w_head)` and
/// `w_X|_head = w_head - A^{-1} B w_X|_tail`.
pub fn extend_weighting<T: Real>(
    zeta_x: &SimilarityMatrix<T>,
    part: &BlockPartition,
    w_head: &WeightingVector<T>,
) -> Result<WeightingVector<T>> {
    if part.len() != zeta_x.len() {
        return Err(Error::DimensionMismatch { expected: zeta_x.len(), got: part.len() });
    }
    if part.tail().is_empty() {
        // Y = X: nothing to extend.
        check_is_weighting(zeta_x.matrix(), w_head)?;
        let mut w = vec![T::zero(); part.len()];
        for (&orig, &v) in part.head().iter().zip(w_head.weights()) {
            w[orig] = v;
        }
        return Ok(WeightingVector::from_solution(zeta_x.matrix(), w));
    }
    if part.head().is_empty() {
        // Y = empty: the correction alone is the full solve.
        return weighting_vector(zeta_x);
    }
    check_is_weighting(&zeta_x.matrix().gather(part.head()), w_head)?;
    let ws = schur_workspace(zeta_x, part)?;
    let (head_w, tail_w) = extend_blocks(&ws, w_head.weights());
    let mut w = vec![T::zero(); part.len()];
    for (&orig, &v) in part.head().iter().zip(&head_w) {
        w[orig] = v;
    }
    for (&orig, &v) in part.tail().iter().zip(&tail_w) {
        w[orig] = v;
    }
    Ok(WeightingVector::from_solution(zeta_x.matrix(), w))
}

fn extend_blocks<T: Real>(ws: &SchurWorkspace<T>, w_head: &[T]) -> (Vec<T>, Vec<T>) {
    let rhs: Vec<T> = ws
        .cross
        .matvec_t(w_head)
        .into_iter()
        .map(|v| T::one() - v)
        .collect();
    let tail_w = ws.schur_chol.solve(&rhs);
    let b_tail = ws.cross.matvec(&tail_w);
    let head_adjust = ws.head_chol.solve(&b_tail);
    let head_w: Vec<T> = w_head
        .iter()
        .zip(&head_adjust)
        .map(|(&wh, &adj)| wh - adj)
        .collect();
    (head_w, tail_w)
}

/// Same as [`extend_weighting`] but also materializes the full `rho`
/// correction matrix (an n x n allocation).
pub fn extend_weighting_with_correction<T: Real>(
    zeta_x: &SimilarityMatrix<T>,
    part: &BlockPartition,
    w_head: &WeightingVector<T>,
) -> Result<(WeightingVector<T>, GluingCorrection<T>)> {
    let n = part.len();
    if n != zeta_x.len() {
        return Err(Error::DimensionMismatch { expected: zeta_x.len(), got: n });
    }
    let perm = part.permutation();
    if part.tail().is_empty() {
        let w = extend_weighting(zeta_x, part, w_head)?;
        return Ok((w, GluingCorrection { rho: Mat::zeros(n, n), perm }));
    }
    if part.head().is_empty() {
        // Convention: the correction for the empty subset is the full inverse,
        // so the lemma reduces to the direct computation on X.
        let chol = Cholesky::factor_ref(zeta_x.matrix())?;
        let rho = chol.inverse();
        let w = weighting_vector(zeta_x)?;
        return Ok((w, GluingCorrection { rho, perm }));
    }
    check_is_weighting(&zeta_x.matrix().gather(part.head()), w_head)?;
    let ws = schur_workspace(zeta_x, part)?;
    let h = part.head().len();
    let t = part.tail().len();

    let schur_inv = ws.schur_chol.inverse();
    // W = A^{-1} B, so rho = [[W S^{-1} W^T, -W S^{-1}], [-S^{-1} W^T, S^{-1}]].
    let w_block = ws.head_chol.solve_mat(&ws.cross);
    let w_sinv = w_block.matmul(&schur_inv);
    let top_left = w_sinv.matmul(&w_block.transpose());
    let mut rho = Mat::zeros(n, n);
    for i in 0..h {
        for j in 0..h {
            rho[(i, j)] = top_left[(i, j)];
        }
        for j in 0..t {
            rho[(i, h + j)] = -w_sinv[(i, j)];
            rho[(h + j, i)] = -w_sinv[(i, j)];
        }
    }
    for i in 0..t {
        for j in 0..t {
            rho[(h + i, h + j)] = schur_inv[(i, j)];
        }
    }

    // w (block order) = [w_head; 0] + rho 1, scattered back to original order.
    let mut block_w = vec![T::zero(); n];
    block_w[..h].copy_from_slice(w_head.weights());
    let rho_ones = rho.matvec(&ones(n));
    for (bw, r) in block_w.iter_mut().zip(&rho_ones) {
        *bw += *r;
    }
    let mut w = vec![T::zero(); n];
    for (pos, &orig) in perm.iter().enumerate() {
        w[orig] = block_w[pos];
    }
    Ok((
        WeightingVector::from_solution(zeta_x.matrix(), w),
        GluingCorrection { rho, perm },
    ))
}

fn exact_key<T: Real>(p: &[T]) -> Vec<u64> {
    // Exact coordinate identity via bit patterns; -0.0 is normalized to 0.0.
    p.iter()
        .map(|&v| {
            let v = if v == T::zero() { T::zero() } else { v };
            v.to_f64().unwrap().to_bits()
        })
        .collect()
}

/// Weighting of the deduplicated union `Z = X u Y` via the
/// inclusion-exclusion identity. Point identity is exact coordinate
/// equality; `Z` is ordered by first occurrence in `X` then `Y`.
pub fn union_weighting<T: Real>(
    x: &PointCloud<T>,
    y: &PointCloud<T>,
    t: ScaleParameter<T>,
) -> Result<WeightingVector<T>> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    if let Some((i, j)) = x.find_duplicate() {
        return Err(Error::DuplicatePoints { first: i, second: j });
    }
    if let Some((i, j)) = y.find_duplicate() {
        return Err(Error::DuplicatePoints { first: i, second: j });
    }

    use std::collections::HashMap;
    let mut key_to_union: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut union_rows: Vec<Vec<T>> = Vec::new();
    let mut x_pos = Vec::with_capacity(x.len());
    for p in x.iter_points() {
        let key = exact_key(p);
        let idx = *key_to_union.entry(key).or_insert_with(|| {
            union_rows.push(p.to_vec());
            union_rows.len() - 1
        });
        x_pos.push(idx);
    }
    let mut y_pos = Vec::with_capacity(y.len());
    let mut inter_pos = Vec::new();
    for p in y.iter_points() {
        let key = exact_key(p);
        match key_to_union.get(&key) {
            Some(&idx) => {
                y_pos.push(idx);
                inter_pos.push(idx);
            }
            None => {
                union_rows.push(p.to_vec());
                let idx = union_rows.len() - 1;
                key_to_union.insert(key, idx);
                y_pos.push(idx);
            }
        }
    }

    let z = PointCloud::from_rows(&union_rows)?;
    let n = z.len();
    let zeta_z = similarity_matrix(&pairwise_distances(&z, Metric::L2), t);

    let lemma_term = |subset: &[usize]| -> Result<Vec<T>> {
        let rest: Vec<usize> = (0..n).filter(|i| !subset.contains(i)).collect();
        let part = BlockPartition::new(subset.to_vec(), rest, n)?;
        let w_sub = weighting_vector(&zeta_z.restrict(subset))?;
        Ok(extend_weighting(&zeta_z, &part, &w_sub)?.into_weights())
    };

    if inter_pos.is_empty() {
        // Disjoint clouds: the restricted-solve path of the two parts.
        let part = BlockPartition::new(
            x_pos.clone(),
            y_pos.clone(),
            n,
        )?;
        let w_x = weighting_vector(&zeta_z.restrict(&x_pos))?;
        let w_y = weighting_vector(&zeta_z.restrict(&y_pos))?;
        return weights_from_disjoint_parts(&zeta_z, &part, &w_x, &w_y);
    }
    if inter_pos.len() == n {
        // X = Y: the intersection term cancels one of the full terms.
        return weighting_vector(&zeta_z);
    }

    let term_x = lemma_term(&x_pos)?;
    let term_y = lemma_term(&y_pos)?;
    let term_xy = lemma_term(&inter_pos)?;
    let w: Vec<T> = (0..n)
        .map(|i| term_x[i] + term_y[i] - term_xy[i])
        .collect();
    Ok(WeightingVector::from_solution(zeta_z.matrix(), w))
}

/// Cached factorization (and optionally explicit inverse) of a training
/// similarity matrix, supporting O(n^2) single-point augmentations.
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct AugmentCache<T> {
    chol: Cholesky<T>,
    inverse: Option<Mat<T>>,
    w_train: Vec<T>,
    n: usize,
}

impl<T: Real> AugmentCache<T> {
    pub fn new(zeta: &SimilarityMatrix<T>) -> Result<Self> {
        let chol = Cholesky::factor_ref(zeta.matrix())?;
        let w_train = chol.solve(&ones(zeta.len()));
        Ok(Self { chol, inverse: None, w_train, n: zeta.len() })
    }

    /// Also materializes `zeta^{-1}` so each augmentation is a single
    /// matrix-vector product (the detector's cached-inverse mode).
    pub fn with_inverse(zeta: &SimilarityMatrix<T>) -> Result<Self> {
        let mut cache = Self::new(zeta)?;
        cache.inverse = Some(cache.chol.inverse());
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Weighting vector of the cached training block.
    pub fn train_weights(&self) -> &[T] {
        &self.w_train
    }

    fn apply_inverse(&self, v: &[T]) -> Vec<T> {
        match &self.inverse {
            Some(inv) => inv.matvec(v),
            None => self.chol.solve(v),
        }
    }

    /// Verifies the cache still reproduces `zeta w = 1` on the training block.
    pub fn residual_check(&self, zeta: &SimilarityMatrix<T>) -> T {
        crate::linalg::residual_inf(zeta.matrix(), &self.w_train, &ones(self.n))
    }
}

/// Result of augmenting a cached block with one new point.
#[derive(Debug, Clone)]
pub struct Augmented<T> {
    /// Weighting vector of `Y u {x}` (training entries first, then x).
    pub weights: Vec<T>,
    /// Weight of the new point (last entry of `weights`).
    pub new_weight: T,
}

/// Block-inverse update: given `cross[i] = exp(-t d(x, y_i))` (self-similarity
/// of the new point is 1), returns the augmented weighting in O(n^2).
///
/// The Schur scalar `s = 1 - cross^T zeta^{-1} cross` must be positive;
/// `s <= 0` means the new point duplicates a training point.
pub fn augment_one<T: Real>(cache: &AugmentCache<T>, cross: &[T]) -> Result<Augmented<T>> {
    if cross.len() != cache.len() {
        return Err(Error::DimensionMismatch { expected: cache.len(), got: cross.len() });
    }
    let v = cache.apply_inverse(cross);
    let s = T::one() - dot(cross, &v);
    if s <= T::zero() || !s.is_finite() {
        return Err(Error::DegenerateAugmentation { schur: s.as_f64() });
    }
    let beta = (T::one() - dot(cross, cache.train_weights())) / s;
    let mut weights: Vec<T> = cache
        .train_weights()
        .iter()
        .zip(&v)
        .map(|(&w, &vi)| w - beta * vi)
        .collect();
    weights.push(beta);
    Ok(Augmented { weights, new_weight: beta })
}
