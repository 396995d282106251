//! Dense linear algebra kernels: a row-major matrix type, a blocked Cholesky
//! factorization for symmetric positive definite systems, and a small
//! partially-pivoted LU for general square blocks.
//!
//! Every weighting-vector solve in the crate goes through [`Cholesky`]; the
//! explicit inverse is only formed where a caller needs to cache it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
}

/// Problems smaller than this run serially; larger ones use rayon.
/// Per-entry arithmetic is identical either way, so results are
/// bit-identical across thread counts.
const PAR_THRESHOLD: usize = 220;

/// Panel width for the blocked Cholesky.
const CHOL_BLOCK: usize = 96;

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: vec![T::zero(); rows * cols], rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { data, rows, cols }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let data = rows.into_iter().flatten().collect();
        Self { data, rows: r, cols: c }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// y = A x
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        if self.rows == 0 || self.cols == 0 {
            return vec![T::zero(); self.rows];
        }
        let dot = |row: &[T]| dot(row, x);
        if self.rows >= PAR_THRESHOLD {
            self.data
                .par_chunks(self.cols)
                .map(dot)
                .collect()
        } else {
            self.data.chunks(self.cols).map(dot).collect()
        }
    }

    /// y = A^T x
    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut y = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (yj, &aij) in y.iter_mut().zip(self.row(i)) {
                *yj += xi * aij;
            }
        }
        y
    }

    /// C = A B
    pub fn matmul(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, b.rows, "matmul dimension mismatch");
        let mut c = Mat::zeros(self.rows, b.cols);
        let compute_row = |(i, crow): (usize, &mut [T])| {
            for (k, &aik) in self.row(i).iter().enumerate() {
                if aik != T::zero() {
                    for (cj, &bkj) in crow.iter_mut().zip(b.row(k)) {
                        *cj += aik * bkj;
                    }
                }
            }
        };
        if self.rows >= PAR_THRESHOLD {
            c.data
                .par_chunks_mut(b.cols)
                .enumerate()
                .map(|(i, r)| (i, r))
                .for_each(compute_row);
        } else {
            c.data
                .chunks_mut(b.cols)
                .enumerate()
                .for_each(compute_row);
        }
        c
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Gathers the square submatrix indexed by `idx` (rows and columns).
    pub fn gather(&self, idx: &[usize]) -> Mat<T> {
        Mat::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    /// Gathers the rectangular block rows x cols.
    pub fn gather_rect(&self, rows: &[usize], cols: &[usize]) -> Mat<T> {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Serial dot product; the fixed evaluation order keeps results reproducible.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn ones<T: Real>(n: usize) -> Vec<T> {
    vec![T::one(); n]
}

/// max_i |(A x - b)_i|
pub fn residual_inf<T: Real>(a: &Mat<T>, x: &[T], b: &[T]) -> T {
    let ax = a.matvec(x);
    ax.iter()
        .zip(b)
        .fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// The factorization is right-looking and blocked: each panel is factored
/// serially, then the trailing update (the O(n^3) part) runs one row per
/// rayon task. Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Mat<T>,
    n: usize,
}

impl<T: Real> Cholesky<T> {
    /// Factors `a` in place (`a` is consumed and becomes the factor storage).
    pub fn factor(mut a: Mat<T>) -> Result<Self> {
        assert!(a.is_square(), "cholesky requires a square matrix");
        let n = a.nrows();
        let mut k0 = 0;
        while k0 < n {
            let kb = CHOL_BLOCK.min(n - k0);
            factor_diag_block(&mut a, k0, kb)?;
            if k0 + kb < n {
                // Copies keep the panel reads disjoint from the trailing writes.
                let diag = copy_block(&a, k0, kb, k0, kb);
                trsm_panel(&mut a, k0, kb, &diag);
                let panel = copy_block(&a, k0 + kb, n - k0 - kb, k0, kb);
                syrk_update(&mut a, k0 + kb, kb, &panel);
            }
            k0 += kb;
        }
        Ok(Self { l: a, n })
    }

    pub fn factor_ref(a: &Mat<T>) -> Result<Self> {
        Self::factor(a.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry (i, j) of the lower-triangular factor, j <= i.
    pub fn l(&self, i: usize, j: usize) -> T {
        self.l[(i, j)]
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.n;
        // L y = b (forward, contiguous row-prefix dots)
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
        // L^T x = y (backward, column handled as a row-prefix axpy)
        for j in (0..n).rev() {
            let row = self.l.row(j);
            let xj = x[j] / row[j];
            x[j] = xj;
            for (xi, &lji) in x[..j].iter_mut().zip(&row[..j]) {
                *xi -= xj * lji;
            }
        }
    }

    /// Solves A X = B column by column.
    pub fn solve_mat(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(b.nrows(), self.n);
        let cols: Vec<Vec<T>> = if b.ncols() >= 8 && self.n >= PAR_THRESHOLD {
            (0..b.ncols())
                .into_par_iter()
                .map(|j| {
                    let col: Vec<T> = (0..b.nrows()).map(|i| b[(i, j)]).collect();
                    self.solve(&col)
                })
                .collect()
        } else {
            (0..b.ncols())
                .map(|j| {
                    let col: Vec<T> = (0..b.nrows()).map(|i| b[(i, j)]).collect();
                    self.solve(&col)
                })
                .collect()
        };
        Mat::from_fn(self.n, b.ncols(), |i, j| cols[j][i])
    }

    /// Explicit inverse; O(n^3). Formed only where a cached inverse pays off.
    pub fn inverse(&self) -> Mat<T> {
        self.solve_mat(&Mat::identity(self.n))
    }
}

fn factor_diag_block<T: Real>(a: &mut Mat<T>, k0: usize, kb: usize) -> Result<()> {
    for r in 0..kb {
        let i = k0 + r;
        for c in 0..=r {
            let j = k0 + c;
            // Split borrows: row j is strictly before row i except on the diagonal.
            let s = {
                let ri = &a.row(i)[k0..k0 + c];
                let rj = &a.row(j)[k0..k0 + c];
                dot(ri, rj)
            };
            if i == j {
                let pivot = a[(i, i)] - s;
                if pivot <= T::zero() || !pivot.is_finite() {
                    return Err(Error::SingularMatrix { pivot: pivot.as_f64(), index: i });
                }
                a[(i, i)] = pivot.sqrt();
            } else {
                let v = (a[(i, j)] - s) / a[(j, j)];
                a[(i, j)] = v;
            }
        }
    }
    Ok(())
}

fn copy_block<T: Real>(a: &Mat<T>, r0: usize, rn: usize, c0: usize, cn: usize) -> Mat<T> {
    Mat::from_fn(rn, cn, |i, j| a[(r0 + i, c0 + j)])
}

/// Rows below the panel solve against the panel's diagonal block.
fn trsm_panel<T: Real>(a: &mut Mat<T>, k0: usize, kb: usize, diag: &Mat<T>) {
    let n = a.nrows();
    let cols = a.cols;
    let body = |row: &mut [T]| {
        for c in 0..kb {
            let s = dot(&row[k0..k0 + c], &diag.row(c)[..c]);
            row[k0 + c] = (row[k0 + c] - s) / diag[(c, c)];
        }
    };
    let tail = &mut a.data[(k0 + kb) * cols..n * cols];
    if n - k0 - kb >= PAR_THRESHOLD {
        tail.par_chunks_mut(cols).for_each(body);
    } else {
        tail.chunks_mut(cols).for_each(body);
    }
}

/// Trailing update A22 -= P P^T, one row per task.
fn syrk_update<T: Real>(a: &mut Mat<T>, t0: usize, kb: usize, panel: &Mat<T>) {
    let n = a.nrows();
    let cols = a.cols;
    let body = |(r, row): (usize, &mut [T])| {
        let i = t0 + r;
        let pi = panel.row(r);
        for j in t0..=i {
            let pj = panel.row(j - t0);
            row[j] -= dot(&pi[..kb], &pj[..kb]);
        }
    };
    let tail = &mut a.data[t0 * cols..n * cols];
    if n - t0 >= PAR_THRESHOLD {
        tail.par_chunks_mut(cols).enumerate().for_each(body);
    } else {
        tail.chunks_mut(cols).enumerate().for_each(body);
    }
}

/// LU factorization with partial pivoting, for general (not necessarily
/// definite) square blocks such as arbitrary Schur pivots.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
    n: usize,
}

impl<T: Real> Lu<T> {
    pub fn factor(mut a: Mat<T>) -> Result<Self> {
        assert!(a.is_square(), "lu requires a square matrix");
        let n = a.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pval) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if pval == T::zero() || !pval.is_finite() {
                return Err(Error::SingularMatrix { pivot: pval.as_f64(), index: k });
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let m = a[(i, k)] / pivot;
                a[(i, k)] = m;
                for j in k + 1..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= m * v;
                }
            }
        }
        Ok(Self { lu: a, perm, n })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..self.n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..self.n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat<T>) -> Mat<T> {
        let cols: Vec<Vec<T>> = (0..b.ncols())
            .map(|j| {
                let col: Vec<T> = (0..b.nrows()).map(|i| b[(i, j)]).collect();
                self.solve(&col)
            })
            .collect();
        Mat::from_fn(self.n, b.ncols(), |i, j| cols[j][i])
    }
}
