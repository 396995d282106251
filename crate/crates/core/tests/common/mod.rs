//! Oracles shared by the integration suites. These deliberately avoid the
//! library's solve paths so they stay independent of what they check.
#![allow(dead_code)] // each suite uses a different subset

use magkit_core::linalg::Mat;

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut work: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = a.row(i).to_vec();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| work[i][k].abs().partial_cmp(&work[j][k].abs()).unwrap())
            .unwrap();
        work.swap(k, p);
        let pivot = work[k][k];
        assert!(pivot != 0.0, "oracle: singular matrix");
        for v in work[k].iter_mut() {
            *v /= pivot;
        }
        for i in 0..n {
            if i != k {
                let f = work[i][k];
                if f != 0.0 {
                    let krow = work[k].clone();
                    for (v, kv) in work[i].iter_mut().zip(&krow) {
                        *v -= f * kv;
                    }
                }
            }
        }
    }
    Mat::from_fn(n, n, |i, j| work[i][n + j])
}

/// Direct weighting oracle: dense inverse times the ones vector.
pub fn direct_weights(zeta: &Mat<f64>) -> Vec<f64> {
    let inv = gauss_jordan_inverse(zeta);
    inv.matvec(&vec![1.0; zeta.nrows()])
}

/// Midranks (average rank for ties), 1-based.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &ii in &idx[i..=j] {
            r[ii] = mid;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with midrank tie handling.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        let xa = ra[i] - ma;
        let xb = rb[i] - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    num / (da * db).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
