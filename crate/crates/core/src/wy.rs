//! Recursive block Householder QR returning the compact WY form
//! `Q = I - Y T Y^T`.

use nalgebra::DMatrix;

use crate::dense::householder_in_place;
use crate::error::{Error, Result};

/// Column count at or below which the recursion switches to the unblocked
/// Householder loop.
pub const DEFAULT_BLOCK_SIZE: usize = 32;

/// Compact WY representation of an orthogonal `m x m` matrix built from `n`
/// Householder reflectors.
#[derive(Clone, Debug)]
pub struct DenseWy {
    /// `m x n`; the leading `n x n` block is unit lower triangular.
    pub y: DMatrix<f64>,
    /// `n x n` upper triangular.
    pub t: DMatrix<f64>,
}

impl DenseWy {
    pub fn rows(&self) -> usize {
        self.y.nrows()
    }

    /// `Q^T M = M - Y (T^T (Y^T M))`
    pub fn apply_qt(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let ytm = self.y.tr_mul(m);
        let mut out = m.clone();
        out.gemm(-1.0, &self.y, &self.t.tr_mul(&ytm), 1.0);
        out
    }

    /// `Q M = M - Y (T (Y^T M))`
    pub fn apply_q(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let ytm = self.y.tr_mul(m);
        let mut out = m.clone();
        out.gemm(-1.0, &self.y, &(&self.t * ytm), 1.0);
        out
    }

    /// The leading `cols` columns of `Q`.
    pub fn explicit_q(&self, cols: usize) -> DMatrix<f64> {
        let m = self.rows();
        let head = self.y.rows(0, cols.min(m));
        let mut q = DMatrix::identity(m, cols);
        // Q[:, :cols] = I[:, :cols] - Y T Y[:cols, :]^T
        let tyt = &self.t * head.transpose();
        q.gemm(-1.0, &self.y, &tyt, 1.0);
        q
    }
}

/// `Q^T M` with a row-count check.
pub fn wy_apply_qt(wy: &DenseWy, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if wy.rows() != m.nrows() {
        return Err(Error::dims("wy_apply_qt", wy.rows(), m.nrows()));
    }
    Ok(wy.apply_qt(m))
}

/// Recursive QR `A = (I - Y T Y^T) [R; 0]` of an `m x n` matrix, `m >= n`.
///
/// Columns are split at `floor(n / 2)` until at most `block_size` remain.
pub fn block_qr(a: &DMatrix<f64>, block_size: usize) -> Result<(DenseWy, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::dims("block_qr", format!("rows >= {n}"), m));
    }
    let mut work = a.clone();
    let (y, t) = recurse(&mut work, 0, 0, n, block_size.max(1));
    let r = work.rows(0, n).upper_triangle();
    Ok((DenseWy { y, t }, r))
}

fn recurse(
    w: &mut DMatrix<f64>,
    r0: usize,
    c0: usize,
    n: usize,
    block_size: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    if n <= block_size {
        return unblocked(w, r0, c0, n);
    }
    let rows = w.nrows() - r0;
    let n1 = n / 2;
    let n2 = n - n1;
    let (y1, t1) = recurse(w, r0, c0, n1, block_size);

    {
        let mut a2 = w.view_mut((r0, c0 + n1), (rows, n2));
        let s = t1.tr_mul(&y1.tr_mul(&a2));
        a2.gemm(-1.0, &y1, &s, 1.0);
    }

    let (y2, t2) = recurse(w, r0 + n1, c0 + n1, n2, block_size);

    // T12 = -T1 (Y1^T [0; Y2]) T2
    let cross = y1.rows(n1, rows - n1).tr_mul(&y2);
    let t12 = -(&t1 * cross) * &t2;

    let mut y = DMatrix::zeros(rows, n);
    y.view_mut((0, 0), (rows, n1)).copy_from(&y1);
    y.view_mut((n1, n1), (rows - n1, n2)).copy_from(&y2);
    let mut t = DMatrix::zeros(n, n);
    t.view_mut((0, 0), (n1, n1)).copy_from(&t1);
    t.view_mut((0, n1), (n1, n2)).copy_from(&t12);
    t.view_mut((n1, n1), (n2, n2)).copy_from(&t2);
    (y, t)
}

/// Column-by-column Householder QR of `w[r0.., c0..c0+n]`, building `T`
/// one column at a time.
fn unblocked(w: &mut DMatrix<f64>, r0: usize, c0: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let rows = w.nrows() - r0;
    let mut y = DMatrix::zeros(rows, n);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let len = rows - j;
        let gamma = {
            let mut col = w.column_mut(c0 + j);
            let mut col = col.rows_range_mut(r0 + j..);
            let (gamma, rho) = householder_in_place(&mut col);
            y.view_mut((j, j), (len, 1)).copy_from(&col);
            col.fill(0.0);
            col[0] = rho;
            gamma
        };

        if j + 1 < n {
            let yj = y.view((j, j), (len, 1));
            let mut trail = w.view_mut((r0 + j, c0 + j + 1), (len, n - j - 1));
            let proj = trail.tr_mul(&yj);
            trail.gemm(-gamma, &yj, &proj.transpose(), 1.0);
        }

        if j > 0 {
            // T[:j, j] = -gamma T[:j, :j] (Y[:, :j]^T y_j)
            let z = y.view((j, 0), (len, j)).tr_mul(&y.view((j, j), (len, 1)));
            let col = t.view((0, 0), (j, j)) * z * (-gamma);
            t.view_mut((0, j), (j, 1)).copy_from(&col);
        }
        t[(j, j)] = gamma;
    }
    (y, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_q(wy: &DenseWy) -> DMatrix<f64> {
        let m = wy.rows();
        DMatrix::identity(m, m) - &wy.y * &wy.t * wy.y.transpose()
    }

    #[test]
    fn single_column() {
        let a = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let (wy, r) = block_qr(&a, 32).unwrap();
        assert_eq!(r[(0, 0)], -5.0);
        assert!((wy.y[(0, 0)] - 1.0).abs() < 1e-15 && (wy.y[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((wy.t[(0, 0)] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn identity_input() {
        let n = 40;
        let (wy, r) = block_qr(&DMatrix::identity(n, n), 8).unwrap();
        let q = reference_q(&wy);
        let e = (q.transpose() * &q - DMatrix::<f64>::identity(n, n)).norm();
        assert!(e <= n as f64 * f64::EPSILON, "{e}");
        for i in 0..n {
            assert!((r[(i, i)].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_wide() {
        assert!(block_qr(&DMatrix::zeros(2, 3), 32).is_err());
    }

    #[test]
    fn zero_column_is_skipped() {
        let mut a = DMatrix::from_fn(6, 3, |i, j| (i + 2 * j) as f64 + 1.0);
        a.column_mut(1).fill(0.0);
        a[(0, 2)] = 7.0;
        let (wy, r) = block_qr(&a, 1).unwrap();
        let back = wy.apply_q(&{
            let mut full = DMatrix::zeros(6, 3);
            full.rows_mut(0, 3).copy_from(&r);
            full
        });
        assert!((back - &a).norm() < 1e-13);
    }

    #[test]
    fn unit_lower_y_and_upper_t() {
        let a = DMatrix::from_fn(20, 11, |i, j| ((i * 13 + j * 7) as f64).cos());
        let (wy, _) = block_qr(&a, 4).unwrap();
        for j in 0..11 {
            assert_eq!(wy.y[(j, j)], 1.0);
            for i in 0..j {
                assert_eq!(wy.y[(i, j)], 0.0);
            }
            for i in j + 1..11 {
                assert_eq!(wy.t[(i, j)], 0.0);
            }
            assert!(wy.t[(j, j)] != 0.0);
        }
    }
}
