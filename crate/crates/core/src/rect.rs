//! Permuted QR of rectangular HODLR matrices: a dense reduction in the
//! permuted triangular layout followed by compression of the factors.

use nalgebra::DMatrix;

use crate::dense::two_norm;
use crate::error::{Error, Result};
use crate::lowrank::TruncationControl;
use crate::matrix::{Block, HodlrMatrix, Shape};
use crate::partition::PartitionTree;
use crate::wy::{block_qr, DEFAULT_BLOCK_SIZE};

/// `A = (I - Y T Y^T) R` where `Y` and `R` are `m x n` HODLR matrices in
/// permuted trapezoidal/triangular form and `T` is `n x n` upper triangular.
///
/// Row `perm[i]` of `R` is row `i` of the upper triangular `[R_tri; 0]`.
#[derive(Clone, Debug)]
pub struct RectQrFactors {
    pub y: HodlrMatrix,
    pub t: HodlrMatrix,
    pub r: HodlrMatrix,
    pub perm: Vec<usize>,
}

impl RectQrFactors {
    pub fn rows(&self) -> usize {
        self.y.rows()
    }

    /// `Q M = M - Y (T (Y^T M))`
    pub fn apply_q(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.rows() {
            return Err(Error::dims("RectQrFactors::apply_q", self.rows(), m.nrows()));
        }
        Ok(m - self.y.apply(&self.t.apply(&self.y.apply_transpose(m))))
    }

    /// `Q^T M = M - Y (T^T (Y^T M))`
    pub fn apply_q_transpose(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.rows() {
            return Err(Error::dims("RectQrFactors::apply_q_transpose", self.rows(), m.nrows()));
        }
        Ok(m - self.y.apply(&self.t.apply_transpose(&self.y.apply_transpose(m))))
    }

    /// Rows of the dense `R` reordered by `perm`.
    pub fn permuted_r(&self) -> DMatrix<f64> {
        let r = self.r.to_dense();
        DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(self.perm[i], j)])
    }
}

/// Dense permuted reduction of `a` on the given partitions, then
/// compression of `Y` and `T` at `eps` and of `R` at `eps * ||A||_2`.
///
/// Block column `j` is reduced so its `n_j x n_j` triangle occupies the
/// first `n_j` rows of diagonal block `j`; every other unreduced row of the
/// block column becomes zero.
pub fn rect_qr_prototype(
    a: &DMatrix<f64>,
    row_tree: &PartitionTree,
    col_tree: &PartitionTree,
    eps: f64,
) -> Result<RectQrFactors> {
    let (m, n) = a.shape();
    if row_tree.level() != col_tree.level() {
        return Err(Error::TreeMismatch { op: "rect_qr_prototype" });
    }
    if row_tree.size() != m || col_tree.size() != n {
        return Err(Error::dims(
            "rect_qr_prototype",
            format!("{}x{}", row_tree.size(), col_tree.size()),
            format!("{m}x{n}"),
        ));
    }
    let (rows, cols) = (row_tree.leaf_sizes(), col_tree.leaf_sizes());
    if let Some(j) = (0..rows.len()).find(|&j| rows[j] < cols[j]) {
        return Err(Error::dims("rect_qr_prototype", format!("block {j} with at least {} rows", cols[j]), rows[j]));
    }

    let mut w = a.clone();
    let mut y = DMatrix::<f64>::zeros(m, n);
    let mut t = DMatrix::<f64>::zeros(n, n);
    let mut triangle = vec![false; m];
    let mut used = vec![false; m];
    let (mut r0, mut c0) = (0, 0);
    for (&mj, &nj) in rows.iter().zip(cols) {
        let tri: Vec<usize> = (r0..r0 + nj).collect();
        let order: Vec<usize> = tri.iter().copied().chain((0..m).filter(|&i| !used[i] && !(r0..r0 + nj).contains(&i))).collect();

        let panel = gather_rows(&w, &order, c0, nj);
        let (wy, rj) = block_qr(&panel, DEFAULT_BLOCK_SIZE)?;
        if c0 + nj < n {
            let trail = gather_rows(&w, &order, c0 + nj, n - c0 - nj);
            scatter_rows(&mut w, &order, c0 + nj, &wy.apply_qt(&trail));
        }
        for &i in &order {
            w.view_mut((i, c0), (1, nj)).fill(0.0);
        }
        w.view_mut((r0, c0), (nj, nj)).copy_from(&rj);
        scatter_rows(&mut y, &order, c0, &wy.y);

        // T12 = -T_prev (Y_prev^T Y_j) T_j
        if c0 > 0 {
            let cross = y.columns(0, c0).tr_mul(&y.columns(c0, nj));
            let t12 = -(t.view((0, 0), (c0, c0)) * cross) * &wy.t;
            t.view_mut((0, c0), (c0, nj)).copy_from(&t12);
        }
        t.view_mut((c0, c0), (nj, nj)).copy_from(&wy.t);

        for &i in &tri {
            triangle[i] = true;
            used[i] = true;
        }
        r0 += mj;
        c0 += nj;
    }

    let norm = two_norm(a)?;
    let tc = TruncationControl::new(eps);
    let y_h = HodlrMatrix::from_dense_rect(&y, row_tree, col_tree, &tc)?;
    let t_h = HodlrMatrix::from_dense(&t, col_tree, &tc)?.with_shape(Shape::UpperTriangular)?;
    let mut r_h = HodlrMatrix::from_dense_rect(&w, row_tree, col_tree, &TruncationControl::new(eps * norm))?;
    zero_off_triangle_rows(&mut r_h, &triangle, 0);

    let perm: Vec<usize> = (0..m).filter(|&i| triangle[i]).chain((0..m).filter(|&i| !triangle[i])).collect();
    Ok(RectQrFactors {
        y: y_h,
        t: t_h,
        r: r_h,
        perm,
    })
}

fn gather_rows(w: &DMatrix<f64>, order: &[usize], c0: usize, nc: usize) -> DMatrix<f64> {
    DMatrix::from_fn(order.len(), nc, |i, j| w[(order[i], c0 + j)])
}

fn scatter_rows(w: &mut DMatrix<f64>, order: &[usize], c0: usize, src: &DMatrix<f64>) {
    for (k, &i) in order.iter().enumerate() {
        for j in 0..src.ncols() {
            w[(i, c0 + j)] = src[(k, j)];
        }
    }
}

/// `R` vanishes outside the triangle rows; the SVD-based compression leaves
/// roundoff there in the upper off-diagonal factors, which is removed here.
fn zero_off_triangle_rows(h: &mut HodlrMatrix, triangle: &[bool], row0: usize) {
    if let Block::Split(s) = &mut h.block {
        let m1 = s.a11.rows();
        for i in 0..m1 {
            if !triangle[row0 + i] {
                s.a12.l.row_mut(i).fill(0.0);
            }
        }
        zero_off_triangle_rows(&mut s.a11, triangle, row0);
        zero_off_triangle_rows(&mut s.a22, triangle, row0 + m1);
    }
}
