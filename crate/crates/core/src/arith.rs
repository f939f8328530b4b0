//! HODLR arithmetic with recompression: addition, low-rank update,
//! multiplication, transposition, Cholesky and triangular solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lowrank::{LowRankBlock, TruncationControl};
use crate::matrix::{Block, HodlrMatrix, Shape};

/// Exact `H v`.
pub fn matvec(h: &HodlrMatrix, v: &DVector<f64>) -> Result<DVector<f64>> {
    h.matvec(v)
}

/// `H1 + H2` with every off-diagonal sum recompressed.
pub fn add(h1: &HodlrMatrix, h2: &HodlrMatrix, tc: &TruncationControl) -> Result<HodlrMatrix> {
    if !h1.same_structure(h2) {
        return Err(Error::TreeMismatch { op: "add" });
    }
    Ok(add_rec(h1, h2, tc)?.with_shape_of(h1, h2))
}

fn add_rec(h1: &HodlrMatrix, h2: &HodlrMatrix, tc: &TruncationControl) -> Result<HodlrMatrix> {
    Ok(match (&h1.block, &h2.block) {
        (Block::Leaf(a), Block::Leaf(b)) => HodlrMatrix::leaf(a + b, Shape::General),
        (Block::Split(a), Block::Split(b)) => HodlrMatrix::join(
            add_rec(&a.a11, &b.a11, tc)?,
            a.a12.concat(&b.a12).truncate(tc)?,
            a.a21.concat(&b.a21).truncate(tc)?,
            add_rec(&a.a22, &b.a22, tc)?,
            Shape::General,
        ),
        _ => return Err(Error::TreeMismatch { op: "add" }),
    })
}

impl HodlrMatrix {
    /// Upper triangularity survives sums and products of upper triangular
    /// operands; everything else is general.
    fn with_shape_of(mut self, a: &HodlrMatrix, b: &HodlrMatrix) -> Self {
        if a.shape == Shape::UpperTriangular && b.shape == Shape::UpperTriangular {
            self.retag(Shape::UpperTriangular);
        }
        self
    }

    fn retag(&mut self, shape: Shape) {
        self.shape = shape;
        if let Block::Split(s) = &mut self.block {
            s.a11.retag(shape);
            s.a22.retag(shape);
        }
    }
}

/// `H + U V^T`, with each block receiving its row/column slice of the update.
pub fn low_rank_update(
    h: &HodlrMatrix,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    tc: &TruncationControl,
) -> Result<HodlrMatrix> {
    if u.nrows() != h.rows() || v.nrows() != h.cols() || u.ncols() != v.ncols() {
        return Err(Error::dims(
            "low_rank_update",
            format!("U {}xp, V {}xp", h.rows(), h.cols()),
            format!("U {}x{}, V {}x{}", u.nrows(), u.ncols(), v.nrows(), v.ncols()),
        ));
    }
    if u.ncols() == 0 {
        return Ok(h.clone());
    }
    update_rec(h, u, v, tc)
}

fn update_rec(h: &HodlrMatrix, u: &DMatrix<f64>, v: &DMatrix<f64>, tc: &TruncationControl) -> Result<HodlrMatrix> {
    Ok(match &h.block {
        Block::Leaf(m) => {
            let mut out = m.clone();
            out.gemm(1.0, u, &v.transpose(), 1.0);
            HodlrMatrix::leaf(out, Shape::General)
        }
        Block::Split(s) => {
            let (m1, n1) = (s.a11.rows(), s.a11.cols());
            let (m2, n2) = (s.a22.rows(), s.a22.cols());
            let (u1, u2) = (u.rows(0, m1).clone_owned(), u.rows(m1, m2).clone_owned());
            let (v1, v2) = (v.rows(0, n1).clone_owned(), v.rows(n1, n2).clone_owned());
            HodlrMatrix::join(
                update_rec(&s.a11, &u1, &v1, tc)?,
                s.a12.concat(&LowRankBlock::new(u1.clone(), v2.transpose())).truncate(tc)?,
                s.a21.concat(&LowRankBlock::new(u2.clone(), v1.transpose())).truncate(tc)?,
                update_rec(&s.a22, &u2, &v2, tc)?,
                Shape::General,
            )
        }
    })
}

/// `H1 H2` by 2x2 block recursion.
///
/// Products of a low-rank block with a HODLR block are formed by applying
/// the HODLR block to the factor columns; every sum of two contributions is
/// recompressed immediately.
pub fn multiply(h1: &HodlrMatrix, h2: &HodlrMatrix, tc: &TruncationControl) -> Result<HodlrMatrix> {
    if h1.col_leaf_sizes() != h2.row_leaf_sizes() {
        return Err(Error::TreeMismatch { op: "multiply" });
    }
    Ok(mul_rec(h1, h2, tc)?.with_shape_of(h1, h2))
}

fn mul_rec(a: &HodlrMatrix, b: &HodlrMatrix, tc: &TruncationControl) -> Result<HodlrMatrix> {
    Ok(match (&a.block, &b.block) {
        (Block::Leaf(x), Block::Leaf(y)) => HodlrMatrix::leaf(x * y, Shape::General),
        (Block::Split(a), Block::Split(b)) => {
            // C11 = A11 B11 + A12 B21
            let (l, r) = lowrank_product(&a.a12, &b.a21);
            let c11 = low_rank_update(&mul_rec(&a.a11, &b.a11, tc)?, &l, &r.transpose(), tc)?;
            // C22 = A21 B12 + A22 B22
            let (l, r) = lowrank_product(&a.a21, &b.a12);
            let c22 = low_rank_update(&mul_rec(&a.a22, &b.a22, tc)?, &l, &r.transpose(), tc)?;
            // C12 = A11 B12 + A12 B22
            let c12 = hodlr_times_lowrank(&a.a11, &b.a12)
                .concat(&lowrank_times_hodlr(&a.a12, &b.a22))
                .truncate(tc)?;
            // C21 = A21 B11 + A22 B21
            let c21 = lowrank_times_hodlr(&a.a21, &b.a11)
                .concat(&hodlr_times_lowrank(&a.a22, &b.a21))
                .truncate(tc)?;
            HodlrMatrix::join(c11, c12, c21, c22, Shape::General)
        }
        _ => return Err(Error::TreeMismatch { op: "multiply" }),
    })
}

/// `(L1 R1)(L2 R2) = L1 ((R1 L2) R2)` as a factor pair.
fn lowrank_product(x: &LowRankBlock, y: &LowRankBlock) -> (DMatrix<f64>, DMatrix<f64>) {
    let inner = &x.r * &y.l;
    if x.rank() <= y.rank() {
        (x.l.clone(), inner * &y.r)
    } else {
        (&x.l * inner, y.r.clone())
    }
}

/// `H (L R) = (H L) R`
fn hodlr_times_lowrank(h: &HodlrMatrix, b: &LowRankBlock) -> LowRankBlock {
    if b.rank() == 0 {
        return LowRankBlock::zeros(h.rows(), b.cols());
    }
    LowRankBlock::new(h.apply(&b.l), b.r.clone())
}

/// `(L R) H = L (H^T R^T)^T`
fn lowrank_times_hodlr(b: &LowRankBlock, h: &HodlrMatrix) -> LowRankBlock {
    if b.rank() == 0 {
        return LowRankBlock::zeros(b.rows(), h.cols());
    }
    let r = h.apply_transpose(&b.r.transpose()).transpose();
    LowRankBlock {
        l: b.l.clone(),
        r,
        left_orthogonal: b.left_orthogonal,
    }
}

/// Structural transpose: leaves are transposed and the off-diagonal factors
/// trade places.
pub fn transpose(h: &HodlrMatrix) -> HodlrMatrix {
    let shape = match h.shape {
        Shape::UnitLowerTriangular => Shape::UpperTriangular,
        _ => Shape::General,
    };
    transpose_rec(h, shape)
}

fn transpose_rec(h: &HodlrMatrix, shape: Shape) -> HodlrMatrix {
    match &h.block {
        Block::Leaf(m) => HodlrMatrix::leaf(m.transpose(), shape),
        Block::Split(s) => HodlrMatrix::join(
            transpose_rec(&s.a11, shape),
            s.a21.transpose(),
            s.a12.transpose(),
            transpose_rec(&s.a22, shape),
            shape,
        ),
    }
}

/// Upper triangular `R` with `R^T R ~ H` for symmetric positive definite `H`.
///
/// Only the diagonal leaves and the upper off-diagonal blocks of `H` are
/// read. A nonpositive pivot in a leaf aborts with
/// [`Error::CholeskyBreakdown`].
pub fn cholesky(h: &HodlrMatrix, tc: &TruncationControl) -> Result<HodlrMatrix> {
    if h.row_leaf_sizes() != h.col_leaf_sizes() {
        return Err(Error::dims("cholesky", "a square partition", format!("{}x{}", h.rows(), h.cols())));
    }
    let mut r = chol_rec(h, tc, 0)?;
    r.retag(Shape::UpperTriangular);
    Ok(r)
}

fn chol_rec(h: &HodlrMatrix, tc: &TruncationControl, leaf0: usize) -> Result<HodlrMatrix> {
    match &h.block {
        Block::Leaf(m) => Ok(HodlrMatrix::leaf(dense_cholesky_upper(m, leaf0)?, Shape::UpperTriangular)),
        Block::Split(s) => {
            let r11 = chol_rec(&s.a11, tc, leaf0)?;
            // R12 = R11^{-T} H12 = (R11^{-T} L) R
            let l = upper_transpose_solve_rec(&r11, &s.a12.l, leaf0)?;
            let r12 = LowRankBlock::new(l, s.a12.r.clone()).truncate(tc)?;
            // H22 - R12^T R12 = H22 - R^T (L'^T L') R
            let gram = r12.l.tr_mul(&r12.l);
            let rt = r12.r.transpose();
            let u = -(&rt * gram);
            let schur = low_rank_update(&s.a22, &u, &rt, tc)?;
            let r22 = chol_rec(&schur, tc, leaf0 + s.a11.leaf_count())?;
            let a21 = LowRankBlock::zeros(r22.rows(), r11.cols());
            Ok(HodlrMatrix::join(r11, r12, a21, r22, Shape::UpperTriangular))
        }
    }
}

/// Upper Cholesky factor of a dense symmetric block, reading its upper
/// triangle.
fn dense_cholesky_upper(a: &DMatrix<f64>, leaf: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= r[(k, j)] * r[(k, j)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::CholeskyBreakdown { leaf, index: j, pivot: d });
        }
        let rjj = d.sqrt();
        r[(j, j)] = rjj;
        for i in j + 1..n {
            let mut s = a[(j, i)];
            for k in 0..j {
                s -= r[(k, j)] * r[(k, i)];
            }
            r[(j, i)] = s / rjj;
        }
    }
    Ok(r)
}

/// Solves `R Z = X` for upper triangular HODLR `R` and dense `X`.
pub fn upper_solve_dense(r: &HodlrMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != r.rows() || r.rows() != r.cols() {
        return Err(Error::dims("upper_solve_dense", r.rows(), x.nrows()));
    }
    upper_solve_rec(r, x, 0)
}

fn upper_solve_rec(r: &HodlrMatrix, x: &DMatrix<f64>, leaf0: usize) -> Result<DMatrix<f64>> {
    match &r.block {
        Block::Leaf(m) => {
            check_diagonal(m, leaf0)?;
            Ok(m.solve_upper_triangular(x).ok_or(Error::SingularLeaf { leaf: leaf0, index: 0 })?)
        }
        Block::Split(s) => {
            let n1 = s.a11.rows();
            let n2 = s.a22.rows();
            let z2 = upper_solve_rec(&s.a22, &x.rows(n1, n2).clone_owned(), leaf0 + s.a11.leaf_count())?;
            let mut x1 = x.rows(0, n1).clone_owned();
            if s.a12.rank() > 0 {
                x1.gemm(-1.0, &s.a12.l, &(&s.a12.r * &z2), 1.0);
            }
            let z1 = upper_solve_rec(&s.a11, &x1, leaf0)?;
            let mut z = DMatrix::zeros(n1 + n2, x.ncols());
            z.rows_mut(0, n1).copy_from(&z1);
            z.rows_mut(n1, n2).copy_from(&z2);
            Ok(z)
        }
    }
}

/// Solves `R^T Z = X` for upper triangular HODLR `R` and dense `X`.
pub fn upper_transpose_solve_dense(r: &HodlrMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != r.rows() || r.rows() != r.cols() {
        return Err(Error::dims("upper_transpose_solve_dense", r.rows(), x.nrows()));
    }
    upper_transpose_solve_rec(r, x, 0)
}

fn upper_transpose_solve_rec(r: &HodlrMatrix, x: &DMatrix<f64>, leaf0: usize) -> Result<DMatrix<f64>> {
    match &r.block {
        Block::Leaf(m) => {
            check_diagonal(m, leaf0)?;
            Ok(m.tr_solve_upper_triangular(x).ok_or(Error::SingularLeaf { leaf: leaf0, index: 0 })?)
        }
        Block::Split(s) => {
            let n1 = s.a11.rows();
            let n2 = s.a22.rows();
            let z1 = upper_transpose_solve_rec(&s.a11, &x.rows(0, n1).clone_owned(), leaf0)?;
            let mut x2 = x.rows(n1, n2).clone_owned();
            if s.a12.rank() > 0 {
                // R12^T Z1 = R^T (L^T Z1)
                x2.gemm_tr(-1.0, &s.a12.r, &s.a12.l.tr_mul(&z1), 1.0);
            }
            let z2 = upper_transpose_solve_rec(&s.a22, &x2, leaf0 + s.a11.leaf_count())?;
            let mut z = DMatrix::zeros(n1 + n2, x.ncols());
            z.rows_mut(0, n1).copy_from(&z1);
            z.rows_mut(n1, n2).copy_from(&z2);
            Ok(z)
        }
    }
}

fn check_diagonal(m: &DMatrix<f64>, leaf: usize) -> Result<()> {
    match (0..m.nrows()).find(|&i| m[(i, i)] == 0.0) {
        Some(index) => Err(Error::SingularLeaf { leaf, index }),
        None => Ok(()),
    }
}

/// `X ~ B R^{-1}` for upper triangular `R` by block forward substitution.
pub fn solve_upper_triangular_right(
    b: &HodlrMatrix,
    r: &HodlrMatrix,
    tc: &TruncationControl,
) -> Result<HodlrMatrix> {
    if b.col_leaf_sizes() != r.row_leaf_sizes() || r.row_leaf_sizes() != r.col_leaf_sizes() {
        return Err(Error::TreeMismatch { op: "solve_upper_triangular_right" });
    }
    solve_right_rec(b, r, tc, 0)
}

fn solve_right_rec(b: &HodlrMatrix, r: &HodlrMatrix, tc: &TruncationControl, leaf0: usize) -> Result<HodlrMatrix> {
    match (&b.block, &r.block) {
        (Block::Leaf(bm), Block::Leaf(rm)) => {
            check_diagonal(rm, leaf0)?;
            // X R = B  <=>  R^T X^T = B^T
            let xt = rm
                .tr_solve_upper_triangular(&bm.transpose())
                .ok_or(Error::SingularLeaf { leaf: leaf0, index: 0 })?;
            Ok(HodlrMatrix::leaf(xt.transpose(), Shape::General))
        }
        (Block::Split(bs), Block::Split(rs)) => {
            let leaf2 = leaf0 + rs.a11.leaf_count();
            // X11 R11 = B11
            let x11 = solve_right_rec(&bs.a11, &rs.a11, tc, leaf0)?;
            // X21 R11 = B21  =>  X21 = L (R R11^{-1})
            let x21 = right_solve_lowrank(&bs.a21, &rs.a11, leaf0)?.truncate(tc)?;
            // X12 R22 = B12 - X11 R12
            let rhs12 = bs.a12.concat(&hodlr_times_lowrank(&x11, &rs.a12).scaled(-1.0)).truncate(tc)?;
            let x12 = right_solve_lowrank(&rhs12, &rs.a22, leaf2)?.truncate(tc)?;
            // X22 R22 = B22 - X21 R12
            let rhs22 = if x21.rank() > 0 && rs.a12.rank() > 0 {
                let u = -(&x21.l * (&x21.r * &rs.a12.l));
                low_rank_update(&bs.a22, &u, &rs.a12.r.transpose(), tc)?
            } else {
                bs.a22.clone()
            };
            let x22 = solve_right_rec(&rhs22, &rs.a22, tc, leaf2)?;
            Ok(HodlrMatrix::join(x11, x12, x21, x22, Shape::General))
        }
        _ => Err(Error::TreeMismatch { op: "solve_upper_triangular_right" }),
    }
}

/// `(L R) S^{-1} = L (S^{-T} R^T)^T`
fn right_solve_lowrank(b: &LowRankBlock, s: &HodlrMatrix, leaf0: usize) -> Result<LowRankBlock> {
    if b.rank() == 0 {
        return Ok(LowRankBlock::zeros(b.rows(), s.cols()));
    }
    let r = upper_transpose_solve_rec(s, &b.r.transpose(), leaf0)?.transpose();
    Ok(LowRankBlock {
        l: b.l.clone(),
        r,
        left_orthogonal: b.left_orthogonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionTree;

    fn smooth(n: usize, shift: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            let d = i as f64 - j as f64;
            1.0 / (1.0 + (d + shift).abs()) + if i == j { 4.0 } else { 0.0 }
        })
    }

    fn hodlr(m: &DMatrix<f64>, n_min: usize) -> HodlrMatrix {
        HodlrMatrix::from_dense(m, &PartitionTree::balanced(m.nrows(), n_min), &TruncationControl::new(1e-13)).unwrap()
    }

    #[test]
    fn add_negation_cancels() {
        let h = hodlr(&smooth(32, 0.5), 8);
        let z = add(&h, &h.scaled(-1.0), &TruncationControl::new(1e-14)).unwrap();
        assert_eq!(z.stats().max_offdiag_rank, 0);
        assert!(z.to_dense().norm() < 1e-14);
    }

    #[test]
    fn add_rejects_tree_mismatch() {
        let a = hodlr(&smooth(32, 0.0), 8);
        let b = hodlr(&smooth(32, 0.0), 16);
        assert!(matches!(add(&a, &b, &TruncationControl::exact()), Err(Error::TreeMismatch { .. })));
    }

    #[test]
    fn zero_update_is_identity_map() {
        let h = hodlr(&smooth(24, 0.3), 6);
        let z = DMatrix::zeros(24, 0);
        assert_eq!(low_rank_update(&h, &z, &z, &TruncationControl::exact()).unwrap(), h);
        assert!(low_rank_update(&h, &DMatrix::zeros(3, 1), &DMatrix::zeros(24, 1), &TruncationControl::exact()).is_err());
    }

    #[test]
    fn canceling_update_kills_block() {
        let h = hodlr(&smooth(32, 0.2), 16);
        let s = h.as_split().unwrap();
        // Subtract the a12 block exactly: U = [-L; 0], V = [0; R^T].
        let k = s.a12.rank();
        let mut u = DMatrix::zeros(32, k);
        u.rows_mut(0, 16).copy_from(&(-&s.a12.l));
        let mut v = DMatrix::zeros(32, k);
        v.rows_mut(16, 16).copy_from(&s.a12.r.transpose());
        let out = low_rank_update(&h, &u, &v, &TruncationControl::new(1e-12)).unwrap();
        assert_eq!(out.as_split().unwrap().a12.rank(), 0);
    }

    #[test]
    fn identity_times_h() {
        let h = hodlr(&smooth(32, 0.7), 8);
        let id = HodlrMatrix::identity(&PartitionTree::balanced(32, 8));
        let p = multiply(&h, &id, &TruncationControl::new(1e-13)).unwrap();
        assert!((p.to_dense() - h.to_dense()).norm() < 1e-12);
        assert_eq!(p.stats().max_offdiag_rank, h.stats().max_offdiag_rank);
    }

    #[test]
    fn block_diagonal_product_stays_block_diagonal() {
        let tree = PartitionTree::balanced(16, 4);
        let d = HodlrMatrix::identity(&tree).scaled(2.0);
        let p = multiply(&d, &d, &TruncationControl::exact()).unwrap();
        assert_eq!(p.stats().max_offdiag_rank, 0);
        assert_eq!(p.to_dense(), DMatrix::identity(16, 16) * 4.0);
    }

    #[test]
    fn transpose_involution_and_symmetry() {
        let h = hodlr(&smooth(40, 0.4), 10);
        let tt = transpose(&transpose(&h));
        assert_eq!(tt.to_dense(), h.to_dense());
        let sym = hodlr(&smooth(40, 0.0), 10);
        assert!((transpose(&sym).to_dense() - sym.to_dense().transpose()).norm() == 0.0);
    }

    #[test]
    fn cholesky_small_cases() {
        let tree = PartitionTree::balanced(12, 3);
        let id = HodlrMatrix::identity(&tree);
        let r = cholesky(&id, &TruncationControl::exact()).unwrap();
        assert_eq!(r.to_dense(), DMatrix::identity(12, 12));
        assert!(r.satisfies(Shape::UpperTriangular));

        let leaf = HodlrMatrix::leaf(DMatrix::from_diagonal_element(3, 3, 4.0), Shape::General);
        assert_eq!(cholesky(&leaf, &TruncationControl::exact()).unwrap().to_dense(), DMatrix::from_diagonal_element(3, 3, 2.0));
    }

    #[test]
    fn cholesky_reports_breakdown_location() {
        let mut m = DMatrix::identity(8, 8);
        m[(5, 5)] = -1.0;
        let h = hodlr(&m, 2);
        match cholesky(&h, &TruncationControl::exact()) {
            Err(Error::CholeskyBreakdown { leaf, index, pivot }) => {
                assert_eq!((leaf, index), (2, 1));
                assert_eq!(pivot, -1.0);
            }
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_right_solve_scales_columns() {
        let tree = PartitionTree::balanced(16, 4);
        let d: Vec<f64> = (1..=16).map(|i| i as f64).collect();
        let r = HodlrMatrix::from_dense(&DMatrix::from_diagonal(&DVector::from_vec(d.clone())), &tree, &TruncationControl::exact())
            .unwrap()
            .with_shape(Shape::UpperTriangular)
            .unwrap();
        let b = hodlr(&smooth(16, 0.1), 4);
        let x = solve_upper_triangular_right(&b, &r, &TruncationControl::new(1e-14)).unwrap();
        let mut want = b.to_dense();
        for (j, mut col) in want.column_iter_mut().enumerate() {
            col /= d[j];
        }
        assert!((x.to_dense() - want).norm() < 1e-13);

        let id = HodlrMatrix::identity(&tree);
        let same = solve_upper_triangular_right(&b, &id, &TruncationControl::new(1e-14)).unwrap();
        assert!((same.to_dense() - b.to_dense()).norm() < 1e-13);
    }

    #[test]
    fn singular_leaf_detected() {
        let mut m = DMatrix::identity(8, 8);
        m[(6, 6)] = 0.0;
        let r = hodlr(&m, 4).with_shape(Shape::UpperTriangular).unwrap();
        let b = hodlr(&DMatrix::identity(8, 8), 4);
        assert!(matches!(
            solve_upper_triangular_right(&b, &r, &TruncationControl::exact()),
            Err(Error::SingularLeaf { leaf: 1, index: 2 })
        ));
        assert!(matches!(upper_solve_dense(&r, &DMatrix::identity(8, 1)), Err(Error::SingularLeaf { leaf: 1, index: 2 })));
    }
}
