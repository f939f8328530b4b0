//! The recursive HODLR matrix type.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::error::{Error, Result};
use crate::lowrank::{LowRankBlock, TruncationControl};
use crate::partition::PartitionTree;

/// Triangular structure carried by a HODLR matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    General,
    /// Every lower off-diagonal block has rank 0 and every leaf is upper
    /// triangular.
    UpperTriangular,
    /// Every upper off-diagonal block has rank 0 and every leaf is unit lower
    /// triangular (lower trapezoidal for tall leaves).
    UnitLowerTriangular,
}

/// A HODLR matrix: a dense leaf, or a 2x2 block split with HODLR diagonal
/// blocks and factorized off-diagonal blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct HodlrMatrix {
    pub shape: Shape,
    pub block: Block,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Leaf(DMatrix<f64>),
    Split(Box<Split>),
}

/// `[a11 a12; a21 a22]`
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub a11: HodlrMatrix,
    pub a12: LowRankBlock,
    pub a21: LowRankBlock,
    pub a22: HodlrMatrix,
}

/// Rank and storage summary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub max_offdiag_rank: usize,
    /// Leaf entries plus `k (n_L + n_R)` per off-diagonal block.
    pub memory_scalars: usize,
}

impl HodlrMatrix {
    pub fn leaf(m: DMatrix<f64>, shape: Shape) -> Self {
        Self {
            shape,
            block: Block::Leaf(m),
        }
    }

    /// Assembles a split node, checking that the four blocks fit together.
    pub fn node(
        a11: HodlrMatrix,
        a12: LowRankBlock,
        a21: LowRankBlock,
        a22: HodlrMatrix,
        shape: Shape,
    ) -> Result<Self> {
        let (m1, n1) = (a11.rows(), a11.cols());
        let (m2, n2) = (a22.rows(), a22.cols());
        if a12.rows() != m1 || a12.cols() != n2 {
            return Err(Error::dims("HodlrMatrix::node", format!("a12 {m1}x{n2}"), format!("{}x{}", a12.rows(), a12.cols())));
        }
        if a21.rows() != m2 || a21.cols() != n1 {
            return Err(Error::dims("HodlrMatrix::node", format!("a21 {m2}x{n1}"), format!("{}x{}", a21.rows(), a21.cols())));
        }
        Ok(Self::join(a11, a12, a21, a22, shape))
    }

    pub(crate) fn join(
        a11: HodlrMatrix,
        a12: LowRankBlock,
        a21: LowRankBlock,
        a22: HodlrMatrix,
        shape: Shape,
    ) -> Self {
        debug_assert_eq!(a12.rows(), a11.rows());
        debug_assert_eq!(a12.cols(), a22.cols());
        debug_assert_eq!(a21.rows(), a22.rows());
        debug_assert_eq!(a21.cols(), a11.cols());
        Self {
            shape,
            block: Block::Split(Box::new(Split { a11, a12, a21, a22 })),
        }
    }

    pub fn rows(&self) -> usize {
        match &self.block {
            Block::Leaf(m) => m.nrows(),
            Block::Split(s) => s.a11.rows() + s.a22.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match &self.block {
            Block::Leaf(m) => m.ncols(),
            Block::Split(s) => s.a11.cols() + s.a22.cols(),
        }
    }

    pub fn level(&self) -> u32 {
        match &self.block {
            Block::Leaf(_) => 0,
            Block::Split(s) => 1 + s.a11.level().max(s.a22.level()),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.block, Block::Leaf(_))
    }

    pub fn as_split(&self) -> Option<&Split> {
        match &self.block {
            Block::Split(s) => Some(s),
            Block::Leaf(_) => None,
        }
    }

    pub fn row_leaf_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |m| out.push(m.nrows()));
        out
    }

    pub fn col_leaf_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |m| out.push(m.ncols()));
        out
    }

    /// Row partition; fails for unbalanced trees.
    pub fn row_tree(&self) -> Result<PartitionTree> {
        PartitionTree::from_leaf_sizes(self.row_leaf_sizes())
    }

    pub fn col_tree(&self) -> Result<PartitionTree> {
        PartitionTree::from_leaf_sizes(self.col_leaf_sizes())
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.visit_leaves(&mut |_| n += 1);
        n
    }

    fn visit_leaves(&self, f: &mut impl FnMut(&DMatrix<f64>)) {
        match &self.block {
            Block::Leaf(m) => f(m),
            Block::Split(s) => {
                s.a11.visit_leaves(f);
                s.a22.visit_leaves(f);
            }
        }
    }

    /// Whether both matrices have identical block partitions.
    pub fn same_structure(&self, other: &HodlrMatrix) -> bool {
        match (&self.block, &other.block) {
            (Block::Leaf(a), Block::Leaf(b)) => a.shape() == b.shape(),
            (Block::Split(a), Block::Split(b)) => {
                a.a11.same_structure(&b.a11) && a.a22.same_structure(&b.a22)
            }
            _ => false,
        }
    }

    /// Square identity on the given partition.
    pub fn identity(tree: &PartitionTree) -> Self {
        Self::filled(tree.leaf_sizes(), tree.leaf_sizes(), &|r, _| DMatrix::identity(r, r), Shape::UpperTriangular)
            .with_shape_unchecked(Shape::General)
    }

    pub fn zeros(row_tree: &PartitionTree, col_tree: &PartitionTree) -> Result<Self> {
        check_levels(row_tree, col_tree)?;
        Ok(Self::filled(row_tree.leaf_sizes(), col_tree.leaf_sizes(), &|r, c| DMatrix::zeros(r, c), Shape::General))
    }

    fn filled(
        rows: &[usize],
        cols: &[usize],
        leaf: &dyn Fn(usize, usize) -> DMatrix<f64>,
        shape: Shape,
    ) -> Self {
        if rows.len() == 1 {
            return Self::leaf(leaf(rows[0], cols[0]), shape);
        }
        let h = rows.len() / 2;
        let (m1, m2): (usize, usize) = (rows[..h].iter().sum(), rows[h..].iter().sum());
        let (n1, n2): (usize, usize) = (cols[..h].iter().sum(), cols[h..].iter().sum());
        Self::join(
            Self::filled(&rows[..h], &cols[..h], leaf, shape),
            LowRankBlock::zeros(m1, n2),
            LowRankBlock::zeros(m2, n1),
            Self::filled(&rows[h..], &cols[h..], leaf, shape),
            shape,
        )
    }

    fn with_shape_unchecked(mut self, shape: Shape) -> Self {
        self.set_shape(shape);
        self
    }

    fn set_shape(&mut self, shape: Shape) {
        self.shape = shape;
        if let Block::Split(s) = &mut self.block {
            s.a11.set_shape(shape);
            s.a22.set_shape(shape);
        }
    }

    /// Retags the matrix after checking the triangular structure by traversal.
    pub fn with_shape(mut self, shape: Shape) -> Result<Self> {
        if !self.satisfies(shape) {
            return Err(Error::dims("HodlrMatrix::with_shape", format!("{shape:?} structure"), "a violating block"));
        }
        self.set_shape(shape);
        Ok(self)
    }

    /// Checks the structural conditions implied by `shape`.
    pub fn satisfies(&self, shape: Shape) -> bool {
        match &self.block {
            Block::Leaf(m) => match shape {
                Shape::General => true,
                Shape::UpperTriangular => (0..m.ncols()).all(|j| (j + 1..m.nrows()).all(|i| m[(i, j)] == 0.0)),
                Shape::UnitLowerTriangular => (0..m.ncols()).all(|j| {
                    (j >= m.nrows() || m[(j, j)] == 1.0) && (0..j.min(m.nrows())).all(|i| m[(i, j)] == 0.0)
                }),
            },
            Block::Split(s) => {
                let blocks_ok = match shape {
                    Shape::General => true,
                    Shape::UpperTriangular => s.a21.rank() == 0,
                    Shape::UnitLowerTriangular => s.a12.rank() == 0,
                };
                blocks_ok && s.a11.satisfies(shape) && s.a22.satisfies(shape)
            }
        }
    }

    /// Compresses a dense square matrix on `tree`, truncating every
    /// off-diagonal block with `tc`.
    pub fn from_dense(m: &DMatrix<f64>, tree: &PartitionTree, tc: &TruncationControl) -> Result<Self> {
        Self::from_dense_rect(m, tree, tree, tc)
    }

    /// Rectangular variant with separate row and column partitions of equal
    /// level.
    pub fn from_dense_rect(
        m: &DMatrix<f64>,
        row_tree: &PartitionTree,
        col_tree: &PartitionTree,
        tc: &TruncationControl,
    ) -> Result<Self> {
        check_levels(row_tree, col_tree)?;
        if m.nrows() != row_tree.size() || m.ncols() != col_tree.size() {
            return Err(Error::dims(
                "HodlrMatrix::from_dense",
                format!("{}x{}", row_tree.size(), col_tree.size()),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        build(m.as_view(), row_tree.leaf_sizes(), col_tree.leaf_sizes(), tc)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        self.write_dense(&mut out.as_view_mut());
        out
    }

    fn write_dense(&self, out: &mut DMatrixViewMut<'_, f64>) {
        match &self.block {
            Block::Leaf(m) => out.copy_from(m),
            Block::Split(s) => {
                let (m1, n1) = (s.a11.rows(), s.a11.cols());
                let (m2, n2) = (s.a22.rows(), s.a22.cols());
                s.a11.write_dense(&mut out.view_mut((0, 0), (m1, n1)));
                s.a22.write_dense(&mut out.view_mut((m1, n1), (m2, n2)));
                out.view_mut((0, n1), (m1, n2)).gemm(1.0, &s.a12.l, &s.a12.r, 0.0);
                out.view_mut((m1, 0), (m2, n1)).gemm(1.0, &s.a21.l, &s.a21.r, 0.0);
            }
        }
    }

    pub fn stats(&self) -> Stats {
        match &self.block {
            Block::Leaf(m) => Stats {
                max_offdiag_rank: 0,
                memory_scalars: m.len(),
            },
            Block::Split(s) => {
                let (a, b) = (s.a11.stats(), s.a22.stats());
                Stats {
                    max_offdiag_rank: a.max_offdiag_rank.max(b.max_offdiag_rank).max(s.a12.rank()).max(s.a21.rank()),
                    memory_scalars: a.memory_scalars + b.memory_scalars + s.a12.memory() + s.a21.memory(),
                }
            }
        }
    }

    /// Passes every off-diagonal block through the recompression operator.
    pub fn recompress(&self, tc: &TruncationControl) -> Result<Self> {
        Ok(match &self.block {
            Block::Leaf(_) => self.clone(),
            Block::Split(s) => Self::join(
                s.a11.recompress(tc)?,
                s.a12.truncate(tc)?,
                s.a21.truncate(tc)?,
                s.a22.recompress(tc)?,
                self.shape,
            ),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let block = match &self.block {
            Block::Leaf(m) => Block::Leaf(m * alpha),
            Block::Split(s) => Block::Split(Box::new(Split {
                a11: s.a11.scaled(alpha),
                a12: s.a12.scaled(alpha),
                a21: s.a21.scaled(alpha),
                a22: s.a22.scaled(alpha),
            })),
        };
        let shape = if alpha == 1.0 || self.shape != Shape::UnitLowerTriangular {
            self.shape
        } else {
            Shape::General
        };
        Self { shape, block }.with_shape_unchecked(shape)
    }

    /// `H X` for a dense block of columns.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.cols(), "HodlrMatrix::apply: dimension mismatch");
        let mut y = DMatrix::zeros(self.rows(), x.ncols());
        self.gemm_acc(1.0, x.as_view(), &mut y.as_view_mut(), false);
        y
    }

    /// `H^T X` for a dense block of columns.
    pub fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.rows(), "HodlrMatrix::apply_transpose: dimension mismatch");
        let mut y = DMatrix::zeros(self.cols(), x.ncols());
        self.gemm_acc(1.0, x.as_view(), &mut y.as_view_mut(), true);
        y
    }

    /// Exact matrix-vector product by recursive descent.
    pub fn matvec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.cols() {
            return Err(Error::dims("matvec", self.cols(), v.len()));
        }
        let x = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(DVector::from_column_slice(self.apply(&x).as_slice()))
    }

    pub fn matvec_transpose(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.rows() {
            return Err(Error::dims("matvec_transpose", self.rows(), v.len()));
        }
        let x = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(DVector::from_column_slice(self.apply_transpose(&x).as_slice()))
    }

    /// `y += alpha * op(H) * x` where `op` is the identity or the transpose.
    pub(crate) fn gemm_acc(
        &self,
        alpha: f64,
        x: DMatrixView<'_, f64>,
        y: &mut DMatrixViewMut<'_, f64>,
        transpose: bool,
    ) {
        match &self.block {
            Block::Leaf(m) => {
                if transpose {
                    y.gemm_tr(alpha, m, &x, 1.0);
                } else {
                    y.gemm(alpha, m, &x, 1.0);
                }
            }
            Block::Split(s) => {
                let (m1, n1) = (s.a11.rows(), s.a11.cols());
                let (m2, n2) = (s.a22.rows(), s.a22.cols());
                let p = x.ncols();
                if transpose {
                    let (x1, x2) = (x.rows(0, m1), x.rows(m1, m2));
                    s.a11.gemm_acc(alpha, x1, &mut y.view_mut((0, 0), (n1, p)), true);
                    lowrank_acc(&s.a21, alpha, x2, &mut y.view_mut((0, 0), (n1, p)), true);
                    s.a22.gemm_acc(alpha, x2, &mut y.view_mut((n1, 0), (n2, p)), true);
                    lowrank_acc(&s.a12, alpha, x1, &mut y.view_mut((n1, 0), (n2, p)), true);
                } else {
                    let (x1, x2) = (x.rows(0, n1), x.rows(n1, n2));
                    s.a11.gemm_acc(alpha, x1, &mut y.view_mut((0, 0), (m1, p)), false);
                    lowrank_acc(&s.a12, alpha, x2, &mut y.view_mut((0, 0), (m1, p)), false);
                    s.a22.gemm_acc(alpha, x2, &mut y.view_mut((m1, 0), (m2, p)), false);
                    lowrank_acc(&s.a21, alpha, x1, &mut y.view_mut((m1, 0), (m2, p)), false);
                }
            }
        }
    }

    /// Visits every off-diagonal block in pre-order (`a21` before `a12`).
    pub fn for_each_offdiag(&self, f: &mut impl FnMut(&LowRankBlock)) {
        if let Block::Split(s) = &self.block {
            s.a11.for_each_offdiag(f);
            f(&s.a21);
            f(&s.a12);
            s.a22.for_each_offdiag(f);
        }
    }
}

fn lowrank_acc(
    b: &LowRankBlock,
    alpha: f64,
    x: DMatrixView<'_, f64>,
    y: &mut DMatrixViewMut<'_, f64>,
    transpose: bool,
) {
    if b.rank() == 0 {
        return;
    }
    if transpose {
        let tmp = b.l.tr_mul(&x);
        y.gemm_tr(alpha, &b.r, &tmp, 1.0);
    } else {
        let tmp = &b.r * x;
        y.gemm(alpha, &b.l, &tmp, 1.0);
    }
}

fn check_levels(row_tree: &PartitionTree, col_tree: &PartitionTree) -> Result<()> {
    if row_tree.level() != col_tree.level() {
        return Err(Error::TreeMismatch { op: "row and column partitions" });
    }
    Ok(())
}

fn build(m: DMatrixView<'_, f64>, rows: &[usize], cols: &[usize], tc: &TruncationControl) -> Result<HodlrMatrix> {
    if rows.len() == 1 {
        return Ok(HodlrMatrix::leaf(m.clone_owned(), Shape::General));
    }
    let h = rows.len() / 2;
    let m1: usize = rows[..h].iter().sum();
    let n1: usize = cols[..h].iter().sum();
    let (m2, n2) = (m.nrows() - m1, m.ncols() - n1);
    Ok(HodlrMatrix::join(
        build(m.view((0, 0), (m1, n1)), &rows[..h], &cols[..h], tc)?,
        LowRankBlock::from_dense(m.view((0, n1), (m1, n2)), tc)?,
        LowRankBlock::from_dense(m.view((m1, 0), (m2, n1)), tc)?,
        build(m.view((m1, n1), (m2, n2)), &rows[h..], &cols[h..], tc)?,
        Shape::General,
    ))
}

/// Compression of a dense square matrix on `tree`.
pub fn from_dense(m: &DMatrix<f64>, tree: &PartitionTree, tc: &TruncationControl) -> Result<HodlrMatrix> {
    HodlrMatrix::from_dense(m, tree, tc)
}

pub fn to_dense(h: &HodlrMatrix) -> DMatrix<f64> {
    h.to_dense()
}

pub fn recompress_hodlr(h: &HodlrMatrix, tc: &TruncationControl) -> Result<HodlrMatrix> {
    h.recompress(tc)
}

pub fn stats(h: &HodlrMatrix) -> Stats {
    h.stats()
}
