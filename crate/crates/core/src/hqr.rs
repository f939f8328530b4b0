//! Householder QR of HODLR matrices in compact WY form, `A = (I - Y T Y^T) R`.

use nalgebra::{DMatrix, DVector};

use crate::arith::{add, multiply, transpose};
use crate::dense::{hcat, spectral_norm_estimate, vcat};
use crate::error::{Error, Result};
use crate::lowrank::{LowRankBlock, TruncationControl};
use crate::matrix::{Block, HodlrMatrix, Shape};
use crate::partition::PartitionTree;
use crate::wy::{block_qr, DEFAULT_BLOCK_SIZE};

/// One recursion unit `H = [A; B; C]`: an `m x m` HODLR block, a factorized
/// `p x m` block and `r2` dense rows.
#[derive(Clone, Debug)]
pub struct StructuredColumn {
    pub a_tilde: HodlrMatrix,
    pub b: LowRankBlock,
    pub c: DMatrix<f64>,
}

impl StructuredColumn {
    /// A bare HODLR matrix with empty `B` and `C`.
    pub fn new(a: HodlrMatrix) -> Self {
        let m = a.cols();
        Self {
            a_tilde: a,
            b: LowRankBlock::zeros(0, m),
            c: DMatrix::zeros(0, m),
        }
    }

    pub fn cols(&self) -> usize {
        self.a_tilde.cols()
    }

    fn validate(&self) -> Result<()> {
        let m = self.a_tilde.cols();
        if self.a_tilde.rows() != m || self.b.cols() != m || self.c.ncols() != m {
            return Err(Error::dims(
                "hqr_rec",
                format!("square A and {m} columns throughout"),
                format!(
                    "A {}x{}, B {}x{}, C {}x{}",
                    self.a_tilde.rows(),
                    self.a_tilde.cols(),
                    self.b.rows(),
                    self.b.cols(),
                    self.c.nrows(),
                    self.c.ncols()
                ),
            ));
        }
        Ok(())
    }
}

/// `Y` partitioned like the column it reduces.
#[derive(Clone, Debug)]
pub struct StructuredY {
    /// Unit lower triangular.
    pub y_a: HodlrMatrix,
    pub y_b: LowRankBlock,
    pub y_c: DMatrix<f64>,
}

/// `A ~ (I - Y T Y^T) R` with unit lower triangular `Y` and upper
/// triangular `T`, `R`, all on the partition of `A`.
#[derive(Clone, Debug)]
pub struct HodlrQrFactors {
    pub y: HodlrMatrix,
    pub t: HodlrMatrix,
    pub r: HodlrMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HqrOptions {
    /// Relative tolerance; truncations of `S` and of the updated blocks use
    /// `eps * ||A||_2`, the coupling blocks of `T` use `eps` itself.
    pub eps: f64,
    /// Replaces the power-iteration estimate of `||A||_2`. Setting it to 1
    /// turns `eps` into an absolute threshold.
    pub norm_override: Option<f64>,
    pub block_size: usize,
}

impl HqrOptions {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            norm_override: None,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

/// QR decomposition of a square HODLR matrix at relative tolerance `eps`.
pub fn hqr(a: &HodlrMatrix, eps: f64) -> Result<HodlrQrFactors> {
    hqr_with_options(a, &HqrOptions::new(eps))
}

pub fn hqr_with_options(a: &HodlrMatrix, opts: &HqrOptions) -> Result<HodlrQrFactors> {
    if a.row_leaf_sizes() != a.col_leaf_sizes() {
        return Err(Error::dims("hqr", "a square partition", format!("{}x{}", a.rows(), a.cols())));
    }
    let norm = opts.norm_override.unwrap_or_else(|| hodlr_norm_estimate(a));
    let tol = Tolerances {
        abs: TruncationControl::new(opts.eps * norm),
        plain: TruncationControl::new(opts.eps),
        block_size: opts.block_size.max(1),
    };
    let (y, t, r) = rec(StructuredColumn::new(a.clone()), &tol)?;
    Ok(HodlrQrFactors { y: y.y_a, t, r })
}

/// Power-iteration estimate of `||A||_2` through HODLR matvecs.
pub fn hodlr_norm_estimate(a: &HodlrMatrix) -> f64 {
    spectral_norm_estimate(
        |x: &DVector<f64>| a.matvec(x).expect("square operand"),
        |x: &DVector<f64>| a.matvec_transpose(x).expect("square operand"),
        a.cols(),
    )
}

struct Tolerances {
    abs: TruncationControl,
    plain: TruncationControl,
    block_size: usize,
}

/// One recursion step on a structured column.
///
/// `eps_abs` is the already scaled threshold `eps * ||A||_2`; `eps_plain`
/// truncates the coupling blocks of `T`.
pub fn hqr_rec(col: StructuredColumn, eps_abs: f64, eps_plain: f64) -> Result<(StructuredY, HodlrMatrix, HodlrMatrix)> {
    let tol = Tolerances {
        abs: TruncationControl::new(eps_abs),
        plain: TruncationControl::new(eps_plain),
        block_size: DEFAULT_BLOCK_SIZE,
    };
    rec(col, &tol)
}

fn rec(col: StructuredColumn, tol: &Tolerances) -> Result<(StructuredY, HodlrMatrix, HodlrMatrix)> {
    col.validate()?;
    let StructuredColumn { a_tilde, b, c } = col;
    let b = if b.rank() > 0 { b.left_orthogonalize() } else { b };
    let LowRankBlock { l: b_l, r: b_r, .. } = b;
    let r1 = b_r.nrows();

    let (y_a, y_c_full, t, r) = match a_tilde.block {
        Block::Leaf(a) => {
            let h = vcat(&vcat(&a, &b_r), &c);
            let (wy, r) = block_qr(&h, tol.block_size)?;
            let m = a.ncols();
            let y_a = HodlrMatrix::leaf(wy.y.rows(0, m).clone_owned(), Shape::UnitLowerTriangular);
            let y_rest = wy.y.rows(m, h.nrows() - m).clone_owned();
            (
                y_a,
                y_rest,
                HodlrMatrix::leaf(wy.t, Shape::UpperTriangular),
                HodlrMatrix::leaf(r, Shape::UpperTriangular),
            )
        }
        Block::Split(s) => {
            let s = *s;
            let (m1, m2) = (s.a11.cols(), s.a22.cols());
            // Dense rows below A, split by block column.
            let below = vcat(&b_r, &c);
            let x1 = below.columns(0, m1).clone_owned();
            let x2 = below.columns(m1, m2).clone_owned();

            let (y1, t1, r1_) = rec(
                StructuredColumn {
                    a_tilde: s.a11,
                    b: s.a21,
                    c: x1,
                },
                tol,
            )?;
            let y_a21 = y1.y_b;

            // S~ = T(Y_A11^T A12 + Y_A21^T A22 + [Y_BR1; Y_C1]^T [B_R2; C2])
            let term1 = LowRankBlock::new(y1.y_a.apply_transpose(&s.a12.l), s.a12.r.clone());
            let term2 = lowrank_t_times_hodlr(&y_a21, &s.a22);
            let chunk = term1.rank().max(term2.rank()).max(1);
            let s_tilde = accumulate(term1, &[term2], &y1.y_c, &x2, chunk, &tol.abs)?;

            // S = T1^T S~ = W R_s
            let w = t1.apply_transpose(&s_tilde.l);
            let r_s = &s_tilde.r;

            // A12^ = T(A12 - Y_A11 S)
            let a12_hat = LowRankBlock::new(hcat(&s.a12.l, &-y1.y_a.apply(&w)), vcat(&s.a12.r, r_s)).truncate(&tol.abs)?;
            // A22^ = A22 - Y_A21 S
            let a22_hat = if s_tilde.rank() > 0 && y_a21.rank() > 0 {
                let u = -(&y_a21.l * (&y_a21.r * &w));
                crate::arith::low_rank_update(&s.a22, &u, &r_s.transpose(), &tol.abs)?
            } else {
                s.a22
            };
            // [B_R2; C2]^ = [B_R2; C2] - [Y_BR1; Y_C1] S
            let mut c2_hat = x2;
            if s_tilde.rank() > 0 && y1.y_c.nrows() > 0 {
                c2_hat.gemm(-1.0, &(&y1.y_c * &w), r_s, 1.0);
            }

            let (y2, t2, r2) = rec(
                StructuredColumn {
                    a_tilde: a22_hat,
                    b: LowRankBlock::zeros(0, m2),
                    c: c2_hat,
                },
                tol,
            )?;

            // T~12 = T_eps(Y_A21^T Y_A22 + [Y_BR1; Y_C1]^T [Y_BR2; Y_C2])
            let first = lowrank_t_times_hodlr(&y_a21, &y2.y_a);
            let chunk = first.rank().max(1);
            let t12_tilde = accumulate(first, &[], &y1.y_c, &y2.y_c, chunk, &tol.plain)?;
            // T12 = -T1 T~12 T2
            let t12 = if t12_tilde.rank() > 0 {
                LowRankBlock::new(-t1.apply(&t12_tilde.l), t2.apply_transpose(&t12_tilde.r.transpose()).transpose())
            } else {
                LowRankBlock::zeros(m1, m2)
            };

            let r = HodlrMatrix::join(r1_, a12_hat, LowRankBlock::zeros(m2, m1), r2, Shape::UpperTriangular);
            let t = HodlrMatrix::join(t1, t12, LowRankBlock::zeros(m2, m1), t2, Shape::UpperTriangular);
            let y_a = HodlrMatrix::join(y1.y_a, LowRankBlock::zeros(m1, m2), y_a21, y2.y_a, Shape::UnitLowerTriangular);
            (y_a, hcat(&y1.y_c, &y2.y_c), t, r)
        }
    };

    let rows_c = y_c_full.nrows() - r1;
    let y_b_tilde = y_c_full.rows(0, r1).clone_owned();
    let y_c = y_c_full.rows(r1, rows_c).clone_owned();
    let y_b = LowRankBlock {
        l: b_l,
        r: y_b_tilde,
        left_orthogonal: true,
    };
    Ok((StructuredY { y_a, y_b, y_c }, t, r))
}

/// `(L R)^T H = R^T (H^T L)^T` as a factorized block.
fn lowrank_t_times_hodlr(b: &LowRankBlock, h: &HodlrMatrix) -> LowRankBlock {
    if b.rank() == 0 {
        return LowRankBlock::zeros(b.cols(), h.cols());
    }
    LowRankBlock::new(b.r.transpose(), h.apply_transpose(&b.l).transpose())
}

/// Sums `first`, the blocks in `rest`, and the dense product `U^T X`,
/// recompressing after every single addition. The dense product enters in
/// row chunks of `chunk` rows so the rank of any intermediate stays bounded.
fn accumulate(
    first: LowRankBlock,
    rest: &[LowRankBlock],
    u: &DMatrix<f64>,
    x: &DMatrix<f64>,
    chunk: usize,
    tc: &TruncationControl,
) -> Result<LowRankBlock> {
    let mut acc = first;
    for term in rest {
        acc = acc.concat(term).truncate(tc)?;
    }
    let q = u.nrows();
    let mut start = 0;
    while start < q {
        let len = chunk.min(q - start);
        let term = LowRankBlock::new(u.rows(start, len).transpose(), x.rows(start, len).clone_owned());
        acc = acc.concat(&term).truncate(tc)?;
        start += len;
    }
    acc.truncate(tc)
}

impl HodlrQrFactors {
    pub fn rows(&self) -> usize {
        self.y.rows()
    }

    /// `Q^T M = M - Y (T^T (Y^T M))`
    pub fn apply_q_transpose(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.rows() {
            return Err(Error::dims("apply_q_transpose", self.rows(), m.nrows()));
        }
        let z = self.t.apply_transpose(&self.y.apply_transpose(m));
        Ok(m - self.y.apply(&z))
    }

    /// `Q M = M - Y (T (Y^T M))`
    pub fn apply_q(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.rows() {
            return Err(Error::dims("apply_q", self.rows(), m.nrows()));
        }
        let z = self.t.apply(&self.y.apply_transpose(m));
        Ok(m - self.y.apply(&z))
    }

    /// Dense `Q = I - Y T Y^T`.
    pub fn q_dense(&self) -> DMatrix<f64> {
        let n = self.rows();
        self.apply_q(&DMatrix::identity(n, n)).expect("square factors")
    }
}

pub fn apply_q_transpose(f: &HodlrQrFactors, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    f.apply_q_transpose(m)
}

pub fn apply_q(f: &HodlrQrFactors, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    f.apply_q(m)
}

/// `Q = I - Y T Y^T` as a HODLR matrix, for rank and memory comparisons.
pub fn q_to_hodlr(f: &HodlrQrFactors, tc: &TruncationControl) -> Result<HodlrMatrix> {
    let yt = multiply(&f.y, &f.t, tc)?;
    let yty = multiply(&yt, &transpose(&f.y), tc)?;
    let id = HodlrMatrix::identity(&PartitionTree::from_leaf_sizes(f.y.row_leaf_sizes())?);
    add(&id, &yty.scaled(-1.0), tc)
}
