//! Factorized low-rank blocks `L * R` and the recompression operator.

use nalgebra::{DMatrix, DMatrixView};

use crate::dense::{self, hcat, qr_economy, svd, truncation_rank, vcat};
use crate::error::Result;

/// Absolute singular-value threshold plus an optional rank cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationControl {
    pub eps: f64,
    pub rank_cap: Option<usize>,
}

impl TruncationControl {
    pub fn new(eps: f64) -> Self {
        assert!(eps >= 0.0, "truncation tolerance must be nonnegative");
        Self { eps, rank_cap: None }
    }

    /// Drops exactly-zero singular values only.
    pub fn exact() -> Self {
        Self::new(0.0)
    }

    pub fn with_rank_cap(mut self, cap: usize) -> Self {
        assert!(cap >= 1, "rank cap must be at least 1");
        self.rank_cap = Some(cap);
        self
    }

    pub(crate) fn rank_for(&self, sigma: &[f64]) -> usize {
        let k = truncation_rank(sigma, self.eps);
        self.rank_cap.map_or(k, |cap| k.min(cap))
    }
}

/// `n_L x n_R` block stored as `L (n_L x k) * R (k x n_R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankBlock {
    pub l: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `L^T L = I` holds to working precision.
    pub left_orthogonal: bool,
}

impl LowRankBlock {
    pub fn new(l: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        assert_eq!(l.ncols(), r.nrows(), "LowRankBlock: inner dimensions differ");
        Self {
            l,
            r,
            left_orthogonal: false,
        }
    }

    /// Rank-0 block with empty factors.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            l: DMatrix::zeros(rows, 0),
            r: DMatrix::zeros(0, cols),
            left_orthogonal: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.l.nrows()
    }

    pub fn cols(&self) -> usize {
        self.r.ncols()
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn memory(&self) -> usize {
        self.rank() * (self.rows() + self.cols())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.l * &self.r
    }

    /// `(L R)^T = R^T L^T`.
    pub fn transpose(&self) -> Self {
        Self {
            l: self.r.transpose(),
            r: self.l.transpose(),
            left_orthogonal: self.rank() == 0,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            l: self.l.clone(),
            r: &self.r * alpha,
            left_orthogonal: self.left_orthogonal,
        }
    }

    /// Untruncated sum `[L1 L2] [R1; R2]`.
    pub fn concat(&self, other: &Self) -> Self {
        assert_eq!(self.rows(), other.rows(), "LowRankBlock::concat: row counts differ");
        assert_eq!(self.cols(), other.cols(), "LowRankBlock::concat: column counts differ");
        Self::new(hcat(&self.l, &other.l), vcat(&self.r, &other.r))
    }

    /// Rows `start..start + len` of the block.
    pub fn row_slice(&self, start: usize, len: usize) -> Self {
        Self::new(self.l.rows(start, len).clone_owned(), self.r.clone())
    }

    /// Columns `start..start + len` of the block.
    pub fn col_slice(&self, start: usize, len: usize) -> Self {
        Self {
            l: self.l.clone(),
            r: self.r.columns(start, len).clone_owned(),
            left_orthogonal: self.left_orthogonal,
        }
    }

    /// Best approximation of a dense block via its SVD: `L = U_k`,
    /// `R = Sigma_k V_k^T`.
    pub fn from_dense(m: DMatrixView<'_, f64>, tc: &TruncationControl) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Ok(Self::zeros(rows, cols));
        }
        let s = svd(&m.clone_owned())?;
        let k = tc.rank_for(s.sigma.as_slice());
        Ok(Self::from_svd_head(&s, k, None, None))
    }

    fn from_svd_head(
        s: &dense::SvdResult,
        k: usize,
        left_basis: Option<&DMatrix<f64>>,
        right_basis: Option<&DMatrix<f64>>,
    ) -> Self {
        let u = s.u.columns(0, k);
        let mut vs = s.v.columns(0, k).clone_owned();
        for (j, mut col) in vs.column_iter_mut().enumerate() {
            col *= s.sigma[j];
        }
        let l = match left_basis {
            Some(q) => q * u,
            None => u.clone_owned(),
        };
        let r = match right_basis {
            Some(q) => (q * vs).transpose(),
            None => vs.transpose(),
        };
        Self {
            l,
            r,
            left_orthogonal: true,
        }
    }

    /// Recompression: QR of `L` and of `R^T`, SVD of the small core
    /// `R1 R2^T`, keep the singular triplets above `tc.eps`.
    ///
    /// The result is left-orthogonal and within `tc.eps` of the input in the
    /// spectral norm.
    pub fn truncate(&self, tc: &TruncationControl) -> Result<Self> {
        let (rows, cols) = (self.rows(), self.cols());
        if self.rank() == 0 || rows == 0 || cols == 0 {
            return Ok(Self::zeros(rows, cols));
        }
        let (q1, r1) = if self.left_orthogonal && self.rank() <= rows {
            (self.l.clone(), DMatrix::identity(self.rank(), self.rank()))
        } else {
            qr_economy(&self.l)
        };
        let (q2, r2) = qr_economy(&self.r.transpose());
        let core = &r1 * r2.transpose();
        let s = svd(&core)?;
        let k = tc.rank_for(s.sigma.as_slice());
        Ok(Self::from_svd_head(&s, k, Some(&q1), Some(&q2)))
    }

    /// Same product with orthonormal columns in `L`.
    pub fn left_orthogonalize(&self) -> Self {
        let (rows, k) = self.l.shape();
        if self.left_orthogonal {
            return self.clone();
        }
        if k > rows {
            return Self {
                l: DMatrix::identity(rows, rows),
                r: &self.l * &self.r,
                left_orthogonal: true,
            };
        }
        let (q, r) = qr_economy(&self.l);
        Self {
            l: q,
            r: r * &self.r,
            left_orthogonal: true,
        }
    }
}

/// The recompression operator applied to one block.
pub fn truncate_lowrank(block: &LowRankBlock, tc: &TruncationControl) -> Result<LowRankBlock> {
    block.truncate(tc)
}

pub fn left_orthogonalize(block: &LowRankBlock) -> LowRankBlock {
    block.left_orthogonalize()
}
