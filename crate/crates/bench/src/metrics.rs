//! Accuracy, conditioning, rank and memory measurements.
//!
//! Norms are computed densely (SVD or symmetric eigenvalues) up to
//! `dense_limit`; beyond that, power iteration on the implicitly applied
//! operators takes over when estimation is allowed.

use hodlr::dense::{power_iteration_norm_from, singular_values, two_norm, PowerIteration};
use hodlr::{
    q_to_hodlr, upper_solve_dense, upper_transpose_solve_dense, HodlrMatrix, HodlrQrFactors, TruncationControl,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::gen::block_rng;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("n = {n} exceeds the dense limit {limit}; pass --estimate to use power-iteration norms")]
    SizeLimit { n: usize, limit: usize },
    #[error(transparent)]
    Hodlr(#[from] hodlr::Error),
}

pub type MetricsResult<T> = std::result::Result<T, MetricsError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsOptions {
    /// Largest `n` for which norms are computed from dense matrices.
    pub dense_limit: usize,
    /// Allow power-iteration norms above `dense_limit`.
    pub estimate: bool,
    pub power: PowerIteration,
    /// Seed of the random start vector of the power iterations.
    pub start_seed: u64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            estimate: false,
            power: PowerIteration {
                max_iterations: 500,
                rel_tol: 1e-10,
            },
            start_seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    Dense,
    Estimate,
}

impl MetricsOptions {
    pub fn mode(&self, n: usize) -> MetricsResult<NormMode> {
        if n <= self.dense_limit {
            Ok(NormMode::Dense)
        } else if self.estimate {
            Ok(NormMode::Estimate)
        } else {
            Err(MetricsError::SizeLimit {
                n,
                limit: self.dense_limit,
            })
        }
    }

    fn start(&self, n: usize) -> DVector<f64> {
        let mut rng = block_rng(self.start_seed, 0);
        DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    fn norm<F, G>(&self, n: usize, apply: F, apply_transpose: G) -> f64
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
        G: Fn(&DVector<f64>) -> DVector<f64>,
    {
        power_iteration_norm_from(apply, apply_transpose, self.start(n), self.power)
    }
}

/// The matrix being factorized.
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    Hodlr(&'a HodlrMatrix),
    Dense(&'a DMatrix<f64>),
}

impl Operand<'_> {
    pub fn rows(&self) -> usize {
        match self {
            Operand::Hodlr(h) => h.rows(),
            Operand::Dense(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Operand::Hodlr(h) => h.cols(),
            Operand::Dense(m) => m.ncols(),
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operand::Hodlr(h) => h.apply(x),
            Operand::Dense(m) => *m * x,
        }
    }

    fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operand::Hodlr(h) => h.apply_transpose(x),
            Operand::Dense(m) => m.tr_mul(x),
        }
    }

    fn dense(self) -> DMatrix<f64> {
        match self {
            Operand::Hodlr(h) => h.to_dense(),
            Operand::Dense(m) => m.clone(),
        }
    }
}

/// A computed factorization `A ~ Q R`.
#[derive(Clone, Copy, Debug)]
pub enum Factors<'a> {
    /// `Q = I - Y T Y^T`.
    Wy(&'a HodlrQrFactors),
    /// Explicit HODLR `Q` and upper triangular `R`.
    Hodlr { q: &'a HodlrMatrix, r: &'a HodlrMatrix },
    Dense { q: &'a DMatrix<f64>, r: &'a DMatrix<f64> },
}

impl Factors<'_> {
    fn q(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factors::Wy(f) => f.apply_q(x).expect("matching rows"),
            Factors::Hodlr { q, .. } => q.apply(x),
            Factors::Dense { q, .. } => *q * x,
        }
    }

    fn qt(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factors::Wy(f) => f.apply_q_transpose(x).expect("matching rows"),
            Factors::Hodlr { q, .. } => q.apply_transpose(x),
            Factors::Dense { q, .. } => q.tr_mul(x),
        }
    }

    fn r(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factors::Wy(f) => f.r.apply(x),
            Factors::Hodlr { r, .. } => r.apply(x),
            Factors::Dense { r, .. } => *r * x,
        }
    }

    fn rt(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factors::Wy(f) => f.r.apply_transpose(x),
            Factors::Hodlr { r, .. } => r.apply_transpose(x),
            Factors::Dense { r, .. } => r.tr_mul(x),
        }
    }

    fn q_dense(&self) -> DMatrix<f64> {
        match self {
            Factors::Wy(f) => f.q_dense(),
            Factors::Hodlr { q, .. } => q.to_dense(),
            Factors::Dense { q, .. } => (*q).clone(),
        }
    }

    fn r_dense(&self) -> DMatrix<f64> {
        match self {
            Factors::Wy(f) => f.r.to_dense(),
            Factors::Hodlr { r, .. } => r.to_dense(),
            Factors::Dense { r, .. } => (*r).clone(),
        }
    }

    fn r_solve(&self, x: &DMatrix<f64>) -> MetricsResult<DMatrix<f64>> {
        Ok(match self {
            Factors::Wy(f) => upper_solve_dense(&f.r, x)?,
            Factors::Hodlr { r, .. } => upper_solve_dense(r, x)?,
            Factors::Dense { r, .. } => r.solve_upper_triangular(x).ok_or(singular())?,
        })
    }

    fn r_transpose_solve(&self, x: &DMatrix<f64>) -> MetricsResult<DMatrix<f64>> {
        Ok(match self {
            Factors::Wy(f) => upper_transpose_solve_dense(&f.r, x)?,
            Factors::Hodlr { r, .. } => upper_transpose_solve_dense(r, x)?,
            Factors::Dense { r, .. } => r.tr_solve_upper_triangular(x).ok_or(singular())?,
        })
    }
}

fn singular() -> MetricsError {
    MetricsError::Hodlr(hodlr::Error::SingularLeaf { leaf: 0, index: 0 })
}

fn col(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn vec_of(m: DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// `||A||_2` and, in dense mode, `kappa_2(A)`; the condition number is NaN
/// when estimated norms are in use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperandSummary {
    pub norm: f64,
    pub kappa2: f64,
}

pub fn summarize(a: Operand<'_>, opts: &MetricsOptions) -> MetricsResult<OperandSummary> {
    let n = a.rows().max(a.cols());
    match opts.mode(n)? {
        NormMode::Dense => {
            let s = singular_values(&a.dense())?;
            let (max, min) = (s.max(), s.min());
            Ok(OperandSummary {
                norm: max,
                kappa2: if a.rows() >= a.cols() { max / min } else { f64::NAN },
            })
        }
        NormMode::Estimate => Ok(OperandSummary {
            norm: opts.norm(a.cols(), |x| vec_of(a.apply(&col(x))), |x| vec_of(a.apply_transpose(&col(x)))),
            kappa2: f64::NAN,
        }),
    }
}

/// `||A||_2 * ||R^{-1}||_2`, which equals `kappa_2(A)` for an exact QR
/// factorization.
pub fn kappa2_estimate(norm_a: f64, f: &Factors<'_>, n: usize, opts: &MetricsOptions) -> MetricsResult<f64> {
    // Surface a singular R before iterating.
    f.r_solve(&DMatrix::zeros(n, 1))?;
    let inv = opts.norm(
        n,
        |x| vec_of(f.r_solve(&col(x)).expect("checked nonsingular")),
        |x| vec_of(f.r_transpose_solve(&col(x)).expect("checked nonsingular")),
    );
    Ok(norm_a * inv)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    /// `||Q^T Q - I||_2`
    pub e_orth: f64,
    /// `||Q R - A||_2`
    pub e_acc: f64,
}

pub fn accuracy(a: Operand<'_>, f: &Factors<'_>, opts: &MetricsOptions) -> MetricsResult<Accuracy> {
    let (m, n) = (a.rows(), a.cols());
    match opts.mode(m.max(n))? {
        NormMode::Dense => {
            let q = f.q_dense();
            let mut e = q.tr_mul(&q);
            for i in 0..m {
                e[(i, i)] -= 1.0;
            }
            let e_orth = e.symmetric_eigenvalues().amax();
            let residual = q * f.r_dense() - a.dense();
            Ok(Accuracy {
                e_orth,
                e_acc: two_norm(&residual)?,
            })
        }
        NormMode::Estimate => {
            let orth = |x: &DVector<f64>| {
                let c = col(x);
                vec_of(f.qt(&f.q(&c)) - c)
            };
            let e_orth = opts.norm(m, orth, orth);
            let e_acc = opts.norm(
                n,
                |x| {
                    let c = col(x);
                    vec_of(f.q(&f.r(&c)) - a.apply(&c))
                },
                |x| {
                    let c = col(x);
                    vec_of(f.rt(&f.qt(&c)) - a.apply_transpose(&c))
                },
            );
            Ok(Accuracy { e_orth, e_acc })
        }
    }
}

/// Maximal off-diagonal ranks and storage relative to `A`; entries that do
/// not apply to a method are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Structure {
    pub rank_y: Option<usize>,
    pub rank_t: Option<usize>,
    pub rank_q: Option<usize>,
    pub rank_r: Option<usize>,
    pub mem_yt_rel: Option<f64>,
    pub mem_q_rel: Option<f64>,
    pub mem_r_rel: Option<f64>,
}

/// Ranks and memory of hQR factors; `Q` is formed at threshold `q_tc`.
pub fn hqr_structure(a: &HodlrMatrix, f: &HodlrQrFactors, q_tc: &TruncationControl) -> MetricsResult<Structure> {
    let base = a.stats().memory_scalars as f64;
    let (y, t, r) = (f.y.stats(), f.t.stats(), f.r.stats());
    let q = q_to_hodlr(f, q_tc)?.stats();
    Ok(Structure {
        rank_y: Some(y.max_offdiag_rank),
        rank_t: Some(t.max_offdiag_rank),
        rank_q: Some(q.max_offdiag_rank),
        rank_r: Some(r.max_offdiag_rank),
        mem_yt_rel: Some((y.memory_scalars + t.memory_scalars) as f64 / base),
        mem_q_rel: Some(q.memory_scalars as f64 / base),
        mem_r_rel: Some(r.memory_scalars as f64 / base),
    })
}

/// Ranks and memory of explicit HODLR `Q` and `R`.
pub fn hodlr_qr_structure(a: &HodlrMatrix, q: &HodlrMatrix, r: &HodlrMatrix) -> Structure {
    let base = a.stats().memory_scalars as f64;
    let (q, r) = (q.stats(), r.stats());
    Structure {
        rank_q: Some(q.max_offdiag_rank),
        rank_r: Some(r.max_offdiag_rank),
        mem_q_rel: Some(q.memory_scalars as f64 / base),
        mem_r_rel: Some(r.memory_scalars as f64 / base),
        ..Structure::default()
    }
}

/// Dense factors store full `n x n` arrays for each of `Y`, `T`, `Q`, `R`.
pub fn dense_structure(a: &HodlrMatrix) -> Structure {
    let base = a.stats().memory_scalars as f64;
    let full = (a.rows() * a.cols()) as f64 / base;
    Structure {
        mem_yt_rel: Some(2.0 * full),
        mem_q_rel: Some(full),
        mem_r_rel: Some(full),
        ..Structure::default()
    }
}
