//! Hierarchically off-diagonal low-rank (HODLR) matrices and their
//! Householder-based QR decomposition in compact WY form.
//!
//! A [`HodlrMatrix`] is a recursive 2x2 block matrix with dense diagonal
//! leaves and factorized off-diagonal blocks. [`hqr`] returns factors
//! `Y`, `T`, `R` with `A ~ (I - Y T Y^T) R`; [`cholqr`] and [`cholqr2`]
//! are the Cholesky-based alternatives.

pub mod arith;
pub mod baselines;
pub mod dense;
pub mod error;
pub mod format;
pub mod hqr;
pub mod lowrank;
pub mod matrix;
pub mod partition;
pub mod rect;
pub mod wy;

pub use arith::{
    add, cholesky, low_rank_update, matvec, multiply, solve_upper_triangular_right, transpose, upper_solve_dense,
    upper_transpose_solve_dense,
};
pub use baselines::{cholqr, cholqr2, cholqr_iterated};
pub use error::{Error, Result};
pub use format::{decode, encode, read_hodlr, write_hodlr};
pub use hqr::{
    apply_q, apply_q_transpose, hodlr_norm_estimate, hqr, hqr_rec, hqr_with_options, q_to_hodlr, HodlrQrFactors,
    HqrOptions, StructuredColumn, StructuredY,
};
pub use lowrank::{left_orthogonalize, truncate_lowrank, LowRankBlock, TruncationControl};
pub use matrix::{Block, HodlrMatrix, Shape, Split, Stats};
pub use partition::PartitionTree;
pub use rect::{rect_qr_prototype, RectQrFactors};
pub use wy::{block_qr, wy_apply_qt, DenseWy, DEFAULT_BLOCK_SIZE};
