//! Cholesky-based QR of HODLR matrices.

use crate::arith::{cholesky, multiply, solve_upper_triangular_right, transpose};
use crate::error::Result;
use crate::lowrank::TruncationControl;
use crate::matrix::HodlrMatrix;

/// `R = chol(A^T A)`, `Q = A R^{-1}`.
pub fn cholqr(a: &HodlrMatrix, tc: &TruncationControl) -> Result<(HodlrMatrix, HodlrMatrix)> {
    let gram = multiply(&transpose(a), a, tc)?;
    let r = cholesky(&gram, tc)?;
    let q = solve_upper_triangular_right(a, &r, tc)?;
    Ok((q, r))
}

/// CholQR followed by `passes` reorthogonalization passes on `Q`, with the
/// triangular factors multiplied together.
pub fn cholqr_iterated(a: &HodlrMatrix, tc: &TruncationControl, passes: usize) -> Result<(HodlrMatrix, HodlrMatrix)> {
    let (mut q, mut r) = cholqr(a, tc)?;
    for _ in 0..passes {
        let (q2, r2) = cholqr(&q, tc)?;
        r = multiply(&r2, &r, tc)?;
        q = q2;
    }
    Ok((q, r))
}

/// CholQR with one reorthogonalization pass.
pub fn cholqr2(a: &HodlrMatrix, tc: &TruncationControl) -> Result<(HodlrMatrix, HodlrMatrix)> {
    cholqr_iterated(a, tc, 1)
}
