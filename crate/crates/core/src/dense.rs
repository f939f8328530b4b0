//! Dense building blocks: Householder reflectors, economy QR, SVD with
//! rank truncation, and power-iteration norm estimates.

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use crate::error::{Error, Result};
use crate::wy;

/// `I - gamma * y * y^T`, with `y[0] == 1`, mapping the input vector to
/// `[rho, 0, ..., 0]^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reflector {
    pub y: DVector<f64>,
    pub gamma: f64,
    pub rho: f64,
}

impl Reflector {
    /// Applies the reflector to `x` in place.
    pub fn apply(&self, x: &mut DVector<f64>) {
        let s = self.gamma * self.y.dot(x);
        x.axpy(-s, &self.y, 1.0);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.y.len();
        DMatrix::identity(n, n) - (&self.y * self.y.transpose()) * self.gamma
    }
}

/// Builds the reflector annihilating `v[1..]`.
///
/// The produced leading entry is `rho = -sign(v[0]) * |v|` with `sign(0) = +1`;
/// a zero vector gives the identity (`gamma = 0`, `rho = 0`).
pub fn householder_reflector(v: DVectorView<'_, f64>) -> Reflector {
    assert!(!v.is_empty(), "householder_reflector: empty vector");
    let mut y = v.clone_owned();
    let (gamma, rho) = householder_in_place(&mut y.as_view_mut());
    Reflector { y, gamma, rho }
}

/// Overwrites `col` with the reflector vector `y` and returns `(gamma, rho)`.
pub(crate) fn householder_in_place(col: &mut DVectorViewMut<'_, f64>) -> (f64, f64) {
    let norm = col.norm();
    if norm == 0.0 {
        col.fill(0.0);
        col[0] = 1.0;
        return (0.0, 0.0);
    }
    let v1 = col[0];
    let sign = if v1 < 0.0 { -1.0 } else { 1.0 };
    let rho = -sign * norm;
    let gamma = (rho - v1) / rho;
    let scale = 1.0 / (v1 - rho);
    col.rows_range_mut(1..).scale_mut(scale);
    col[0] = 1.0;
    (gamma, rho)
}

/// Economy QR decomposition `M = Q R`.
///
/// For tall inputs `Q` has `M.ncols()` orthonormal columns and `R` is square
/// upper triangular. Wide inputs are accepted as well: then `Q` is square and
/// `R` is upper trapezoidal.
pub fn qr_economy(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if cols == 0 || rows == 0 {
        return (DMatrix::zeros(rows, 0), DMatrix::zeros(0, cols));
    }
    if rows >= cols {
        let (f, r) = wy::block_qr(m, wy::DEFAULT_BLOCK_SIZE).expect("rows >= cols");
        (f.explicit_q(cols), r)
    } else {
        let (f, r_head) =
            wy::block_qr(&m.columns(0, rows).clone_owned(), wy::DEFAULT_BLOCK_SIZE)
                .expect("square block");
        let tail = f.apply_qt(&m.columns(rows, cols - rows).clone_owned());
        let mut r = DMatrix::zeros(rows, cols);
        r.columns_mut(0, rows).copy_from(&r_head);
        r.columns_mut(rows, cols - rows).copy_from(&tail);
        (f.explicit_q(rows), r)
    }
}

/// Thin singular value decomposition `M = U diag(sigma) V^T`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    /// Nonincreasing.
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn svd(m: &DMatrix<f64>) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return Ok(SvdResult {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let s = to_faer(m).thin_svd().map_err(|_| Error::SvdNotConverged { rows, cols })?;
    let sigma = s.S().column_vector();
    Ok(SvdResult {
        u: from_faer(s.U()),
        sigma: DVector::from_fn(sigma.nrows(), |i, _| sigma[i]),
        v: from_faer(s.V()),
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return Ok(DVector::zeros(0));
    }
    let s = to_faer(m).singular_values().map_err(|_| Error::SvdNotConverged { rows, cols })?;
    Ok(DVector::from_vec(s))
}

/// Exact spectral norm via the largest singular value.
pub fn two_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().copied().fold(0.0, f64::max))
}

/// Smallest `k` such that `sigma[k] <= eps` (zero-based, so this is
/// `sigma_{k+1}` in one-based notation). Values past the end count as zero.
pub fn truncation_rank(sigma: &[f64], eps: f64) -> usize {
    sigma.iter().position(|&s| s <= eps).unwrap_or(sigma.len())
}

/// Stopping rule for [`power_iteration_norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIteration {
    pub max_iterations: usize,
    /// Stop once successive estimates differ by less than this, relatively.
    pub rel_tol: f64,
}

impl Default for PowerIteration {
    /// Two digits are enough when the estimate only scales a truncation
    /// threshold.
    fn default() -> Self {
        Self {
            max_iterations: 50,
            rel_tol: 1e-3,
        }
    }
}

/// Estimates `|A|_2` by power iteration on `A^T A`, starting from the
/// normalized all-ones vector of length `n`.
pub fn spectral_norm_estimate<F, G>(apply: F, apply_transpose: G, n: usize) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    power_iteration_norm(apply, apply_transpose, n, PowerIteration::default())
}

pub fn power_iteration_norm<F, G>(apply: F, apply_transpose: G, n: usize, cfg: PowerIteration) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    if n == 0 {
        return 0.0;
    }
    power_iteration_norm_from(apply, apply_transpose, DVector::from_element(n, 1.0), cfg)
}

/// Power iteration on `A^T A` from a caller-chosen start vector.
pub fn power_iteration_norm_from<F, G>(apply: F, apply_transpose: G, start: DVector<f64>, cfg: PowerIteration) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let start_norm = start.norm();
    if start_norm == 0.0 {
        return 0.0;
    }
    let mut x = start / start_norm;
    let mut estimate = 0.0;
    for _ in 0..cfg.max_iterations.max(1) {
        let y = apply(&x);
        let next = y.norm();
        let z = apply_transpose(&y);
        let z_norm = z.norm();
        if z_norm == 0.0 || !z_norm.is_finite() {
            return next;
        }
        x = z / z_norm;
        let converged = (next - estimate).abs() <= cfg.rel_tol * next;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// `[a | b]`
pub fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hcat: row counts differ");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `[a; b]`
pub fn vcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols(), "vcat: column counts differ");
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}
