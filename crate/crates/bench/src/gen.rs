//! Test-matrix generators.
//!
//! Randomness comes from ChaCha8 seeded with the user seed; every leaf and
//! off-diagonal block draws from its own stream, numbered in the pre-order
//! in which blocks are visited (`a11` subtree, `a21`, `a12`, `a22` subtree).

use hodlr::dense::{power_iteration_norm, PowerIteration};
use hodlr::{Block, HodlrMatrix, LowRankBlock, PartitionTree, Result, Shape, TruncationControl};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator for stream `stream` of `seed`.
pub fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random square HODLR matrix: standard normal leaves, and off-diagonal
/// blocks that are sums of `offdiag_rank` outer products of standard normal
/// vectors.
pub fn gen_random_hodlr(n: usize, n_min: usize, offdiag_rank: usize, seed: u64) -> HodlrMatrix {
    let tree = PartitionTree::balanced(n, n_min);
    random_on(tree.leaf_sizes(), tree.leaf_sizes(), offdiag_rank, seed)
}

/// Random `m x n` HODLR matrix. The column partition is balanced with
/// `n_min`; rows are split into as many leaves, as evenly as possible.
pub fn gen_random_hodlr_rect(m: usize, n: usize, n_min: usize, offdiag_rank: usize, seed: u64) -> Result<HodlrMatrix> {
    let cols = PartitionTree::balanced(n, n_min);
    let rows = PartitionTree::with_level(m, cols.level())?;
    Ok(random_on(rows.leaf_sizes(), cols.leaf_sizes(), offdiag_rank, seed))
}

fn random_on(rows: &[usize], cols: &[usize], k: usize, seed: u64) -> HodlrMatrix {
    let mut stream = 0u64;
    random_rec(rows, cols, k, seed, &mut stream)
}

fn random_rec(rows: &[usize], cols: &[usize], k: usize, seed: u64, stream: &mut u64) -> HodlrMatrix {
    let mut next = || {
        let rng = block_rng(seed, *stream);
        *stream += 1;
        rng
    };
    if rows.len() == 1 {
        return HodlrMatrix::leaf(normal_matrix(&mut next(), rows[0], cols[0]), Shape::General);
    }
    let h = rows.len() / 2;
    let (m1, m2): (usize, usize) = (rows[..h].iter().sum(), rows[h..].iter().sum());
    let (n1, n2): (usize, usize) = (cols[..h].iter().sum(), cols[h..].iter().sum());
    let a11 = random_rec(&rows[..h], &cols[..h], k, seed, stream);
    let a21 = outer_products(&mut block_rng(seed, *stream), m2, n1, k);
    let a12 = outer_products(&mut block_rng(seed, *stream + 1), m1, n2, k);
    *stream += 2;
    let a22 = random_rec(&rows[h..], &cols[h..], k, seed, stream);
    HodlrMatrix::node(a11, a12, a21, a22, Shape::General).expect("consistent partition")
}

fn outer_products(rng: &mut ChaCha8Rng, rows: usize, cols: usize, k: usize) -> LowRankBlock {
    let l = normal_matrix(rng, rows, k);
    let r = normal_matrix(rng, k, cols);
    LowRankBlock::new(l, r)
}

/// Point sets of the three Cauchy test matrices, in increasing order of
/// conditioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CauchyConfig {
    A1,
    A2,
    A3,
}

impl CauchyConfig {
    pub const ALL: [CauchyConfig; 3] = [CauchyConfig::A1, CauchyConfig::A2, CauchyConfig::A3];

    pub fn x_interval(self) -> (f64, f64) {
        (-1.25, 998.25)
    }

    pub fn y_interval(self) -> (f64, f64) {
        match self {
            CauchyConfig::A1 => (-0.7, 998.9),
            CauchyConfig::A2 => (-0.45, 999.15),
            CauchyConfig::A3 => (-0.15, 999.45),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CauchyConfig::A1 => "a1",
            CauchyConfig::A2 => "a2",
            CauchyConfig::A3 => "a3",
        }
    }
}

/// Parameters of a Cauchy matrix `(x_i - y_j)^{-1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchyParams {
    pub n: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub perturb: f64,
    pub seed: u64,
}

impl CauchyParams {
    pub fn new(config: CauchyConfig, n: usize, seed: u64) -> Self {
        Self {
            n,
            x: config.x_interval(),
            y: config.y_interval(),
            perturb: 2e-2,
            seed,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("Cauchy points x_{i} and y_{j} are {gap:e} apart")]
    CoincidentPoints { i: usize, j: usize, gap: f64 },
    #[error(transparent)]
    Hodlr(#[from] hodlr::Error),
}

/// `n` equally spaced points on `[lo, hi]`, each shifted by `+-perturb`
/// with a random sign.
fn perturbed_points(lo: f64, hi: f64, n: usize, perturb: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n)
        .map(|i| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            lo + step * i as f64 + sign * perturb
        })
        .collect()
}

/// The dense Cauchy matrix.
pub fn cauchy_dense(p: &CauchyParams) -> std::result::Result<DMatrix<f64>, GenError> {
    let x = perturbed_points(p.x.0, p.x.1, p.n, p.perturb, &mut block_rng(p.seed, 0));
    let y = perturbed_points(p.y.0, p.y.1, p.n, p.perturb, &mut block_rng(p.seed, 1));
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            if (xi - yj).abs() < 1e-12 {
                return Err(GenError::CoincidentPoints { i, j, gap: (xi - yj).abs() });
            }
        }
    }
    Ok(DMatrix::from_fn(p.n, p.n, |i, j| 1.0 / (x[i] - y[j])))
}

/// Cauchy matrix compressed with off-diagonal threshold `eps * ||A||_2`.
pub fn gen_cauchy(p: &CauchyParams, n_min: usize, eps: f64) -> std::result::Result<HodlrMatrix, GenError> {
    let a = cauchy_dense(p)?;
    let norm = dense_norm_estimate(&a);
    let tree = PartitionTree::balanced(p.n, n_min);
    Ok(HodlrMatrix::from_dense(&a, &tree, &TruncationControl::new(eps * norm))?)
}

/// Tight power-iteration estimate of the norm of a dense matrix.
pub fn dense_norm_estimate(a: &DMatrix<f64>) -> f64 {
    power_iteration_norm(
        |x: &DVector<f64>| a * x,
        |x: &DVector<f64>| a.tr_mul(x),
        a.ncols(),
        PowerIteration {
            max_iterations: 300,
            rel_tol: 1e-12,
        },
    )
}

/// `A = H_1 diag(sigma) H_2^T` with `H_1`, `H_2` products of
/// `reflectors` random Householder reflectors and `sigma` geometrically
/// spaced from 1 down to `1 / kappa`. Every off-diagonal block has rank at
/// most `2 * reflectors`, and `kappa_2(A) = kappa`.
pub fn prescribed_singular_values_dense(n: usize, kappa: f64, reflectors: usize, seed: u64) -> DMatrix<f64> {
    let sigma = DVector::from_fn(n, |i, _| {
        if n == 1 {
            1.0
        } else {
            kappa.powf(-(i as f64) / (n - 1) as f64)
        }
    });
    let mut a = DMatrix::from_diagonal(&sigma);
    for side in 0..2u64 {
        for p in 0..reflectors as u64 {
            let mut rng = block_rng(seed, 2 * p + side);
            let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = &v / v.norm();
            if side == 0 {
                // A <- (I - 2 v v^T) A
                let w = a.tr_mul(&v);
                a.ger(-2.0, &v, &w, 1.0);
            } else {
                // A <- A (I - 2 v v^T)
                let w = &a * &v;
                a.ger(-2.0, &w, &v, 1.0);
            }
        }
    }
    a
}

/// HODLR compression of [`prescribed_singular_values_dense`] at
/// `eps * ||A||_2 = eps`.
pub fn gen_prescribed_singular_values(n: usize, n_min: usize, kappa: f64, seed: u64, eps: f64) -> Result<HodlrMatrix> {
    let a = prescribed_singular_values_dense(n, kappa, 2, seed);
    HodlrMatrix::from_dense(&a, &PartitionTree::balanced(n, n_min), &TruncationControl::new(eps))
}

/// Total number of random streams consumed by a partition with `leaves`
/// leaves: one per leaf and two per internal node.
pub fn stream_count(leaves: usize) -> u64 {
    (leaves + 2 * (leaves - 1)) as u64
}

/// Leaf blocks in pre-order, for inspecting generated matrices.
pub fn leaves(h: &HodlrMatrix) -> Vec<&DMatrix<f64>> {
    let mut out = Vec::new();
    fn walk<'a>(h: &'a HodlrMatrix, out: &mut Vec<&'a DMatrix<f64>>) {
        match &h.block {
            Block::Leaf(m) => out.push(m),
            Block::Split(s) => {
                walk(&s.a11, out);
                walk(&s.a22, out);
            }
        }
    }
    walk(h, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hodlr::dense::singular_values;

    #[test]
    fn same_seed_same_matrix() {
        let a = gen_random_hodlr(300, 50, 1, 7);
        let b = gen_random_hodlr(300, 50, 1, 7);
        assert_eq!(a, b);
        assert_ne!(a, gen_random_hodlr(300, 50, 1, 8));
    }

    #[test]
    fn offdiag_rank_matches_request() {
        assert_eq!(gen_random_hodlr(400, 50, 1, 1).stats().max_offdiag_rank, 1);
        assert_eq!(gen_random_hodlr(400, 50, 3, 1).stats().max_offdiag_rank, 3);
    }

    #[test]
    fn streams_are_distinct_per_block() {
        let h = gen_random_hodlr(64, 16, 1, 3);
        let ls = leaves(&h);
        assert_eq!(ls.len(), 4);
        assert_ne!(ls[0], ls[1]);
        assert_eq!(stream_count(4), 10);
    }

    #[test]
    fn rectangular_generator_shapes() {
        let h = gen_random_hodlr_rect(200, 100, 25, 1, 5).unwrap();
        assert_eq!((h.rows(), h.cols()), (200, 100));
        assert_eq!(h.row_leaf_sizes(), vec![50; 4]);
        assert_eq!(h.col_leaf_sizes(), vec![25; 4]);
    }

    #[test]
    fn cauchy_two_by_two_by_hand() {
        let p = CauchyParams {
            n: 2,
            x: (0.0, 1.0),
            y: (0.5, 1.5),
            perturb: 0.0,
            seed: 0,
        };
        let a = cauchy_dense(&p).unwrap();
        assert_eq!(a[(0, 0)], 1.0 / (0.0 - 0.5));
        assert_eq!(a[(0, 1)], 1.0 / (0.0 - 1.5));
        assert_eq!(a[(1, 0)], 1.0 / (1.0 - 0.5));
        assert_eq!(a[(1, 1)], 1.0 / (1.0 - 1.5));
    }

    #[test]
    fn coincident_points_rejected() {
        let p = CauchyParams {
            n: 3,
            x: (0.0, 2.0),
            y: (0.0, 2.0),
            perturb: 0.0,
            seed: 0,
        };
        assert!(matches!(cauchy_dense(&p), Err(GenError::CoincidentPoints { .. })));
    }

    #[test]
    fn cauchy_points_are_perturbed_grid() {
        let p = CauchyParams::new(CauchyConfig::A1, 50, 9);
        let x = perturbed_points(p.x.0, p.x.1, p.n, p.perturb, &mut block_rng(9, 0));
        let step = (p.x.1 - p.x.0) / 49.0;
        for (i, xi) in x.iter().enumerate() {
            let off = xi - (p.x.0 + step * i as f64);
            assert!((off.abs() - 2e-2).abs() < 1e-9);
        }
    }

    #[test]
    fn prescribed_spectrum_is_exact() {
        let a = prescribed_singular_values_dense(60, 1e4, 2, 11);
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-13);
        assert!((s[59] - 1e-4).abs() < 1e-13);
        let h = gen_prescribed_singular_values(60, 15, 1e4, 11, 1e-14).unwrap();
        assert!(h.stats().max_offdiag_rank <= 4);
    }
}
