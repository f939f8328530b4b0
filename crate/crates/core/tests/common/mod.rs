#![allow(dead_code)]

use hodlr::{HodlrMatrix, PartitionTree, TruncationControl};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Smooth kernel plus noise: numerically low-rank off the diagonal.
pub fn kernel(n: usize, seed: u64) -> DMatrix<f64> {
    let noise = normal(n, n, seed);
    DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()) + 1e-8 * noise[(i, j)])
}

/// Dense matrix that is exactly HODLR with off-diagonal rank <= `k`.
pub fn exact_hodlr(n: usize, n_min: usize, k: usize, seed: u64) -> (DMatrix<f64>, HodlrMatrix) {
    let tree = PartitionTree::balanced(n, n_min);
    let mut m = normal(n, n, seed);
    zero_offdiag(&mut m, &tree, 0, k, seed);
    let h = HodlrMatrix::from_dense(&m, &tree, &TruncationControl::new(1e-13 * m.norm())).unwrap();
    (m, h)
}

fn zero_offdiag(m: &mut DMatrix<f64>, tree: &PartitionTree, r0: usize, k: usize, seed: u64) {
    if let Some((t1, t2)) = tree.split() {
        let (n1, n2) = (t1.size(), t2.size());
        let upper = normal(n1, k, seed.wrapping_add(1)) * normal(k, n2, seed.wrapping_add(2));
        let lower = normal(n2, k, seed.wrapping_add(3)) * normal(k, n1, seed.wrapping_add(4));
        m.view_mut((r0, r0 + n1), (n1, n2)).copy_from(&upper);
        m.view_mut((r0 + n1, r0), (n2, n1)).copy_from(&lower);
        zero_offdiag(m, &t1, r0, k, seed.wrapping_mul(7).wrapping_add(11));
        zero_offdiag(m, &t2, r0 + n1, k, seed.wrapping_mul(13).wrapping_add(5));
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    hodlr::dense::two_norm(m).unwrap()
}
