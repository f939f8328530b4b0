use crate::error::{Error, Result};

/// Leaf sizes of a HODLR block partition.
///
/// A tree of level `l` has `2^l` leaves; every internal node splits its
/// leaf range into two halves of equal leaf count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTree {
    level: u32,
    leaf_sizes: Vec<usize>,
    n_min: usize,
}

impl PartitionTree {
    /// Balanced partition of `n` indices: the deepest level whose leaves
    /// still hold at least `n_min` indices, with any remainder spread over
    /// the leftmost leaves.
    pub fn balanced(n: usize, n_min: usize) -> Self {
        assert!(n >= 1 && n_min >= 1, "balanced partition needs n, n_min >= 1");
        let mut level = 0u32;
        while n_min.checked_shl(level + 1).is_some_and(|w| w <= n) {
            level += 1;
        }
        Self {
            level,
            leaf_sizes: even_split(n, 1 << level),
            n_min,
        }
    }

    /// `n` divided as evenly as possible among `2^level` leaves.
    pub fn with_level(n: usize, level: u32) -> Result<Self> {
        let leaves = 1usize
            .checked_shl(level)
            .filter(|&l| l <= n)
            .ok_or_else(|| Error::dims("PartitionTree::with_level", format!("at least 2^{level} indices"), n))?;
        let leaf_sizes = even_split(n, leaves);
        let n_min = leaf_sizes.iter().copied().min().unwrap_or(0);
        Ok(Self {
            level,
            leaf_sizes,
            n_min,
        })
    }

    pub fn from_leaf_sizes(leaf_sizes: Vec<usize>) -> Result<Self> {
        let count = leaf_sizes.len();
        if count == 0 || !count.is_power_of_two() {
            return Err(Error::dims("PartitionTree::from_leaf_sizes", "a power-of-two leaf count", count));
        }
        if leaf_sizes.contains(&0) {
            return Err(Error::dims("PartitionTree::from_leaf_sizes", "positive leaf sizes", "a zero leaf"));
        }
        let n_min = leaf_sizes.iter().copied().min().unwrap_or(0);
        Ok(Self {
            level: count.trailing_zeros(),
            leaf_sizes,
            n_min,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn leaf_sizes(&self) -> &[usize] {
        &self.leaf_sizes
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn size(&self) -> usize {
        self.leaf_sizes.iter().sum()
    }

    /// The two subtrees below the root, or `None` for a single leaf.
    pub fn split(&self) -> Option<(PartitionTree, PartitionTree)> {
        if self.level == 0 {
            return None;
        }
        let half = self.leaf_sizes.len() / 2;
        let make = |sizes: &[usize]| PartitionTree {
            level: self.level - 1,
            leaf_sizes: sizes.to_vec(),
            n_min: self.n_min,
        };
        Some((make(&self.leaf_sizes[..half]), make(&self.leaf_sizes[half..])))
    }
}

fn even_split(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|j| base + usize::from(j < extra)).collect()
}
