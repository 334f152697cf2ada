//! Fold partitions of `0..n` into `K` blocks whose sizes differ by at most one.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

/// Contiguous partition: the first `n % k` blocks hold `ceil(n/k)` indices, the rest `floor(n/k)`.
pub fn make_partition(n: usize, k: usize) -> Result<FoldPartition> {
    FoldPartition::contiguous(n, k)
}

impl FoldPartition {
    pub fn contiguous(n: usize, k: usize) -> Result<Self> {
        Self::from_order(n, k, (0..n).collect())
    }

    /// Same block sizes as [`FoldPartition::contiguous`], filled from a random permutation.
    /// Intended for user data whose row order might not be exchangeable.
    pub fn shuffled<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self::from_order(n, k, order)
    }

    fn from_order(n: usize, k: usize, order: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("fold count K={k} must be at least 2")));
        }
        if k > n {
            return Err(Error::invalid(format!("fold count K={k} exceeds n={n}")));
        }
        let base = n / k;
        let extra = n % k;
        let mut blocks = Vec::with_capacity(k);
        let mut assignment = vec![0; n];
        let mut start = 0;
        for j in 0..k {
            let size = base + usize::from(j < extra);
            let mut block = order[start..start + size].to_vec();
            block.sort_unstable();
            for &i in &block {
                assignment[i] = j;
            }
            blocks.push(block);
            start += size;
        }
        Ok(Self {
            n,
            blocks,
            assignment,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, j: usize) -> &[usize] {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Fold containing index `i`.
    pub fn block_of(&self, i: usize) -> Result<usize> {
        self.assignment
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("index {i} out of range 0..{}", self.n)))
    }

    /// Indices outside fold `j`, ascending.
    pub fn complement(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != j).collect()
    }
}
