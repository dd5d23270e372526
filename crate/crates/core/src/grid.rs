//! Dense `K x M` container indexed by (VUE pair, resource block).

use std::ops::{Index, IndexMut};

/// Row-major grid with one entry per (pair `k`, resource block `m`).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pairs: usize,
    blocks: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(pairs: usize, blocks: usize, value: T) -> Self {
        Self {
            pairs,
            blocks,
            data: vec![value; pairs * blocks],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(pairs: usize, blocks: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(pairs * blocks);
        for k in 0..pairs {
            for m in 0..blocks {
                data.push(f(k, m));
            }
        }
        Self { pairs, blocks, data }
    }

    /// Wraps a row-major vector. Returns `None` on a length mismatch.
    pub fn from_vec(pairs: usize, blocks: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == pairs * blocks).then_some(Self { pairs, blocks, data })
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, k: usize, m: usize) -> usize {
        debug_assert!(k < self.pairs && m < self.blocks);
        k * self.blocks + m
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Iterates `(k, m, value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let blocks = self.blocks;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / blocks, i % blocks, v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            pairs: self.pairs,
            blocks: self.blocks,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.pairs == other.pairs && self.blocks == other.blocks
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (k, m): (usize, usize)) -> &T {
        &self.data[self.offset(k, m)]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (k, m): (usize, usize)) -> &mut T {
        let i = self.offset(k, m);
        &mut self.data[i]
    }
}
