//! QUBO coefficient matrices, binary assignments and the Max-Cut encoding.
//!
//! A [`QuboMatrix`] stores only the upper triangle (`i <= j`), so the energy
//! of an assignment is `H(x) = sum_{i <= j} x_i Q_ij x_j`.

use std::collections::BTreeMap;

use num_traits::Num;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Sparse upper-triangular QUBO coefficients.
///
/// Generic over any numeric type so that exact integer or rational
/// coefficients can be used alongside floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix<T> {
    n: usize,
    entries: BTreeMap<(usize, usize), T>,
}

impl<T: Num + Copy> QuboMatrix<T> {
    pub fn new(n: usize) -> Self {
        Self { n, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `value` to the coefficient of `x_i x_j`; the pair is reordered so
    /// the stored key has `i <= j`. Entries that cancel to zero are dropped.
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        assert!(i < self.n && j < self.n, "QUBO index ({i}, {j}) out of range for n = {}", self.n);
        let key = (i.min(j), i.max(j));
        let slot = self.entries.entry(key).or_insert_with(T::zero);
        *slot = *slot + value;
        if slot.is_zero() {
            self.entries.remove(&key);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries.get(&(i.min(j), i.max(j))).copied().unwrap_or_else(T::zero)
    }

    /// Stored `(i, j, Q_ij)` triples with `i <= j`, in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries.iter().map(|(&(i, j), &q)| (i, j, q))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Converts coefficients, e.g. from exact integers to floating point.
    pub fn map<U: Num + Copy>(&self, f: impl Fn(T) -> U) -> QuboMatrix<U> {
        let mut out = QuboMatrix::new(self.n);
        for (i, j, q) in self.entries() {
            out.add(i, j, f(q));
        }
        out
    }

    /// For each variable, the stored terms touching it as `(other, Q)`;
    /// the diagonal appears once with `other == i`.
    pub fn incident_terms(&self) -> Vec<Vec<(usize, T)>> {
        let mut out = vec![Vec::new(); self.n];
        for (i, j, q) in self.entries() {
            out[i].push((j, q));
            if i != j {
                out[j].push((i, q));
            }
        }
        out
    }
}

/// Binary decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Assignment(Vec<u8>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidGraph(format!("assignment entry {b} is not binary")));
        }
        Ok(Self(bits))
    }

    /// The `n` low bits of `code`, bit `i` giving `x_i`.
    pub fn from_code(code: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((code >> i) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = u8::from(bit);
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }
}

/// Max-Cut as minimization: `Q_ii = -deg(i)` and `Q_ij = 2` on every edge,
/// so that `H(x) = -cut(x)` for every binary `x`.
pub fn build_maxcut_qubo<T: Num + Copy>(g: &Graph) -> QuboMatrix<T> {
    let two = T::one() + T::one();
    let mut q = QuboMatrix::new(g.node_count());
    for &(u, v) in g.edges() {
        q.add(u, u, T::zero() - T::one());
        q.add(v, v, T::zero() - T::one());
        q.add(u, v, two);
    }
    q
}

/// Exact QUBO energy of a binary assignment.
pub fn hamiltonian<T: Num + Copy>(q: &QuboMatrix<T>, x: &Assignment) -> Result<T> {
    if x.len() != q.dim() {
        return Err(Error::Dimension { expected: q.dim(), actual: x.len() });
    }
    Ok(q
        .entries()
        .filter(|&(i, j, _)| x.get(i) == 1 && x.get(j) == 1)
        .fold(T::zero(), |acc, (_, _, v)| acc + v))
}

/// Number of edges whose endpoints carry different labels.
pub fn cut_size(g: &Graph, x: &Assignment) -> Result<usize> {
    if x.len() != g.node_count() {
        return Err(Error::Dimension { expected: g.node_count(), actual: x.len() });
    }
    Ok(g.edges().iter().filter(|&&(u, v)| x.get(u) != x.get(v)).count())
}
