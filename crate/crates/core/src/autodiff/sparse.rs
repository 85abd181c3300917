use crate::graph::Graph;
use crate::scalar::Scalar;

/// Constant sparse matrix in compressed-row form, used as a fixed mixing
/// operator on the tape.
#[derive(Debug, Clone)]
pub struct SparseRows<T> {
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Scalar> SparseRows<T> {
    pub fn from_rows(cols: usize, rows: impl IntoIterator<Item = Vec<(usize, T)>>) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        for row in rows {
            for (c, w) in row {
                assert!(c < cols, "column {c} out of range");
                indices.push(c);
                weights.push(w);
            }
            offsets.push(indices.len());
        }
        Self { cols, offsets, indices, weights }
    }

    /// Row-normalized adjacency: row `v` averages its neighbors. Rows of
    /// isolated nodes are empty, so their aggregate is zero.
    pub fn neighbor_mean(g: &Graph) -> Self {
        Self::from_rows(
            g.node_count(),
            (0..g.node_count()).map(|v| {
                let w = T::one() / T::of(g.degree(v).max(1) as f64);
                g.neighbors(v).iter().map(|&u| (u, w)).collect()
            }),
        )
    }

    /// Plain adjacency with unit weights.
    pub fn neighbor_sum(g: &Graph) -> Self {
        Self::from_rows(
            g.node_count(),
            (0..g.node_count()).map(|v| g.neighbors(v).iter().map(|&u| (u, T::one())).collect()),
        )
    }

    /// Each node followed by its neighbors, unit weights: the closed
    /// neighborhoods attention normalizes over.
    pub fn closed_neighborhoods(g: &Graph) -> Self {
        Self::from_rows(
            g.node_count(),
            (0..g.node_count()).map(|v| {
                std::iter::once(v).chain(g.neighbors(v).iter().copied()).map(|u| (u, T::one())).collect()
            }),
        )
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.weights[span].iter().copied())
    }
}
