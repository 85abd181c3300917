use rand::Rng;

use super::{next_var, ParamVars, Parameterized};
use crate::autodiff::{Tensor, Var};
use crate::scalar::Scalar;

/// Feature widths for an `n`-node graph: `d1 = ceil(sqrt n)` below 10^5 nodes
/// and `ceil(cbrt n)` from there on; `d2 = ceil(d1 / 2)`.
pub fn feature_dims(n: usize) -> (usize, usize) {
    let d1 = if n >= 100_000 { ceil_root(n, 3) } else { ceil_root(n, 2) };
    (d1, d1.div_ceil(2))
}

fn ceil_root(n: usize, k: u32) -> usize {
    let mut r = (n as f64).powf(1.0 / k as f64).round() as usize;
    while r.pow(k) < n {
        r += 1;
    }
    while r > 1 && (r - 1).pow(k) >= n {
        r -= 1;
    }
    r.max(1)
}

/// Trainable per-node input features, `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding<T> {
    pub table: Tensor<T>,
}

impl<T: Scalar> NodeEmbedding<T> {
    /// Entries uniform in `[-1, 1]`.
    pub fn new(n: usize, dim: usize, rng: &mut impl Rng) -> Self {
        Self { table: Tensor::from_fn(n, dim, |_, _| T::of(rng.gen_range(-1.0..=1.0))) }
    }

    pub fn forward(&self, vars: &mut ParamVars<'_>) -> Var {
        next_var(vars)
    }
}

impl<T: Scalar> Parameterized<T> for NodeEmbedding<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.table]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.table]
    }
}

/// Seeded `n x d1` embedding with `d1` from [`feature_dims`].
pub fn embedding_init<T: Scalar>(n: usize, seed: u64) -> NodeEmbedding<T> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    NodeEmbedding::new(n, feature_dims(n).0, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_follow_size_rule() {
        assert_eq!(feature_dims(50), (8, 4));
        assert_eq!(feature_dims(3000), (55, 28));
        assert_eq!(feature_dims(49), (7, 4));
        assert_eq!(feature_dims(1), (1, 1));
        assert_eq!(feature_dims(12), (4, 2));
        assert_eq!(feature_dims(100_000), (47, 24));
        assert_eq!(feature_dims(99_999), (317, 159));
    }

    #[test]
    fn embedding_is_seeded() {
        let a = embedding_init::<f64>(50, 5);
        let b = embedding_init::<f64>(50, 5);
        assert_eq!(a, b);
        assert_eq!(a.table.shape(), (50, 8));
        assert_ne!(a, embedding_init::<f64>(50, 6));
    }
}
