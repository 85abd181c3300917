//! Graph layers shared by the solvers: mean-aggregating graph convolution,
//! single-head graph attention, trainable node embeddings and linear heads.
//!
//! Node features are laid out one row per node. Layers hold their weights
//! as plain tensors. A model records all of them as tape leaves up front
//! ([`register`]) and each `forward` consumes its own leaves from the
//! iterator in the order `params` lists them, so gradients pair with
//! parameters positionally.

mod embedding;
mod gat;
mod gcn;

use std::sync::Arc;

use rand::Rng;

pub use embedding::{embedding_init, feature_dims, NodeEmbedding};
pub use gat::GatLayer;
pub use gcn::GcnLayer;


use crate::autodiff::{SparseRows, Tape, Tensor, Var};
use crate::error::Result;
use crate::graph::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Elu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self {
            Self::Identity => Ok(x),
            Self::Relu => tape.relu(x),
            Self::Elu => tape.elu(x),
            Self::Sigmoid => tape.sigmoid(x),
            Self::Tanh => tape.tanh(x),
        }
    }
}

/// Iterator over registered parameter leaves.
pub type ParamVars<'a> = std::slice::Iter<'a, Var>;

pub(crate) fn next_var(vars: &mut ParamVars<'_>) -> Var {
    *vars.next().expect("parameter leaves registered in params() order")
}

/// A set of trainable tensors in a fixed order.
pub trait Parameterized<T: Scalar> {
    fn params(&self) -> Vec<&Tensor<T>>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;

    /// Records every parameter as a leaf, in `params` order.
    fn register(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.leaf(p.clone())).collect()
    }

    fn param_values(&self) -> Vec<Tensor<T>> {
        self.params().into_iter().cloned().collect()
    }

    fn set_params(&mut self, values: &[Tensor<T>]) {
        for (p, v) in self.params_mut().into_iter().zip(values) {
            *p = v.clone();
        }
    }
}

/// Fixed sparse operators derived from one graph.
#[derive(Debug, Clone)]
pub struct GraphOps<T> {
    pub mean: Arc<SparseRows<T>>,
    pub sum: Arc<SparseRows<T>>,
    pub closed: Arc<SparseRows<T>>,
}

impl<T: Scalar> GraphOps<T> {
    pub fn new(g: &Graph) -> Self {
        Self {
            mean: Arc::new(SparseRows::neighbor_mean(g)),
            sum: Arc::new(SparseRows::neighbor_sum(g)),
            closed: Arc::new(SparseRows::closed_neighborhoods(g)),
        }
    }
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_init<T: Scalar>(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-bound..=bound)))
}

/// `x W^T` with `W` stored as `out x in`.
pub(crate) fn project<T: Scalar>(tape: &mut Tape<T>, x: Var, weight: Var) -> Result<Var> {
    let wt = tape.transpose(weight)?;
    tape.matmul(x, wt)
}

/// Bias-free linear map, weight `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self { weight: uniform_init(output, input, input, rng) }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: Var, vars: &mut ParamVars<'_>) -> Result<Var> {
        let w = next_var(vars);
        project(tape, x, w)
    }
}

impl<T: Scalar> Parameterized<T> for Linear<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight]
    }
}

/// Backpropagates `root` and applies one Adam step to `model`, whose
/// parameters were registered as `vars`.
pub fn adam_update<T: Scalar, M: Parameterized<T> + ?Sized>(
    model: &mut M,
    state: &mut crate::autodiff::AdamState<T>,
    tape: &Tape<T>,
    vars: &[Var],
    root: Var,
) -> Result<()> {
    let grads = tape.backward(root)?;
    let grads: Vec<Tensor<T>> = vars.iter().map(|&v| grads.wrt(v, tape)).collect();
    state.step(&mut model.params_mut(), &grads)
}

/// Mixes a seed with a stream index (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
