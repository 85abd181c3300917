//! Minimizing QUBO Hamiltonians over graphs with trainable solvers.
//!
//! Three solvers share one autodiff substrate:
//!
//! - [`pignn`]: a two-layer GCN trained on the relaxed QUBO energy, with
//!   strict and fuzzy early stopping.
//! - [`grl`]: a GAT encoder with an attention decoder that labels nodes one
//!   at a time, trained by policy gradient on incremental QUBO rewards.
//! - [`mcts`]: Monte Carlo tree search over partial labelings whose rollouts
//!   retrain a single shared GNN with the fixed labels folded into the loss.
//!
//! [`oracle`] provides exhaustive and greedy references and [`bench`] drives
//! benchmark suites. Numeric code is generic over [`Scalar`]; the aliases
//! below fix it to `f64`, the precision the solvers are tuned for.

pub mod autodiff;
pub mod bench;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod grl;
pub mod mcts;
pub mod oracle;
pub mod pignn;
pub mod qubo;
pub mod scalar;
pub mod stopping;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{generate_graph, load_graph, save_graph, DegreeStats, Graph};
pub use qubo::{build_maxcut_qubo, cut_size, hamiltonian, Assignment, QuboMatrix};
pub use scalar::Scalar;
pub use stopping::StoppingPolicy;
pub use trace::TrainTrace;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tape64 = autodiff::Tape<f64>;
pub type Qubo64 = QuboMatrix<f64>;
/// Exact integer coefficients, e.g. for the exhaustive oracle.
pub type QuboInt = QuboMatrix<i64>;
pub type PiGnn64 = pignn::PiGnnModel<f64>;
pub type GrlModel64 = grl::GrlModel<f64>;
pub type PerturbedGnn64 = mcts::PerturbedGnn<f64>;


