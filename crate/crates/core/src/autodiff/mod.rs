//! Minimal reverse-mode automatic differentiation over dense matrices,
//! with an Adam optimizer and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod sparse;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use sparse::SparseRows;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::sigmoid;
