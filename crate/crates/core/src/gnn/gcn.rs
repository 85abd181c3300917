use rand::Rng;

use super::{next_var, project, uniform_init, Activation, GraphOps, ParamVars, Parameterized};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Graph convolution: `h_v' = act(W * mean_{u in N(v)} h_u + B * h_v)`.
///
/// Nodes without neighbors get a zero neighbor term.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer<T> {
    /// Neighbor transform, `out x in`.
    pub neighbor: Tensor<T>,
    /// Self transform, `out x in`.
    pub own: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> GcnLayer<T> {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self {
            neighbor: uniform_init(output, input, input, rng),
            own: uniform_init(output, input, input, rng),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.neighbor.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.neighbor.rows()
    }

    pub fn forward(&self, tape: &mut Tape<T>, ops: &GraphOps<T>, h: Var, vars: &mut ParamVars<'_>) -> Result<Var> {
        let shape = tape.value(h).shape();
        if shape != (ops.mean.rows(), self.input_dim()) {
            return Err(Error::Shape { op: "gcn_forward", lhs: (ops.mean.rows(), self.input_dim()), rhs: shape });
        }
        let w = next_var(vars);
        let b = next_var(vars);
        let mixed = tape.aggregate(h, &ops.mean)?;
        let from_neighbors = project(tape, mixed, w)?;
        let from_self = project(tape, h, b)?;
        let pre = tape.add(from_neighbors, from_self)?;
        self.activation.apply(tape, pre)
    }
}

impl<T: Scalar> Parameterized<T> for GcnLayer<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.neighbor, &self.own]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.neighbor, &mut self.own]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(layer: &GcnLayer<f64>, g: &Graph, h: Tensor<f64>) -> Tensor<f64> {
        let ops = GraphOps::new(g);
        let mut tape = Tape::new();
        let vars = layer.register(&mut tape);
        let x = tape.leaf(h);
        let y = layer.forward(&mut tape, &ops, x, &mut vars.iter()).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn zero_weights_sigmoid_gives_half() {
        let layer = GcnLayer {
            neighbor: Tensor::zeros(2, 3),
            own: Tensor::zeros(2, 3),
            activation: Activation::Sigmoid,
        };
        let out = run(&layer, &Graph::complete(3), Tensor::filled(3, 3, 0.7));
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn triangle_mean_aggregation() {
        let layer = GcnLayer {
            neighbor: Tensor::identity(3),
            own: Tensor::zeros(3, 3),
            activation: Activation::Identity,
        };
        let out = run(&layer, &Graph::complete(3), Tensor::identity(3));
        assert_eq!(out.row(0), &[0.0, 0.5, 0.5]);
        assert_eq!(out.row(1), &[0.5, 0.0, 0.5]);
        assert_eq!(out.row(2), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn isolated_node_neighbor_term_is_zero() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let layer = GcnLayer {
            neighbor: Tensor::identity(2),
            own: Tensor::zeros(2, 2),
            activation: Activation::Identity,
        };
        let out = run(&layer, &g, Tensor::filled(3, 2, 1.0));
        assert_eq!(out.row(2), &[0.0, 0.0]);
        assert_eq!(out.row(0), &[1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = GcnLayer::<f64>::new(4, 2, Activation::Elu, &mut rng);
        let ops = GraphOps::new(&Graph::complete(3));
        let mut tape = Tape::new();
        let vars = layer.register(&mut tape);
        let x = tape.leaf(Tensor::zeros(3, 5));
        assert!(layer.forward(&mut tape, &ops, x, &mut vars.iter()).is_err());
    }
}
