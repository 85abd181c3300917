use rand::Rng;

use super::{next_var, project, uniform_init, Activation, GraphOps, ParamVars, Parameterized};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Negative slope of the LeakyReLU applied to attention logits.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Single-head graph attention.
///
/// `h_v' = act(sum_{u in N(v) + v} alpha_vu Theta h_u)` where
/// `alpha_v. = softmax(leaky(z^T [Theta h_v, Theta h_u]))` over the closed
/// neighborhood of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer<T> {
    /// Shared feature transform, `out x in`.
    pub theta: Tensor<T>,
    /// Attention vector `[z_self, z_other]`, `1 x 2out`.
    pub attention: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> GatLayer<T> {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self {
            theta: uniform_init(output, input, input, rng),
            attention: uniform_init(1, 2 * output, 2 * output, rng),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.theta.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.theta.rows()
    }

    pub fn forward(&self, tape: &mut Tape<T>, ops: &GraphOps<T>, h: Var, vars: &mut ParamVars<'_>) -> Result<Var> {
        Ok(self.forward_with_attention(tape, ops, h, vars)?.0)
    }

    /// Like [`forward`](Self::forward), also returning the attention node
    /// whose coefficients can be read with
    /// [`Tape::attention_coefficients`].
    pub fn forward_with_attention(
        &self,
        tape: &mut Tape<T>,
        ops: &GraphOps<T>,
        h: Var,
        vars: &mut ParamVars<'_>,
    ) -> Result<(Var, Var)> {
        let shape = tape.value(h).shape();
        if shape != (ops.closed.rows(), self.input_dim()) {
            return Err(Error::Shape { op: "gat_forward", lhs: (ops.closed.rows(), self.input_dim()), rhs: shape });
        }
        let theta = next_var(vars);
        let z = next_var(vars);
        let transformed = project(tape, h, theta)?;
        let attended = tape.attend(transformed, z, &ops.closed, T::of(ATTENTION_SLOPE))?;
        Ok((self.activation.apply(tape, attended)?, attended))
    }
}

impl<T: Scalar> Parameterized<T> for GatLayer<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.theta, &self.attention]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.theta, &mut self.attention]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(z: [f64; 2]) -> GatLayer<f64> {
        GatLayer {
            theta: Tensor::identity(1),
            attention: Tensor::from_vec(1, 2, z.to_vec()).unwrap(),
            activation: Activation::Identity,
        }
    }

    fn run(layer: &GatLayer<f64>, g: &Graph, h: Tensor<f64>) -> (Tensor<f64>, Vec<f64>) {
        let ops = GraphOps::new(g);
        let mut tape = Tape::new();
        let vars = layer.register(&mut tape);
        let x = tape.leaf(h);
        let (y, att) = layer.forward_with_attention(&mut tape, &ops, x, &mut vars.iter()).unwrap();
        (tape.value(y).clone(), tape.attention_coefficients(att).unwrap().to_vec())
    }

    #[test]
    fn zero_attention_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = GatLayer::<f64>::new(2, 2, Activation::Identity, &mut rng);
        l.attention = Tensor::zeros(1, 4);
        let g = Graph::star(4);
        let (_, alpha) = run(&l, &g, Tensor::from_fn(4, 2, |r, c| (r + 2 * c) as f64));
        // node 0 has 3 neighbors, leaves have 1
        assert!(alpha[..4].iter().all(|&a| (a - 0.25).abs() < 1e-15));
        assert!(alpha[4..].iter().all(|&a| (a - 0.5).abs() < 1e-15));
    }

    #[test]
    fn two_node_closed_form() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let h = Tensor::column(vec![1.0, 2.0]);

        let (out, alpha) = run(&layer([0.5, 1.0]), &g, h.clone());
        // node 0 logits: self 1.5, neighbor 2.5; node 1: self 3.0, neighbor 2.0
        let a00 = 1.0 / (1.0 + 1f64.exp());
        assert_relative_eq!(alpha[0], a00, epsilon = 1e-15);
        assert_relative_eq!(alpha[1], 1.0 - a00, epsilon = 1e-15);
        assert_relative_eq!(out.get(0, 0), a00 + 2.0 * (1.0 - a00), epsilon = 1e-14);
        assert_relative_eq!(out.get(1, 0), 2.0 * (1.0 - a00) + a00, epsilon = 1e-14);

        // negative logits pass through the 0.2 slope: node 0 logits -0.5 -> -0.1 and 0.0
        let (_, alpha) = run(&layer([-1.0, 0.5]), &g, h);
        let a00 = (-0.1f64).exp() / ((-0.1f64).exp() + 1.0);
        assert_relative_eq!(alpha[0], a00, epsilon = 1e-15);
    }

    #[test]
    fn coefficients_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = crate::graph::generate_graph(12, 30, 4).unwrap();
        let l = GatLayer::<f64>::new(3, 4, Activation::Elu, &mut rng);
        let (_, alpha) = run(&l, &g, uniform_init(12, 3, 1, &mut rng));
        let mut k = 0;
        for v in 0..12 {
            let deg = g.degree(v) + 1;
            let s: f64 = alpha[k..k + deg].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(alpha[k..k + deg].iter().all(|&a| a >= 0.0));
            k += deg;
        }
    }
}
