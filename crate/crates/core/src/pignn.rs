//! Physics-inspired GNN solver: a two-layer GCN whose sigmoid outputs are
//! read as relaxed labels and trained directly on the QUBO energy.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::{
    adam_update, derive_seed, feature_dims, Activation, GcnLayer, GraphOps, Linear, NodeEmbedding, ParamVars,
    Parameterized,
};
use crate::graph::Graph;
use crate::qubo::{build_maxcut_qubo, cut_size, Assignment, QuboMatrix};
use crate::scalar::Scalar;
use crate::stopping::StoppingPolicy;
use crate::trace::TrainTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct PiGnnConfig {
    pub lr: f64,
    pub stopping: StoppingPolicy,
    pub max_epochs: usize,
    pub dropout: f64,
    pub restarts: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for PiGnnConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            stopping: StoppingPolicy::Fuzzy { patience: 100 },
            max_epochs: 100_000,
            dropout: 0.0,
            restarts: 1,
            beta: 0.5,
            seed: 0,
        }
    }
}

/// Default tolerance for strict stopping.
pub const STRICT_TOLERANCE: f64 = 1e-4;

/// Embedding, GCN + ELU + dropout, GCN, linear head, sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct PiGnnModel<T> {
    pub embedding: NodeEmbedding<T>,
    pub first: GcnLayer<T>,
    pub second: GcnLayer<T>,
    pub head: Linear<T>,
    pub dropout: f64,
}

impl<T: Scalar> PiGnnModel<T> {
    pub fn new(n: usize, dropout: f64, seed: u64) -> Self {
        let (d1, d2) = feature_dims(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            embedding: NodeEmbedding::new(n, d1, &mut rng),
            first: GcnLayer::new(d1, d1, Activation::Elu, &mut rng),
            second: GcnLayer::new(d1, d2, Activation::Identity, &mut rng),
            head: Linear::new(d2, 1, &mut rng),
            dropout,
        }
    }

    /// Node probabilities as an `n x 1` column.
    pub fn forward(&self, tape: &mut Tape<T>, ops: &GraphOps<T>, vars: &[Var], dropout_seed: u64) -> Result<Var> {
        let mut it: ParamVars<'_> = vars.iter();
        let x = self.embedding.forward(&mut it);
        let h = self.first.forward(tape, ops, x, &mut it)?;
        let h = tape.dropout(h, self.dropout, dropout_seed)?;
        let h = self.second.forward(tape, ops, h, &mut it)?;
        let logits = self.head.forward(tape, h, &mut it)?;
        tape.sigmoid(logits)
    }
}

impl<T: Scalar> Parameterized<T> for PiGnnModel<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = self.embedding.params();
        out.extend(self.first.params());
        out.extend(self.second.params());
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.embedding.params_mut();
        out.extend(self.first.params_mut());
        out.extend(self.second.params_mut());
        out.extend(self.head.params_mut());
        out
    }
}

/// Relaxed energy `sum_{i <= j} p_i Q_ij p_j` of a probability vector.
pub fn qubo_relaxed_loss<T: Scalar>(tape: &mut Tape<T>, p: Var, q: &Arc<QuboMatrix<T>>) -> Result<Var> {
    debug_assert!(tape.value(p).data().iter().all(|&v| v >= T::zero() && v <= T::one()));
    tape.quadratic_form(p, q)
}

/// `x_i = 1` iff `p_i >= beta`.
pub fn project<T: Scalar>(p: &[T], beta: f64) -> Assignment {
    let beta = T::of(beta);
    let mut x = Assignment::zeros(p.len());
    for (i, &pi) in p.iter().enumerate() {
        x.set(i, pi >= beta);
    }
    x
}

/// Trains on the Max-Cut QUBO of `g` and projects the best-loss epoch.
///
/// With several restarts the one with the largest cut is returned (earliest
/// on ties); the trace is that restart's, with `wall_time` covering all of
/// them.
pub fn train_pignn<T: Scalar>(g: &Graph, config: &PiGnnConfig) -> Result<(Assignment, TrainTrace)> {
    if config.restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    if !(config.beta > 0.0 && config.beta < 1.0) {
        return Err(Error::Config(format!("threshold beta = {} outside (0, 1)", config.beta)));
    }
    let q = Arc::new(build_maxcut_qubo::<T>(g));
    let ops = GraphOps::new(g);
    let started = Instant::now();
    let mut best: Option<(Assignment, usize, TrainTrace)> = None;
    for r in 0..config.restarts {
        let seed = if r == 0 { config.seed } else { derive_seed(config.seed, r as u64) };
        let (x, trace) = train_once(g, &ops, &q, config, seed)?;
        let cut = cut_size(g, &x)?;
        if best.as_ref().map_or(true, |(_, c, _)| cut > *c) {
            best = Some((x, cut, trace));
        }
    }
    let (x, _, mut trace) = best.expect("at least one restart");
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok((x, trace))
}

fn train_once<T: Scalar>(
    g: &Graph,
    ops: &GraphOps<T>,
    q: &Arc<QuboMatrix<T>>,
    config: &PiGnnConfig,
    seed: u64,
) -> Result<(Assignment, TrainTrace)> {
    let mut model = PiGnnModel::<T>::new(g.node_count(), config.dropout, seed);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), model.params());
    let mut monitor = config.stopping.monitor();
    let mut trace = TrainTrace::new();
    let started = Instant::now();

    for epoch in 0..config.max_epochs {
        let mut tape = if config.dropout > 0.0 { Tape::training() } else { Tape::new() };
        let vars = model.register(&mut tape);
        let p = model.forward(&mut tape, ops, &vars, derive_seed(seed, 1 << 32 | epoch as u64))?;
        let loss = qubo_relaxed_loss(&mut tape, p, q)?;
        let value = tape.value(loss).item().as_f64();
        let probs = tape.value(p).data();

        trace.loss.push(value);
        trace.push_cut(cut_size(g, &project(probs, config.beta))?);
        if monitor.record(value) {
            trace.best_loss = value;
            trace.best_epoch = epoch;
            trace.snapshot = probs.iter().map(|v| v.as_f64()).collect();
        }
        trace.epochs = epoch + 1;
        if monitor.should_stop() {
            break;
        }
        adam_update(&mut model, &mut adam, &tape, &vars, loss)?;
    }
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok((project(&trace.snapshot, config.beta), trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Arc<QuboMatrix<f64>> {
        Arc::new(build_maxcut_qubo(&Graph::complete(3)))
    }

    fn loss_at(p: Vec<f64>) -> f64 {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::column(p));
        let l = qubo_relaxed_loss(&mut tape, v, &k3()).unwrap();
        tape.value(l).item()
    }

    #[test]
    fn relaxed_loss_values() {
        assert_eq!(loss_at(vec![1.0, 0.0, 0.0]), -2.0);
        // diagonal terms are p_i^2 Q_ii: 3 * (-2 * 0.25) + 3 * (2 * 0.25)
        assert_eq!(loss_at(vec![0.5, 0.5, 0.5]), 0.0);
        assert_eq!(loss_at(vec![1.0, 0.5, 0.0]), -2.0 - 0.5 + 1.0);
        assert_eq!(loss_at(vec![0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn relaxed_loss_dimension_mismatch() {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::column(vec![0.5, 0.5]));
        assert!(qubo_relaxed_loss(&mut tape, v, &k3()).is_err());
    }

    #[test]
    fn projection_boundary_is_inclusive() {
        assert_eq!(project(&[0.7, 0.5, 0.3], 0.5).bits(), &[1, 1, 0]);
        assert_eq!(project(&[0.5; 4], 0.5).bits(), &[1, 1, 1, 1]);
        assert_eq!(project(&[0.49], 0.5).bits(), &[0]);
    }

    fn quick(seed: u64) -> PiGnnConfig {
        PiGnnConfig { lr: 1e-2, max_epochs: 3000, seed, ..PiGnnConfig::default() }
    }

    #[test]
    fn single_edge_is_cut() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let wins = (0..10)
            .filter(|&s| cut_size(&g, &train_pignn::<f64>(&g, &quick(s)).unwrap().0).unwrap() == 1)
            .count();
        assert!(wins >= 9, "{wins}/10");
    }

    #[test]
    fn triangle_reaches_optimum() {
        let g = Graph::complete(3);
        let wins = (0..10)
            .filter(|&s| cut_size(&g, &train_pignn::<f64>(&g, &quick(s)).unwrap().0).unwrap() == 2)
            .count();
        assert!(wins > 5, "{wins}/10");
    }

    #[test]
    fn snapshot_is_best_loss_epoch() {
        let g = crate::graph::generate_graph(20, 40, 1).unwrap();
        let (x, t) = train_pignn::<f64>(&g, &quick(4)).unwrap();
        let min = t.loss.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(t.best_loss, min);
        assert_eq!(t.loss[t.best_epoch], min);
        assert_eq!(x, project(&t.snapshot, 0.5));
        assert_eq!(t.loss.len(), t.epochs);
    }

    #[test]
    fn runs_are_reproducible() {
        let g = crate::graph::generate_graph(15, 30, 2).unwrap();
        let cfg = PiGnnConfig { dropout: 0.3, max_epochs: 300, ..quick(9) };
        let (a, ta) = train_pignn::<f64>(&g, &cfg).unwrap();
        let (b, tb) = train_pignn::<f64>(&g, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.loss, tb.loss);
    }

    #[test]
    fn strict_stopping_halts_sooner_than_cap() {
        let g = crate::graph::generate_graph(10, 20, 3).unwrap();
        let cfg = PiGnnConfig {
            stopping: StoppingPolicy::strict(10, 1.0).unwrap(),
            ..quick(1)
        };
        let (_, t) = train_pignn::<f64>(&g, &cfg).unwrap();
        assert!(t.epochs < 3000);
    }

    #[test]
    fn single_precision_trains() {
        let g = Graph::complete(3);
        let (x, _) = train_pignn::<f32>(&g, &quick(0)).unwrap();
        assert_eq!(x.len(), 3);
    }
}
