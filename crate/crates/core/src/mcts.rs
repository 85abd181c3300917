//! Monte Carlo tree search over partial labelings, with one shared GNN that
//! is retrained in every rollout while some labels are held fixed.
//!
//! A tree node fixes the labels of the nodes on its root path. The GNN sees
//! the fixed-node mask `X_v` as an extra input channel:
//!
//! ```text
//! h' = GCN(G, E)    h = relu(X_v t1^T + h' t2^T)    P = sigmoid(h t3^T)
//! ```
//!
//! `P` gives the child priors, and a rollout trains the GNN on the QUBO
//! energy with fixed nodes clamped to their labels, then projects the free
//! nodes.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::{
    adam_update, feature_dims, next_var, project as linear, uniform_init, Activation, GcnLayer, GraphOps,
    NodeEmbedding, ParamVars, Parameterized,
};
use crate::graph::Graph;
use crate::pignn::project;
use crate::qubo::{build_maxcut_qubo, cut_size, Assignment, QuboMatrix};
use crate::scalar::Scalar;
use crate::stopping::StoppingPolicy;
use crate::trace::TrainTrace;

/// Width of the perturbation head.
pub const HEAD_WIDTH: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MctsConfig {
    pub lr: f64,
    /// Epochs without a lower rollout loss before a rollout ends.
    pub rollout_patience: usize,
    pub rollout_max_epochs: usize,
    /// Iterations without a larger cut before the search ends.
    pub patience: usize,
    pub max_iterations: usize,
    pub exploration: f64,
    /// Children kept per expansion, by prior. `None` expands every action,
    /// which costs `2 (n - depth)` nodes per expansion; cap it on large
    /// graphs. A small cap keeps only actions the GNN already agrees with,
    /// so rollouts stop perturbing it.
    pub max_children: Option<usize>,
    pub beta: f64,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            rollout_patience: 100,
            rollout_max_epochs: 1000,
            patience: 700,
            max_iterations: 10_000,
            exploration: 1.0,
            max_children: None,
            beta: 0.5,
            seed: 0,
        }
    }
}

impl MctsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("threshold beta = {} outside (0, 1)", self.beta)));
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(Error::Config(format!("exploration constant {} must be finite and >= 0", self.exploration)));
        }
        if self.max_children == Some(0) {
            return Err(Error::Config("max_children must be at least 1".into()));
        }
        StoppingPolicy::fuzzy(self.rollout_patience)?;
        StoppingPolicy::fuzzy(self.patience)?;
        Ok(())
    }
}

/// Embedding, GCN + ELU, GCN, then the mask-aware head.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedGnn<T> {
    pub embedding: NodeEmbedding<T>,
    pub first: GcnLayer<T>,
    pub second: GcnLayer<T>,
    /// `d3 x 1`, applied to the fixed-node mask.
    pub theta1: Tensor<T>,
    /// `d3 x d2`, applied to the GCN output.
    pub theta2: Tensor<T>,
    /// `1 x d3`.
    pub theta3: Tensor<T>,
}

impl<T: Scalar> PerturbedGnn<T> {
    pub fn new(n: usize, seed: u64) -> Self {
        let (d1, d2) = feature_dims(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            embedding: NodeEmbedding::new(n, d1, &mut rng),
            first: GcnLayer::new(d1, d1, Activation::Elu, &mut rng),
            second: GcnLayer::new(d1, d2, Activation::Identity, &mut rng),
            theta1: uniform_init(HEAD_WIDTH, 1, 1, &mut rng),
            theta2: uniform_init(HEAD_WIDTH, d2, d2, &mut rng),
            // Inactive ReLU units leave a node at exactly 0.5, which projects
            // to label 1. A positive weight would push every other node above
            // 0.5 too and collapse the labeling, so the draw takes its
            // negative magnitude.
            theta3: uniform_init(1, HEAD_WIDTH, HEAD_WIDTH, &mut rng).map(|w: T| -w.abs()),
        }
    }

    fn features(&self, tape: &mut Tape<T>, ops: &GraphOps<T>, it: &mut ParamVars<'_>) -> Result<Var> {
        let x = self.embedding.forward(it);
        let h = self.first.forward(tape, ops, x, it)?;
        self.second.forward(tape, ops, h, it)
    }

    /// Probabilities (`n x 1`) given the fixed-node mask.
    pub fn forward(&self, tape: &mut Tape<T>, ops: &GraphOps<T>, vars: &[Var], fixed: &[bool]) -> Result<Var> {
        let mut it: ParamVars<'_> = vars.iter();
        let h = self.features(tape, ops, &mut it)?;
        let (t1, t2, t3) = (next_var(&mut it), next_var(&mut it), next_var(&mut it));
        let mask = tape.leaf(Tensor::column(fixed.iter().map(|&f| if f { T::one() } else { T::zero() }).collect()));
        let a = linear(tape, mask, t1)?;
        let b = linear(tape, h, t2)?;
        let sum = tape.add(a, b)?;
        let h = tape.relu(sum)?;
        let logits = linear(tape, h, t3)?;
        tape.sigmoid(logits)
    }
}

impl<T: Scalar> Parameterized<T> for PerturbedGnn<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = self.embedding.params();
        out.extend(self.first.params());
        out.extend(self.second.params());
        out.extend([&self.theta1, &self.theta2, &self.theta3]);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.embedding.params_mut();
        out.extend(self.first.params_mut());
        out.extend(self.second.params_mut());
        out.extend([&mut self.theta1, &mut self.theta2, &mut self.theta3]);
        out
    }
}

/// Evaluates the GNN without recording gradients for later use.
pub fn gnn_predict<T: Scalar>(gnn: &PerturbedGnn<T>, ops: &GraphOps<T>, fixed: &[bool]) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let vars = gnn.register(&mut tape);
    let p = gnn.forward(&mut tape, ops, &vars, fixed)?;
    Ok(tape.value(p).data().to_vec())
}

/// QUBO energy of `P` with the fixed nodes clamped to `labels`.
///
/// Fixed pairs contribute the constant `x_i Q_ij x_j`, mixed pairs
/// `x_i Q_ij P_j` and free pairs `P_i Q_ij P_j`, so no gradient reaches `P`
/// at fixed nodes.
pub fn perturbed_loss<T: Scalar>(
    tape: &mut Tape<T>,
    p: Var,
    q: &Arc<QuboMatrix<T>>,
    fixed: &[bool],
    labels: &Assignment,
) -> Result<Var> {
    let n = q.dim();
    if fixed.len() != n || labels.len() != n {
        return Err(Error::Dimension { expected: n, actual: fixed.len().min(labels.len()) });
    }
    let free = tape.leaf(Tensor::column(fixed.iter().map(|&f| if f { T::zero() } else { T::one() }).collect()));
    let clamped = tape.leaf(Tensor::column(
        (0..n).map(|i| if fixed[i] && labels.get(i) == 1 { T::one() } else { T::zero() }).collect(),
    ));
    let masked = tape.mul(p, free)?;
    let mixed = tape.add(masked, clamped)?;
    tape.quadratic_form(mixed, q)
}

/// One state of the search: the labels fixed along the root path plus
/// visit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub parent: Option<usize>,
    /// `(node, label)` fixed by the edge from the parent.
    pub action: Option<(usize, u8)>,
    pub depth: usize,
    /// Sum of rollout cuts through this state.
    pub w: f64,
    pub v: u64,
    pub prior: f64,
    /// `None` until expanded.
    pub children: Option<Vec<usize>>,
    /// Rollouts started at this state.
    pub rollouts: u64,
}

impl SearchNode {
    fn root() -> Self {
        Self { parent: None, action: None, depth: 0, w: 0.0, v: 0, prior: 1.0, children: None, rollouts: 0 }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.v > 0).then(|| self.w / self.v as f64)
    }
}

/// `w/v + alpha * prior * sqrt(ln(parent_v) / v)`, infinite for unvisited
/// children.
pub fn ucb(child: &SearchNode, parent_visits: u64, exploration: f64) -> f64 {
    debug_assert!(parent_visits >= 1);
    if child.v == 0 {
        return f64::INFINITY;
    }
    let v = child.v as f64;
    child.w / v + exploration * child.prior * ((parent_visits as f64).ln() / v).sqrt()
}

/// Arena of search nodes; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    n: usize,
}

impl SearchTree {
    pub fn new(n: usize) -> Self {
        Self { nodes: vec![SearchNode::root()], n }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_terminal(&self, id: usize) -> bool {
        self.nodes[id].depth == self.n
    }

    /// Node ids from `id` up to the root.
    pub fn path_to_root(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path
    }

    /// Fixed-node mask and labels of a state.
    pub fn fixed_labels(&self, id: usize) -> (Vec<bool>, Assignment) {
        let mut mask = vec![false; self.n];
        let mut labels = Assignment::zeros(self.n);
        for &k in &self.path_to_root(id) {
            if let Some((node, label)) = self.nodes[k].action {
                mask[node] = true;
                labels.set(node, label == 1);
            }
        }
        (mask, labels)
    }

    /// Adds children for the `(unlabeled node, label)` actions with the
    /// largest priors. `probs` are the GNN outputs under this state's mask.
    pub fn expand(&mut self, id: usize, probs: &[f64], max_children: Option<usize>) -> &[usize] {
        if self.nodes[id].children.is_none() {
            let (mask, _) = self.fixed_labels(id);
            let mut actions: Vec<(usize, u8, f64)> = (0..self.n)
                .filter(|&i| !mask[i])
                .flat_map(|i| [(i, 1u8, probs[i]), (i, 0u8, 1.0 - probs[i])])
                .collect();
            // larger prior first, then lower node, label 1 before 0
            actions.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(b.1.cmp(&a.1)));
            actions.truncate(max_children.unwrap_or(usize::MAX));
            let depth = self.nodes[id].depth + 1;
            let mut ids = Vec::with_capacity(actions.len());
            for (node, label, prior) in actions {
                ids.push(self.nodes.len());
                self.nodes.push(SearchNode {
                    parent: Some(id),
                    action: Some((node, label)),
                    depth,
                    w: 0.0,
                    v: 0,
                    prior,
                    children: None,
                    rollouts: 0,
                });
            }
            self.nodes[id].children = Some(ids);
        }
        self.nodes[id].children.as_deref().unwrap_or(&[])
    }

    /// Child with the largest UCB; ties to the larger prior, then the lower
    /// node index.
    pub fn best_child(&self, id: usize, exploration: f64) -> Option<usize> {
        let parent_v = self.nodes[id].v.max(1);
        let key = |c: usize| {
            let node = &self.nodes[c];
            (ucb(node, parent_v, exploration), node.prior, node.action.map_or(0, |a| a.0))
        };
        self.nodes[id].children.as_ref()?.iter().copied().reduce(|best, c| {
            let (u, p, i) = key(c);
            let (bu, bp, bi) = key(best);
            let better = u.total_cmp(&bu).then(p.total_cmp(&bp)).then(bi.cmp(&i)).is_gt();
            if better {
                c
            } else {
                best
            }
        })
    }

    /// Adds one visit and `reward` to every state from `leaf` to the root.
    pub fn backpropagate(&mut self, leaf: usize, reward: f64) {
        self.nodes[leaf].rollouts += 1;
        for k in self.path_to_root(leaf) {
            self.nodes[k].v += 1;
            self.nodes[k].w += reward;
        }
    }
}

/// Search state: the tree, the shared GNN and its optimizer.
pub struct Mcts<T: Scalar> {
    graph: Graph,
    config: MctsConfig,
    q: Arc<QuboMatrix<T>>,
    ops: GraphOps<T>,
    pub gnn: PerturbedGnn<T>,
    adam: AdamState<T>,
    pub tree: SearchTree,
    best: Option<(Assignment, usize)>,
    since_best: usize,
    pub trace: TrainTrace,
    iterations: usize,
}

/// Result of completing one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub cut: usize,
    pub assignment: Assignment,
    pub epochs: usize,
    pub best_loss: f64,
}

impl<T: Scalar> Mcts<T> {
    pub fn new(g: &Graph, config: &MctsConfig) -> Result<Self> {
        config.validate()?;
        let ops = GraphOps::new(g);
        let gnn = PerturbedGnn::new(g.node_count(), config.seed);
        let adam = AdamState::new(AdamConfig::with_lr(config.lr), gnn.params());
        Ok(Self {
            graph: g.clone(),
            config: config.clone(),
            q: Arc::new(build_maxcut_qubo(g)),
            ops,
            gnn,
            adam,
            tree: SearchTree::new(g.node_count()),
            best: None,
            since_best: 0,
            trace: TrainTrace::new(),
            iterations: 0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn best(&self) -> Option<(&Assignment, usize)> {
        self.best.as_ref().map(|(x, c)| (x, *c))
    }

    /// Descends from the root by UCB, expanding on the way, to the first
    /// unvisited or terminal state.
    pub fn select_path(&mut self) -> Result<usize> {
        let mut id = 0;
        loop {
            if self.tree.node(id).v == 0 || self.tree.is_terminal(id) {
                return Ok(id);
            }
            if self.tree.node(id).children.is_none() {
                let (mask, _) = self.tree.fixed_labels(id);
                let probs: Vec<f64> = gnn_predict(&self.gnn, &self.ops, &mask)?.iter().map(|p| p.as_f64()).collect();
                self.tree.expand(id, &probs, self.config.max_children);
            }
            match self.tree.best_child(id, self.config.exploration) {
                Some(c) => id = c,
                None => return Ok(id),
            }
        }
    }

    /// Trains the shared GNN with the state's labels fixed and completes the
    /// labeling from the lowest-loss epoch.
    pub fn rollout(&mut self, id: usize) -> Result<Rollout> {
        let (mask, labels) = self.tree.fixed_labels(id);
        if mask.iter().all(|&f| f) {
            let cut = cut_size(&self.graph, &labels)?;
            return Ok(Rollout { cut, assignment: labels, epochs: 0, best_loss: f64::NAN });
        }
        let mut monitor = StoppingPolicy::fuzzy(self.config.rollout_patience)?.monitor();
        let mut snapshot = Vec::new();
        let mut epochs = 0;
        for _ in 0..self.config.rollout_max_epochs {
            let mut tape = Tape::new();
            let vars = self.gnn.register(&mut tape);
            let p = self.gnn.forward(&mut tape, &self.ops, &vars, &mask)?;
            let loss = perturbed_loss(&mut tape, p, &self.q, &mask, &labels)?;
            epochs += 1;
            if monitor.record(tape.value(loss).item().as_f64()) {
                snapshot = tape.value(p).data().to_vec();
            }
            if monitor.should_stop() {
                break;
            }
            adam_update(&mut self.gnn, &mut self.adam, &tape, &vars, loss)?;
        }
        let mut x = project(&snapshot, self.config.beta);
        for i in (0..mask.len()).filter(|&i| mask[i]) {
            x.set(i, labels.get(i) == 1);
        }
        let cut = cut_size(&self.graph, &x)?;
        Ok(Rollout { cut, assignment: x, epochs, best_loss: monitor.best().unwrap_or(f64::NAN) })
    }

    /// One select, expand, rollout, backpropagate cycle.
    pub fn step(&mut self) -> Result<Rollout> {
        let leaf = self.select_path()?;
        let r = self.rollout(leaf)?;
        self.tree.backpropagate(leaf, r.cut as f64);
        self.iterations += 1;
        if self.best.as_ref().map_or(true, |(_, c)| r.cut > *c) {
            self.best = Some((r.assignment.clone(), r.cut));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.trace.loss.push(r.best_loss);
        if r.best_loss < self.trace.best_loss {
            self.trace.best_loss = r.best_loss;
            self.trace.best_epoch = self.iterations - 1;
        }
        self.trace.push_cut(r.cut);
        self.trace.epochs = self.iterations;
        Ok(r)
    }

    pub fn should_stop(&self) -> bool {
        self.iterations >= self.config.max_iterations || (self.best.is_some() && self.since_best >= self.config.patience)
    }

    pub fn run(&mut self) -> Result<()> {
        let started = Instant::now();
        while !self.should_stop() {
            self.step()?;
        }
        self.trace.wall_time += started.elapsed().as_secs_f64();
        Ok(())
    }

    pub fn into_result(self) -> (Assignment, TrainTrace) {
        let n = self.graph.node_count();
        let x = self.best.map_or_else(|| Assignment::zeros(n), |(x, _)| x);
        (x, self.trace)
    }
}

/// Runs the search to termination and returns the best labeling found.
pub fn run_mcts<T: Scalar>(g: &Graph, config: &MctsConfig) -> Result<(Assignment, TrainTrace)> {
    let mut search = Mcts::<T>::new(g, config)?;
    search.run()?;
    Ok(search.into_result())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_graph;
    use crate::pignn::qubo_relaxed_loss;
    use crate::qubo::hamiltonian;
    use approx::assert_relative_eq;

    fn zeroed(n: usize) -> PerturbedGnn<f64> {
        let mut g = PerturbedGnn::new(n, 0);
        g.theta3 = Tensor::zeros(1, HEAD_WIDTH);
        g
    }

    #[test]
    fn zero_head_gives_half() {
        let g = Graph::complete(4);
        let p = gnn_predict(&zeroed(4), &GraphOps::new(&g), &[true, false, false, true]).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mask_changes_prediction() {
        let g = generate_graph(8, 12, 0).unwrap();
        let ops = GraphOps::new(&g);
        let mut gnn = PerturbedGnn::<f64>::new(8, 1);
        gnn.theta1 = Tensor::scalar(2.0);
        gnn.theta2 = Tensor::zeros(1, gnn.theta2.cols());
        gnn.theta3 = Tensor::scalar(1.0);
        let off = gnn_predict(&gnn, &ops, &[false; 8]).unwrap();
        let on = gnn_predict(&gnn, &ops, &[true; 8]).unwrap();
        assert!(off.iter().all(|&p| p == 0.5));
        for p in on {
            assert_relative_eq!(p, 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
        }
    }

    #[test]
    fn predictions_in_open_interval() {
        let g = generate_graph(30, 60, 2).unwrap();
        let p = gnn_predict(&PerturbedGnn::<f64>::new(30, 2), &GraphOps::new(&g), &[false; 30]).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    fn loss_of(q: &Arc<QuboMatrix<f64>>, p: Vec<f64>, fixed: &[bool], x: &Assignment) -> (f64, Tensor<f64>) {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::column(p));
        let l = perturbed_loss(&mut tape, v, q, fixed, x).unwrap();
        let grad = tape.backward(l).unwrap().wrt(v, &tape);
        (tape.value(l).item(), grad)
    }

    #[test]
    fn triangle_with_one_fixed_node() {
        // fixed pair terms: none; mixed: 2*0.5 + 2*0.5; free: -2*0.25 * 2 + 2*0.25
        let q = Arc::new(build_maxcut_qubo(&Graph::complete(3)));
        let x = Assignment::from_bits(vec![1, 0, 0]).unwrap();
        let (l, _) = loss_of(&q, vec![0.9, 0.5, 0.5], &[true, false, false], &x);
        assert_relative_eq!(l, -2.0 + 2.0 - 0.5, epsilon = 1e-15);
    }

    #[test]
    fn no_fixed_nodes_is_relaxed_loss() {
        for seed in 0..10 {
            let g = generate_graph(9, 14, seed).unwrap();
            let q = Arc::new(build_maxcut_qubo(&g));
            let p: Vec<f64> = (0..9).map(|i| ((i as f64 + seed as f64) * 0.37).sin().abs()).collect();
            let (l, _) = loss_of(&q, p.clone(), &[false; 9], &Assignment::zeros(9));
            let mut tape = Tape::new();
            let v = tape.leaf(Tensor::column(p));
            let r = qubo_relaxed_loss(&mut tape, v, &q).unwrap();
            assert_relative_eq!(l, tape.value(r).item(), epsilon = 1e-12);
        }
    }

    #[test]
    fn all_fixed_is_hamiltonian_with_zero_gradient() {
        for seed in 0..10 {
            let g = generate_graph(9, 14, seed).unwrap();
            let q = Arc::new(build_maxcut_qubo(&g));
            let x = Assignment::from_code(seed * 37 + 5, 9);
            let (l, grad) = loss_of(&q, vec![0.3; 9], &[true; 9], &x);
            assert_eq!(l, hamiltonian(&q, &x).unwrap());
            assert!(grad.data().iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn ucb_values() {
        let child = SearchNode { w: 10.0, v: 2, prior: 0.5, ..SearchNode::root() };
        assert_relative_eq!(ucb(&child, 8, 1.0), 5.0 + 0.5 * (8f64.ln() / 2.0).sqrt(), epsilon = 1e-12);
        assert!((ucb(&child, 8, 1.0) - 5.5098).abs() < 1e-3);
        assert_eq!(ucb(&child, 8, 0.0), 5.0);
        assert_eq!(ucb(&SearchNode::root(), 8, 1.0), f64::INFINITY);
    }

    #[test]
    fn full_expansion_of_triangle_root() {
        let mut tree = SearchTree::new(3);
        let kids = tree.expand(0, &[0.7, 0.5, 0.2], None).to_vec();
        assert_eq!(kids.len(), 6);
        for i in 0..3 {
            let sum: f64 =
                kids.iter().map(|&k| tree.node(k)).filter(|c| c.action.unwrap().0 == i).map(|c| c.prior).sum();
            assert_relative_eq!(sum, 1.0);
        }
        // capped expansion keeps the top priors
        let mut tree = SearchTree::new(3);
        let kids = tree.expand(0, &[0.7, 0.5, 0.2], Some(2)).to_vec();
        let actions: Vec<_> = kids.iter().map(|&k| tree.node(k).action.unwrap()).collect();
        assert_eq!(actions, vec![(2, 0), (0, 1)]);
    }

    #[test]
    fn terminal_state_has_no_children() {
        let mut tree = SearchTree::new(1);
        let kid = tree.expand(0, &[0.5], None)[0];
        assert!(tree.is_terminal(kid));
        assert!(tree.expand(kid, &[0.5], None).is_empty());
    }

    #[test]
    fn selection_follows_larger_ucb() {
        let mut tree = SearchTree::new(2);
        let kids = tree.expand(0, &[0.5, 0.5], None).to_vec();
        tree.nodes[0].v = 8;
        for (k, (w, v)) in kids.iter().zip([(10.0, 2), (6.0, 2), (1.0, 2), (1.0, 2)]) {
            tree.nodes[*k].w = w;
            tree.nodes[*k].v = v;
        }
        assert_eq!(tree.best_child(0, 1.0), Some(kids[0]));
        tree.nodes[kids[3]].v = 0;
        assert_eq!(tree.best_child(0, 1.0), Some(kids[3]));
    }

    #[test]
    fn backpropagation_walks_the_path() {
        let mut tree = SearchTree::new(3);
        let a = tree.expand(0, &[0.5; 3], None)[0];
        let b = tree.expand(a, &[0.5; 3], None)[0];
        tree.backpropagate(b, 2.0);
        for k in [0, a, b] {
            assert_eq!((tree.node(k).v, tree.node(k).w), (1, 2.0));
        }
        assert_eq!(tree.node(b).depth, 2);
        let (mask, _) = tree.fixed_labels(b);
        assert_eq!(mask.iter().filter(|&&f| f).count(), 2);
    }

    fn quick(seed: u64) -> MctsConfig {
        MctsConfig { patience: 30, max_iterations: 200, rollout_max_epochs: 300, seed, ..MctsConfig::default() }
    }

    #[test]
    fn fresh_root_is_selected_first() {
        let g = Graph::complete(3);
        let mut s = Mcts::<f64>::new(&g, &quick(0)).unwrap();
        assert_eq!(s.select_path().unwrap(), 0);
    }

    #[test]
    fn fully_labeled_rollout_needs_no_training() {
        let g = Graph::new(1, []).unwrap();
        let mut s = Mcts::<f64>::new(&g, &quick(0)).unwrap();
        let kid = s.tree.expand(0, &[0.5], None)[0];
        let before = s.gnn.clone();
        let r = s.rollout(kid).unwrap();
        assert_eq!((r.cut, r.epochs), (0, 0));
        assert_eq!(s.gnn, before);
    }

    #[test]
    fn triangle_rollouts_with_fixed_node() {
        let g = Graph::complete(3);
        let mut s = Mcts::<f64>::new(&g, &quick(3)).unwrap();
        let kid = s.tree.expand(0, &[0.5; 3], None)[0];
        for _ in 0..5 {
            let r = s.rollout(kid).unwrap();
            assert!(r.cut <= 2);
            assert_eq!(r.cut, cut_size(&g, &r.assignment).unwrap());
        }
    }

    #[test]
    fn small_graphs_reach_optimum() {
        let triangle = Graph::complete(3);
        let wins = (0..10).filter(|&s| run_mcts::<f64>(&triangle, &quick(s)).unwrap().1.final_best_cut() == 2).count();
        assert!(wins >= 9, "{wins}/10");
        let edge = Graph::new(2, [(0, 1)]).unwrap();
        assert_eq!(run_mcts::<f64>(&edge, &quick(0)).unwrap().1.final_best_cut(), 1);
    }

    #[test]
    fn tree_bookkeeping_holds() {
        let g = generate_graph(8, 12, 5).unwrap();
        let mut s = Mcts::<f64>::new(&g, &MctsConfig { max_children: Some(4), ..quick(1) }).unwrap();
        for _ in 0..60 {
            s.step().unwrap();
            assert_eq!(s.tree.root().v as usize, s.iterations());
            for id in 0..s.tree.len() {
                let node = s.tree.node(id);
                let below: u64 = node.children.iter().flatten().map(|&c| s.tree.node(c).v).sum();
                assert_eq!(node.v, below + node.rollouts);
                assert!(node.depth <= 8);
            }
        }
        let mean = s.trace.episode_cut.iter().sum::<usize>() as f64 / s.iterations() as f64;
        assert_relative_eq!(s.tree.root().mean().unwrap(), mean, epsilon = 1e-12);
    }

    #[test]
    fn rollouts_change_the_shared_network() {
        let g = generate_graph(10, 20, 6).unwrap();
        let mut s = Mcts::<f64>::new(&g, &quick(4)).unwrap();
        s.step().unwrap();
        let after_root = s.gnn.param_values();
        s.step().unwrap();
        assert_ne!(s.gnn.param_values(), after_root);
    }

    #[test]
    fn result_is_consistent() {
        let g = generate_graph(12, 20, 7).unwrap();
        let (x, t) = run_mcts::<f64>(&g, &quick(2)).unwrap();
        assert_eq!(cut_size(&g, &x).unwrap(), t.final_best_cut());
        assert!(t.best_cut.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bad_config_is_rejected() {
        let g = Graph::complete(3);
        assert!(Mcts::<f64>::new(&g, &MctsConfig { beta: 1.0, ..MctsConfig::default() }).is_err());
        assert!(Mcts::<f64>::new(&g, &MctsConfig { max_children: Some(0), ..MctsConfig::default() }).is_err());
        assert!(Mcts::<f64>::new(&g, &MctsConfig { exploration: -1.0, ..MctsConfig::default() }).is_err());
    }
}
