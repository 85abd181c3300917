//! Policy-gradient solver: a three-layer GAT encoder and an attention
//! decoder that labels one node at a time, rewarded by the QUBO terms each
//! labeling completes.
//!
//! An episode starts from the node the encoder's sigmoid head is most
//! confident about. Afterwards every unlabeled node `i` carries the score
//!
//! ```text
//! alpha_i = C tanh( (h_i phi1^T) . (X_v phi3^T + sum_{j in N(i)} h_j phi2^T) / sqrt(d_h) )
//! ```
//!
//! where `X_v` is the labeled-node indicator at the time `i` was last scored.
//! The highest score is taken next and labeled `1` iff `sigmoid(alpha_i) >=
//! beta`; only the neighbors of a freshly labeled node are rescored.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{sigmoid, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::{
    adam_update, feature_dims, project as linear, uniform_init, Activation, GatLayer, GraphOps, Linear,
    NodeEmbedding, ParamVars, Parameterized,
};
use crate::graph::Graph;
use crate::qubo::{build_maxcut_qubo, cut_size, Assignment, QuboMatrix};
use crate::scalar::Scalar;
use crate::stopping::StoppingPolicy;
use crate::trace::TrainTrace;

/// Scale of the random `phi1` initialization relative to `uniform_init`.
pub const QUERY_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct GrlConfig {
    pub lr: f64,
    /// Epochs without a new best cut before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Score clipping constant `C`.
    pub clip: f64,
    pub beta: f64,
    /// Use `log P(a_t)` instead of `P(a_t)` in the policy loss.
    pub log_prob: bool,
    pub seed: u64,
}

impl Default for GrlConfig {
    fn default() -> Self {
        Self { lr: 1e-3, patience: 700, max_epochs: 10_000, clip: 10.0, beta: 0.5, log_prob: false, seed: 0 }
    }
}

/// Decoder weights; `d_h` is the row count of each.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<T> {
    /// `d_h x d`, applied to the scored node.
    pub phi1: Tensor<T>,
    /// `d_h x d`, applied to its neighbors.
    pub phi2: Tensor<T>,
    /// `d_h x n`, applied to the labeled-node indicator.
    pub phi3: Tensor<T>,
    pub clip: T,
}

impl<T: Scalar> DecoderParams<T> {
    /// `phi1` starts near zero, so early scores sit close to the labeling
    /// threshold. Labels of 0 earn no reward and hence no gradient, so a run
    /// that starts or falls into mostly-zero labelings cannot recover. An
    /// exactly zero `phi1` avoids the start but makes all nodes flip together
    /// after the first update on dense graphs; the small spread staggers them.
    pub fn new(n: usize, d: usize, hidden: usize, clip: f64, rng: &mut impl rand::Rng) -> Result<Self> {
        if !(clip > 0.0) {
            return Err(Error::Config(format!("clip constant must be positive, got {clip}")));
        }
        Ok(Self {
            phi1: uniform_init::<T>(hidden, d, d, rng).map(|w| w * T::of(QUERY_INIT_SCALE)),
            phi2: uniform_init(hidden, d, d, rng),
            phi3: uniform_init(hidden, n, n, rng),
            clip: T::of(clip),
        })
    }

    pub fn zeros(n: usize, d: usize, hidden: usize, clip: f64) -> Self {
        Self {
            phi1: Tensor::zeros(hidden, d),
            phi2: Tensor::zeros(hidden, d),
            phi3: Tensor::zeros(hidden, n),
            clip: T::of(clip),
        }
    }

    pub fn hidden(&self) -> usize {
        self.phi1.rows()
    }
}

/// Embedding, three GAT layers (ELU between them), a sigmoid head for the
/// first pick, and the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct GrlModel<T> {
    pub embedding: NodeEmbedding<T>,
    pub layers: [GatLayer<T>; 3],
    pub head: Linear<T>,
    pub decoder: DecoderParams<T>,
}

impl<T: Scalar> GrlModel<T> {
    pub fn new(n: usize, clip: f64, seed: u64) -> Result<Self> {
        let (d1, d2) = feature_dims(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            embedding: NodeEmbedding::new(n, d1, &mut rng),
            layers: [
                GatLayer::new(d1, d1, Activation::Elu, &mut rng),
                GatLayer::new(d1, d2, Activation::Elu, &mut rng),
                GatLayer::new(d2, d2, Activation::Identity, &mut rng),
            ],
            // zero head: p0 = 0.5, so the first node is 0 and labeled 1
            head: Linear { weight: Tensor::zeros(1, d2) },
            decoder: DecoderParams::new(n, d2, d2, clip, &mut rng)?,
        })
    }

    /// Node features `H` (`n x d2`) and first-pick probabilities `p0` (`n x 1`).
    pub fn encode(&self, tape: &mut Tape<T>, ops: &GraphOps<T>, vars: &[Var]) -> Result<(Var, Var)> {
        let mut it: ParamVars<'_> = vars.iter();
        let mut h = self.embedding.forward(&mut it);
        for layer in &self.layers {
            h = layer.forward(tape, ops, h, &mut it)?;
        }
        let logits = self.head.forward(tape, h, &mut it)?;
        Ok((h, tape.sigmoid(logits)?))
    }

    /// Leaves of `phi1`, `phi2`, `phi3` within `vars`.
    fn decoder_vars(&self, vars: &[Var]) -> [Var; 3] {
        let k = vars.len();
        [vars[k - 3], vars[k - 2], vars[k - 1]]
    }
}

impl<T: Scalar> Parameterized<T> for GrlModel<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = self.embedding.params();
        for l in &self.layers {
            out.extend(l.params());
        }
        out.extend(self.head.params());
        out.extend([&self.decoder.phi1, &self.decoder.phi2, &self.decoder.phi3]);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.embedding.params_mut();
        for l in &mut self.layers {
            out.extend(l.params_mut());
        }
        out.extend(self.head.params_mut());
        out.extend([&mut self.decoder.phi1, &mut self.decoder.phi2, &mut self.decoder.phi3]);
        out
    }
}

/// One labeling decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub node: usize,
    pub label: u8,
    pub reward: T,
    /// Probability of the chosen label.
    pub prob: T,
    /// Decoder score, absent for the encoder-chosen first node.
    pub score: Option<T>,
    /// Number of nodes labeled when this node's score was computed.
    pub labeled_before: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<T> {
    pub steps: Vec<Step<T>>,
    pub assignment: Assignment,
}

impl<T: Scalar> EpisodeTrace<T> {
    pub fn total_reward(&self) -> T {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// The labeled-node indicator after all steps.
    pub fn labeled_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.assignment.len()];
        for s in &self.steps {
            mask[s.node] = true;
        }
        mask
    }
}

/// Sum of the QUBO terms completed by labeling `node`: its diagonal term and
/// every term shared with an already-labeled variable.
///
/// `incident` is [`QuboMatrix::incident_terms`]; `labeled` must not yet
/// contain `node`.
pub fn incremental_reward<T: Scalar>(
    incident: &[Vec<(usize, T)>],
    labeled: &[bool],
    x: &Assignment,
    node: usize,
) -> T {
    assert!(!labeled[node], "node {node} labeled twice; its terms would be counted again");
    if x.get(node) == 0 {
        return T::zero();
    }
    incident[node]
        .iter()
        .filter(|&&(j, _)| j == node || (labeled[j] && x.get(j) == 1))
        .map(|&(_, q)| q)
        .sum()
}

/// `C tanh(a . (xp + nb) / sqrt(d_h))`.
pub fn attention_score<T: Scalar>(own: &[T], labeled_context: &[T], neighbor_context: &[T], clip: T) -> T {
    let scale = T::of((own.len().max(1) as f64).sqrt());
    let dot: T = own
        .iter()
        .zip(labeled_context.iter().zip(neighbor_context))
        .map(|(&a, (&x, &nb))| a * (x + nb))
        .sum();
    clip * (dot / scale).tanh()
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    node: usize,
    version: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // max score first, then lowest node index
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.node.cmp(&self.node))
    }
}

/// Max-heap over node scores with lazy invalidation: a rescored node gets a
/// new version and older heap entries for it are skipped on pop.
#[derive(Debug, Clone)]
pub struct AttentionQueue {
    heap: BinaryHeap<Entry>,
    version: Vec<u32>,
    scores: Vec<f64>,
}

impl AttentionQueue {
    pub fn new(n: usize) -> Self {
        Self { heap: BinaryHeap::with_capacity(2 * n), version: vec![0; n], scores: vec![f64::NEG_INFINITY; n] }
    }

    pub fn push(&mut self, node: usize, score: f64) {
        // -0.0 and 0.0 must tie
        let score = score + 0.0;
        self.version[node] += 1;
        self.scores[node] = score;
        self.heap.push(Entry { score, node, version: self.version[node] });
    }

    /// Current score of `node`.
    pub fn score(&self, node: usize) -> f64 {
        self.scores[node]
    }

    /// Highest-scoring node not in `labeled`, ties to the lowest index.
    pub fn pop(&mut self, labeled: &[bool]) -> Option<usize> {
        while let Some(e) = self.heap.pop() {
            if !labeled[e.node] && e.version == self.version[e.node] {
                return Some(e.node);
            }
        }
        None
    }
}

/// Node rows of `H phi1^T`, `(A_sum H) phi2^T`, and the columns of `phi3`.
struct DecoderTables<T> {
    own: Tensor<T>,
    neighbor: Tensor<T>,
    indicator: Tensor<T>,
}

impl<T: Scalar> DecoderTables<T> {
    fn new(h: &Tensor<T>, g: &Graph, dec: &DecoderParams<T>) -> Result<Self> {
        let own = h.matmul(&dec.phi1.transpose())?;
        let mut summed = Tensor::zeros(h.rows(), h.cols());
        for v in 0..g.node_count() {
            for &u in g.neighbors(v) {
                for (o, &x) in summed.row_mut(v).iter_mut().zip(h.row(u)) {
                    *o += x;
                }
            }
        }
        let neighbor = summed.matmul(&dec.phi2.transpose())?;
        Ok(Self { own, neighbor, indicator: dec.phi3.transpose() })
    }
}

/// Greedy decoding of one full episode from encoder outputs.
///
/// `h` is `n x d`, `p0` holds the encoder's first-pick probabilities.
pub fn decode_episode<T: Scalar>(
    h: &Tensor<T>,
    p0: &[T],
    g: &Graph,
    q: &QuboMatrix<T>,
    dec: &DecoderParams<T>,
    beta: f64,
) -> Result<EpisodeTrace<T>> {
    let n = g.node_count();
    if h.rows() != n || p0.len() != n || q.dim() != n || dec.phi3.cols() != n {
        return Err(Error::Dimension { expected: n, actual: h.rows().min(p0.len()).min(q.dim()) });
    }
    let mut steps = Vec::with_capacity(n);
    let mut x = Assignment::zeros(n);
    if n == 0 {
        return Ok(EpisodeTrace { steps, assignment: x });
    }
    let tables = DecoderTables::new(h, g, dec)?;
    let incident = q.incident_terms();
    let beta_t = T::of(beta);
    let mut labeled = vec![false; n];
    let mut context = vec![T::zero(); dec.hidden()];
    let mut scored_at = vec![0usize; n];
    let mut queue = AttentionQueue::new(n);

    let score = |context: &[T], i: usize| {
        attention_score(tables.own.row(i), context, tables.neighbor.row(i), dec.clip)
    };
    for i in 0..n {
        queue.push(i, score(&context, i).as_f64());
    }

    let confidence = |p: T| p.max(T::one() - p);
    let first = (1..n).fold(0, |best, i| if confidence(p0[i]) > confidence(p0[best]) { i } else { best });

    let mut next = Some((first, None));
    while let Some((node, alpha)) = next {
        let p = match alpha {
            Some(a) => sigmoid(a),
            None => p0[node],
        };
        let label = p >= beta_t;
        x.set(node, label);
        let reward = incremental_reward(&incident, &labeled, &x, node);
        labeled[node] = true;
        steps.push(Step {
            node,
            label: u8::from(label),
            reward,
            prob: if label { p } else { T::one() - p },
            score: alpha,
            labeled_before: scored_at[node],
        });
        for (c, &w) in context.iter_mut().zip(tables.indicator.row(node)) {
            *c += w;
        }
        for &u in g.neighbors(node) {
            if !labeled[u] {
                scored_at[u] = steps.len();
                queue.push(u, score(&context, u).as_f64());
            }
        }
        next = queue.pop(&labeled).map(|i| {
            if cfg!(debug_assertions) && n <= 100 {
                let scan = (0..n)
                    .filter(|&j| !labeled[j])
                    .fold(None, |b: Option<usize>, j| match b {
                        Some(b) if queue.score(b) >= queue.score(j) => Some(b),
                        _ => Some(j),
                    });
                debug_assert_eq!(scan, Some(i), "heap pick disagrees with linear scan");
            }
            let a = score_at(&tables, dec, &steps, scored_at[i], i);
            (i, Some(a))
        });
    }
    Ok(EpisodeTrace { steps, assignment: x })
}

/// Recomputes node `i`'s score with the indicator of the first `k` labeled
/// nodes, matching the value it was queued with.
fn score_at<T: Scalar>(tables: &DecoderTables<T>, dec: &DecoderParams<T>, steps: &[Step<T>], k: usize, i: usize) -> T {
    let mut context = vec![T::zero(); dec.hidden()];
    for s in &steps[..k] {
        for (c, &w) in context.iter_mut().zip(tables.indicator.row(s.node)) {
            *c += w;
        }
    }
    attention_score(tables.own.row(i), &context, tables.neighbor.row(i), dec.clip)
}

/// `sum_t r_t * P(a_t)` (or `log P(a_t)`) for a fixed episode, differentiable
/// through the encoder and decoder.
pub fn policy_loss<T: Scalar>(
    tape: &mut Tape<T>,
    model: &GrlModel<T>,
    ops: &GraphOps<T>,
    vars: &[Var],
    episode: &EpisodeTrace<T>,
    log_prob: bool,
) -> Result<Var> {
    let (h, p0) = model.encode(tape, ops, vars)?;
    let [phi1, phi2, phi3] = model.decoder_vars(vars);
    let steps = &episode.steps;
    let Some(first) = steps.first() else {
        return Ok(tape.leaf(Tensor::scalar(T::zero())));
    };

    let mut parts = vec![tape.gather_rows(p0, &[first.node])?];
    if steps.len() > 1 {
        let nodes: Vec<usize> = steps[1..].iter().map(|s| s.node).collect();
        let prefixes: Vec<usize> = steps[1..].iter().map(|s| s.labeled_before).collect();
        let order: Vec<usize> = steps.iter().map(|s| s.node).collect();

        let own = linear(tape, h, phi1)?;
        let own = tape.gather_rows(own, &nodes)?;
        let summed = tape.aggregate(h, &ops.sum)?;
        let neighbor = linear(tape, summed, phi2)?;
        let neighbor = tape.gather_rows(neighbor, &nodes)?;
        let columns = tape.transpose(phi3)?;
        let columns = tape.gather_rows(columns, &order)?;
        let cumulative = tape.prefix_sum_rows(columns)?;
        let context = tape.gather_rows(cumulative, &prefixes)?;

        let inner = tape.add(context, neighbor)?;
        let prod = tape.mul(own, inner)?;
        let dot = tape.sum_rows(prod)?;
        let hidden = model.decoder.hidden().max(1) as f64;
        let scaled = tape.scale(dot, T::of(1.0 / hidden.sqrt()))?;
        let squashed = tape.tanh(scaled)?;
        let alpha = tape.scale(squashed, model.decoder.clip)?;
        parts.push(tape.sigmoid(alpha)?);
    }
    let p = tape.concat_rows(&parts)?;

    let sign = Tensor::column(steps.iter().map(|s| if s.label == 1 { T::one() } else { -T::one() }).collect());
    let offset = Tensor::column(steps.iter().map(|s| if s.label == 1 { T::zero() } else { T::one() }).collect());
    let sign = tape.leaf(sign);
    let offset = tape.leaf(offset);
    let signed = tape.mul(p, sign)?;
    let mut chosen = tape.add(signed, offset)?;
    if log_prob {
        chosen = tape.ln(chosen)?;
    }
    let rewards = tape.leaf(Tensor::column(steps.iter().map(|s| s.reward).collect()));
    let weighted = tape.mul(rewards, chosen)?;
    tape.sum(weighted)
}

/// Runs the encoder forward and decodes one greedy episode.
pub fn run_episode<T: Scalar>(
    model: &GrlModel<T>,
    g: &Graph,
    ops: &GraphOps<T>,
    q: &QuboMatrix<T>,
    beta: f64,
) -> Result<EpisodeTrace<T>> {
    let mut tape = Tape::new();
    let vars = model.register(&mut tape);
    let (h, p0) = model.encode(&mut tape, ops, &vars)?;
    decode_episode(tape.value(h), tape.value(p0).data(), g, q, &model.decoder, beta)
}

/// Trains encoder and decoder with one episode per epoch, returning the best
/// assignment seen.
pub fn train_grl<T: Scalar>(g: &Graph, config: &GrlConfig) -> Result<(Assignment, TrainTrace)> {
    if !(config.beta > 0.0 && config.beta < 1.0) {
        return Err(Error::Config(format!("threshold beta = {} outside (0, 1)", config.beta)));
    }
    let q = Arc::new(build_maxcut_qubo::<T>(g));
    let ops = GraphOps::new(g);
    let mut model = GrlModel::<T>::new(g.node_count(), config.clip, config.seed)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), model.params());
    let mut monitor = StoppingPolicy::fuzzy(config.patience)?.monitor();
    let mut trace = TrainTrace::new();
    let mut best = Assignment::zeros(g.node_count());
    let started = Instant::now();

    for epoch in 0..config.max_epochs {
        let mut tape = Tape::new();
        let vars = model.register(&mut tape);
        let (h, p0) = model.encode(&mut tape, &ops, &vars)?;
        let episode = decode_episode(tape.value(h), tape.value(p0).data(), g, &q, &model.decoder, config.beta)?;
        let loss = policy_loss(&mut tape, &model, &ops, &vars, &episode, config.log_prob)?;
        let value = tape.value(loss).item().as_f64();
        let cut = cut_size(g, &episode.assignment)?;

        trace.loss.push(value);
        trace.push_cut(cut);
        if value < trace.best_loss {
            trace.best_loss = value;
            trace.best_epoch = epoch;
        }
        if monitor.record(-(cut as f64)) {
            best = episode.assignment.clone();
        }
        trace.epochs = epoch + 1;
        if monitor.should_stop() {
            break;
        }
        adam_update(&mut model, &mut adam, &tape, &vars, loss)?;
    }
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok((best, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_graph;
    use crate::qubo::hamiltonian;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn k3q() -> QuboMatrix<f64> {
        build_maxcut_qubo(&Graph::complete(3))
    }

    #[test]
    fn triangle_reward_sequence() {
        let q = k3q();
        let inc = q.incident_terms();
        let mut x = Assignment::zeros(3);
        let mut labeled = vec![false; 3];
        let mut rewards = Vec::new();
        for (node, bit) in [(0, true), (1, false), (2, false)] {
            x.set(node, bit);
            rewards.push(incremental_reward(&inc, &labeled, &x, node));
            labeled[node] = true;
        }
        assert_eq!(rewards, vec![-2.0, 0.0, 0.0]);
        assert_eq!(rewards.iter().sum::<f64>(), hamiltonian(&q, &x).unwrap());
    }

    #[test]
    fn label_zero_earns_nothing() {
        let q = k3q();
        let x = Assignment::zeros(3);
        assert_eq!(incremental_reward(&q.incident_terms(), &[false; 3], &x, 1), 0.0);
    }

    #[test]
    #[should_panic(expected = "labeled twice")]
    fn double_counting_is_caught() {
        let q = k3q();
        let x = Assignment::zeros(3);
        incremental_reward(&q.incident_terms(), &[true, false, false], &x, 0);
    }

    #[test]
    fn zero_decoder_scores_are_zero() {
        assert_eq!(attention_score(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], 10.0), 0.0);
        assert_eq!(sigmoid(0.0f64), 0.5);
    }

    #[test]
    fn two_node_score_closed_form() {
        // d_h = 1, phi1 = 2, phi2 = 3, phi3 = [0.5, -1]; h = [0.4, -0.2]
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let h = Tensor::column(vec![0.4, -0.2]);
        let dec = DecoderParams {
            phi1: Tensor::scalar(2.0),
            phi2: Tensor::scalar(3.0),
            phi3: Tensor::from_vec(1, 2, vec![0.5, -1.0]).unwrap(),
            clip: 10.0,
        };
        let t = DecoderTables::new(&h, &g, &dec).unwrap();
        // node 1 after node 0 is labeled: 10 tanh(-0.4 * (0.5 + 1.2))
        let a = attention_score(t.own.row(1), t.indicator.row(0), t.neighbor.row(1), dec.clip);
        assert_relative_eq!(a, 10.0 * (-0.4f64 * 1.7).tanh(), epsilon = 1e-14);
    }

    #[test]
    fn score_bounded_by_clip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let v: Vec<f64> = (0..9).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let a = attention_score(&v[0..3], &v[3..6], &v[6..9], 10.0);
            assert!(a.abs() <= 10.0);
        }
    }

    #[test]
    fn single_node_episode() {
        let g = Graph::new(1, []).unwrap();
        let q = build_maxcut_qubo::<f64>(&g);
        let dec = DecoderParams::zeros(1, 1, 1, 10.0);
        let ep = decode_episode(&Tensor::zeros(1, 1), &[0.8], &g, &q, &dec, 0.5).unwrap();
        assert_eq!(ep.steps.len(), 1);
        assert_eq!(ep.steps[0].reward, 0.0);
        assert_eq!(ep.assignment.bits(), &[1]);
    }

    #[test]
    fn zero_weights_label_everything_one() {
        let g = Graph::complete(3);
        let q = k3q();
        let dec = DecoderParams::zeros(3, 2, 2, 10.0);
        let ep = decode_episode(&Tensor::zeros(3, 2), &[0.5; 3], &g, &q, &dec, 0.5).unwrap();
        assert_eq!(ep.assignment.bits(), &[1, 1, 1]);
        assert_eq!(cut_size(&g, &ep.assignment).unwrap(), 0);
        assert!(ep.steps.iter().all(|s| s.prob == 0.5));
    }

    #[test]
    fn zero_encoder_gives_half_probabilities() {
        let g = generate_graph(6, 8, 0).unwrap();
        let mut m = GrlModel::<f64>::new(6, 10.0, 0).unwrap();
        m.head.weight = Tensor::zeros(1, m.head.weight.cols());
        let mut tape = Tape::new();
        let vars = m.register(&mut tape);
        let (_, p0) = m.encode(&mut tape, &GraphOps::new(&g), &vars).unwrap();
        assert!(tape.value(p0).data().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn encoder_output_shape() {
        let g = generate_graph(50, 89, 1).unwrap();
        let m = GrlModel::<f64>::new(50, 10.0, 0).unwrap();
        let mut tape = Tape::new();
        let vars = m.register(&mut tape);
        let (h, p0) = m.encode(&mut tape, &GraphOps::new(&g), &vars).unwrap();
        assert_eq!(tape.value(h).shape(), (50, 4));
        assert_eq!(tape.value(p0).shape(), (50, 1));
    }

    #[test]
    fn episodes_visit_every_node_once_and_telescope() {
        for seed in 0..10 {
            let g = generate_graph(20, 45, seed).unwrap();
            let q = build_maxcut_qubo::<f64>(&g);
            let m = GrlModel::<f64>::new(20, 10.0, seed).unwrap();
            let ep = run_episode(&m, &g, &GraphOps::new(&g), &q, 0.5).unwrap();
            let mut seen: Vec<usize> = ep.steps.iter().map(|s| s.node).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..20).collect::<Vec<_>>());
            assert_eq!(ep.total_reward(), hamiltonian(&q, &ep.assignment).unwrap());
            assert!(ep.steps.iter().all(|s| s.prob > 0.0 && s.prob < 1.0));
            assert!(ep.steps.iter().filter_map(|s| s.score).all(|a| a.abs() <= 10.0));
        }
    }

    #[test]
    fn policy_loss_arithmetic() {
        // r = (-1, 2), P = (0.5, 0.25): -0.5 + 0.5 = 0
        let mut tape = Tape::<f64>::new();
        let r = tape.leaf(Tensor::column(vec![-1.0, 2.0]));
        let p = tape.leaf(Tensor::column(vec![0.5, 0.25]));
        let w = tape.mul(r, p).unwrap();
        let l = tape.sum(w).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);
    }

    #[test]
    fn policy_loss_matches_episode_probabilities() {
        let g = generate_graph(12, 20, 3).unwrap();
        let q = build_maxcut_qubo::<f64>(&g);
        let ops = GraphOps::new(&g);
        let m = GrlModel::<f64>::new(12, 10.0, 5).unwrap();
        let ep = run_episode(&m, &g, &ops, &q, 0.5).unwrap();
        let expected: f64 = ep.steps.iter().map(|s| s.reward * s.prob).sum();
        let mut tape = Tape::new();
        let vars = m.register(&mut tape);
        let l = policy_loss(&mut tape, &m, &ops, &vars, &ep, false).unwrap();
        assert_relative_eq!(tape.value(l).item(), expected, epsilon = 1e-12);

        let expected_log: f64 = ep.steps.iter().map(|s| s.reward * s.prob.ln()).sum();
        let mut tape = Tape::new();
        let vars = m.register(&mut tape);
        let l = policy_loss(&mut tape, &m, &ops, &vars, &ep, true).unwrap();
        assert_relative_eq!(tape.value(l).item(), expected_log, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_rewards_give_zero_loss() {
        let g = Graph::new(4, []).unwrap();
        let q = build_maxcut_qubo::<f64>(&g);
        let ops = GraphOps::new(&g);
        let m = GrlModel::<f64>::new(4, 10.0, 1).unwrap();
        let ep = run_episode(&m, &g, &ops, &q, 0.5).unwrap();
        let mut tape = Tape::new();
        let vars = m.register(&mut tape);
        let l = policy_loss(&mut tape, &m, &ops, &vars, &ep, false).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);
    }

    #[test]
    fn queue_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..100);
            let mut queue = AttentionQueue::new(n);
            let mut labeled = vec![false; n];
            for i in 0..n {
                queue.push(i, rng.gen_range(-3..3) as f64);
            }
            for _ in 0..n {
                for _ in 0..rng.gen_range(0..4) {
                    let j = rng.gen_range(0..n);
                    if !labeled[j] {
                        queue.push(j, rng.gen_range(-3..3) as f64);
                    }
                }
                let scan = (0..n).filter(|&j| !labeled[j]).fold(None, |b: Option<usize>, j| match b {
                    Some(b) if queue.score(b) >= queue.score(j) => Some(b),
                    _ => Some(j),
                });
                let got = queue.pop(&labeled);
                assert_eq!(got, scan);
                labeled[got.unwrap()] = true;
            }
            assert_eq!(queue.pop(&labeled), None);
        }
    }

    fn quick(seed: u64) -> GrlConfig {
        GrlConfig { patience: 200, max_epochs: 2000, seed, ..GrlConfig::default() }
    }

    #[test]
    fn single_edge_is_cut() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let wins = (0..10).filter(|&s| cut_size(&g, &train_grl::<f64>(&g, &quick(s)).unwrap().0).unwrap() == 1).count();
        assert!(wins >= 9, "{wins}/10");
    }

    #[test]
    fn triangle_reaches_optimum() {
        let g = Graph::complete(3);
        let wins = (0..10).filter(|&s| cut_size(&g, &train_grl::<f64>(&g, &quick(s)).unwrap().0).unwrap() == 2).count();
        assert!(wins > 5, "{wins}/10");
    }

    #[test]
    fn best_cut_trace_is_monotone_and_reported() {
        let g = generate_graph(15, 30, 4).unwrap();
        let (x, t) = train_grl::<f64>(&g, &quick(2)).unwrap();
        assert!(t.best_cut.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(t.final_best_cut(), cut_size(&g, &x).unwrap());
    }
}
