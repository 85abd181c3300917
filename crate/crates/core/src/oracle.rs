//! Reference solvers: exhaustive search for small QUBOs and a single-flip
//! local search for Max-Cut.

use num_traits::Num;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::qubo::{hamiltonian, Assignment, QuboMatrix};

/// Largest dimension [`brute_force_best`] accepts.
pub const MAX_EXHAUSTIVE: usize = 24;

/// Minimum energy over all `2^n` assignments and the lexicographically
/// smallest assignment attaining it.
///
/// Assignments are visited in Gray-code order with O(deg) energy updates;
/// any candidate minimum is re-evaluated from scratch, so accumulated
/// rounding cannot decide the answer.
pub fn brute_force_best<T: Num + Copy + PartialOrd>(q: &QuboMatrix<T>) -> Result<(Assignment, T)> {
    let n = q.dim();
    if n > MAX_EXHAUSTIVE {
        return Err(Error::TooLarge { n, max: MAX_EXHAUSTIVE });
    }
    let incident = q.incident_terms();
    let mut x = Assignment::zeros(n);
    let mut energy = T::zero();
    let mut best = (x.clone(), T::zero());
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        // energy change of setting x_i to 1 given the others
        let gain = incident[i]
            .iter()
            .filter(|&&(j, _)| j == i || x.get(j) == 1)
            .fold(T::zero(), |acc, &(_, v)| acc + v);
        energy = if x.get(i) == 0 { energy + gain } else { energy - gain };
        x.flip(i);
        if energy <= best.1 {
            let exact = hamiltonian(q, &x)?;
            if exact < best.1 || (exact == best.1 && x < best.0) {
                best = (x.clone(), exact);
            }
            energy = exact;
        }
    }
    Ok(best)
}

/// Largest cut, by exhaustive search.
pub fn optimal_cut(g: &Graph) -> Result<(Assignment, usize)> {
    let q = crate::qubo::build_maxcut_qubo::<i64>(g);
    let (x, h) = brute_force_best(&q)?;
    Ok((x, (-h) as usize))
}

/// Cut change from flipping `v`.
fn flip_gain(g: &Graph, x: &Assignment, v: usize) -> isize {
    g.neighbors(v).iter().map(|&u| if x.get(u) == x.get(v) { 1 } else { -1 }).sum()
}

/// Random labels, then sweeps over the nodes flipping any node whose flip
/// enlarges the cut until a sweep changes nothing.
pub fn greedy_maxcut(g: &Graph, seed: u64) -> Assignment {
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Assignment::zeros(n);
    for i in 0..n {
        x.set(i, rng.gen_bool(0.5));
    }
    let mut changed = true;
    while changed {
        changed = false;
        for v in 0..n {
            if flip_gain(g, &x, v) > 0 {
                x.flip(v);
                changed = true;
            }
        }
    }
    x
}

/// `true` if no single flip enlarges the cut.
pub fn is_local_optimum(g: &Graph, x: &Assignment) -> bool {
    (0..g.node_count()).all(|v| flip_gain(g, x, v) <= 0)
}
