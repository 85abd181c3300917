//! Paired comparison of the tree search against a single relaxed-GNN run on a
//! dense 50-node instance.

use qubo_gnn::gnn::Parameterized;
use qubo_gnn::mcts::{run_mcts, Mcts, MctsConfig};
use qubo_gnn::pignn::{train_pignn, PiGnnConfig};
use qubo_gnn::{cut_size, generate_graph};

#[test]
fn perturbation_changes_the_shared_network() {
    let g = generate_graph(50, 499, 1).unwrap();
    let mut s = Mcts::<f64>::new(&g, &MctsConfig::default()).unwrap();
    let mut seen = vec![s.gnn.param_values()];
    for _ in 0..4 {
        s.step().unwrap();
        let now = s.gnn.param_values();
        assert!(seen.iter().all(|p| *p != now));
        seen.push(now);
    }
}

#[test]
fn search_matches_or_beats_relaxed_run_on_paired_seeds() {
    let g = generate_graph(50, 499, 1).unwrap();
    let mut rows = Vec::new();
    for seed in 0..10 {
        let (x, _) = train_pignn::<f64>(&g, &PiGnnConfig { seed, ..PiGnnConfig::default() }).unwrap();
        let (y, _) = run_mcts::<f64>(&g, &MctsConfig { seed, ..MctsConfig::default() }).unwrap();
        rows.push((seed, cut_size(&g, &x).unwrap(), cut_size(&g, &y).unwrap()));
    }
    let wins = rows.iter().filter(|(_, p, m)| m >= p).count();
    println!("seed, pignn, mcts: {rows:?}");
    assert!(wins >= 5, "search >= relaxed run on {wins}/10 seeds: {rows:?}");
}
