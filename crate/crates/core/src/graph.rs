//! Undirected simple graphs: construction, random generation, degree
//! statistics and the plain-text edge-list format.
//!
//! The file format is a header line `n m` followed by `m` lines `u v` with
//! `u < v`, 0-indexed, each newline-terminated.

use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::cmp::Reverse;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are stored canonically as `(u, v)` with `u < v`, sorted; adjacency
/// lists are sorted as well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, normalizing each pair to `u < v`.
    ///
    /// Self-loops, duplicate edges and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canonical = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            canonical.push(e);
        }
        canonical.sort_unstable();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &canonical {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { n, edges: canonical, adjacency })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::new(n, edges).expect("complete graph is simple")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v))).expect("path graph is simple")
    }

    /// Star with centre 0.
    pub fn star(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (0, v))).expect("star graph is simple")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Returns the graph with node `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Dimension { expected: self.n, actual: perm.len() });
        }
        Self::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = (0..self.n).map(|v| self.degree(v));
        let max = degrees.clone().max().unwrap_or(0);
        let min = degrees.min().unwrap_or(0);
        let mean = if self.n == 0 { 0.0 } else { 2.0 * self.edges.len() as f64 / self.n as f64 };
        DegreeStats { max, min, mean }
    }

    /// Serializes to the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 * (self.edges.len() + 1));
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Parses the edge-list text format. `origin` only labels error messages.
    pub fn from_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let (n, m) = parse_pair(header).ok_or_else(|| err(1, format!("expected `n m`, got {header:?}")))?;

        let mut edges = Vec::with_capacity(m);
        let mut seen = HashSet::with_capacity(m);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (u, v) = parse_pair(line).ok_or_else(|| err(lineno, format!("expected `u v`, got {line:?}")))?;
            if u == v {
                return Err(err(lineno, format!("self-loop on node {u}")));
            }
            if u > v {
                return Err(err(lineno, format!("edge endpoints must satisfy u < v, got {u} {v}")));
            }
            if v >= n {
                return Err(err(lineno, format!("node {v} out of range for n = {n}")));
            }
            if !seen.insert((u, v)) {
                return Err(err(lineno, format!("duplicate edge {u} {v}")));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(err(1, format!("header declares {m} edges, found {}", edges.len())));
        }
        Self::new(n, edges)
    }
}

fn parse_pair(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_ascii_whitespace();
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    it.next().is_none().then_some((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub max: usize,
    pub min: usize,
    pub mean: f64,
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, g.to_edge_list())?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    Graph::from_edge_list(&text, path)
}

/// Random connected simple graph with exactly `m` edges.
///
/// A uniform random spanning tree (random Prüfer sequence) is drawn first, so
/// every node has degree at least one when `n > 1`; the remaining `m - (n - 1)`
/// edges are sampled uniformly without replacement from the non-edges.
pub fn generate_graph(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidGraph("graph needs at least one node".into()));
    }
    let max = n * (n - 1) / 2;
    if m + 1 < n || m > max {
        return Err(Error::EdgeCount { n, m, min: n - 1, max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = random_tree(n, &mut rng);
    let extra = m - tree.len();
    let mut edges: BTreeSet<(usize, usize)> = tree.into_iter().collect();

    if extra > 0 {
        let free = max - edges.len();
        if free <= 4_000_000 || extra * 2 > free {
            let candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|e| !edges.contains(e))
                .collect();
            for i in index::sample(&mut rng, candidates.len(), extra) {
                edges.insert(candidates[i]);
            }
        } else {
            while edges.len() < m {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    edges.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
    Graph::new(n, edges)
}

fn random_tree(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    match n {
        1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let prufer: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &x in &prufer {
        degree[x] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &x in &prufer {
        let Reverse(leaf) = leaves.pop().expect("Prüfer decoding always has a leaf");
        edges.push((leaf.min(x), leaf.max(x)));
        degree[x] -= 1;
        if degree[x] == 1 {
            leaves.push(Reverse(x));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a.min(b), a.max(b)));
    edges
}
