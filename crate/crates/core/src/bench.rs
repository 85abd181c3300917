//! Benchmark orchestration: generated instances, solver dispatch, cut
//! verification and CSV reports.
//!
//! A config file is plain text:
//!
//! ```text
//! output = results
//! seeds = 1, 2, 3
//! timing = measured      # or "off" for byte-stable reports
//! traces = true
//!
//! 50 89 1                # n m graph-seed
//! 50 139 1
//!
//! [pignn]
//! restarts = 3
//! [grl]
//! [mcts]
//! max_children = 64
//! ```
//!
//! Solver sections take the solver's hyperparameters; omitted keys keep
//! their defaults. `#` starts a comment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{generate_graph, DegreeStats, Graph};
use crate::grl::{train_grl, GrlConfig};
use crate::mcts::{run_mcts, MctsConfig};
use crate::oracle::{greedy_maxcut, optimal_cut};
use crate::pignn::{train_pignn, PiGnnConfig, STRICT_TOLERANCE};
use crate::qubo::{cut_size, Assignment};
use crate::stopping::StoppingPolicy;
use crate::trace::{write_text, TrainTrace};

/// Version of every emitted report schema.
pub const FORMAT_VERSION: u32 = 1;

/// A solver and its hyperparameters. The per-run seed is supplied separately.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverConfig {
    PiGnn(PiGnnConfig),
    Grl(GrlConfig),
    Mcts(MctsConfig),
    Greedy,
    Oracle,
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PiGnn(_) => "pignn",
            Self::Grl(_) => "grl",
            Self::Mcts(_) => "mcts",
            Self::Greedy => "greedy",
            Self::Oracle => "oracle",
        }
    }

    /// Default hyperparameters for a solver name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "pignn" => Self::PiGnn(PiGnnConfig::default()),
            "grl" => Self::Grl(GrlConfig::default()),
            "mcts" => Self::Mcts(MctsConfig::default()),
            "greedy" => Self::Greedy,
            "oracle" => Self::Oracle,
            other => return Err(Error::Config(format!("unknown solver '{other}'"))),
        })
    }

    /// Sets one hyperparameter from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let name = self.name();
        let unknown = || Error::Config(format!("solver '{name}' has no parameter '{key}'"));
        match self {
            Self::PiGnn(c) => match key {
                "lr" => c.lr = parse(key, value)?,
                "max_epochs" => c.max_epochs = parse(key, value)?,
                "dropout" => c.dropout = parse(key, value)?,
                "restarts" => c.restarts = parse(key, value)?,
                "beta" => c.beta = parse(key, value)?,
                "patience" => {
                    let p = parse(key, value)?;
                    c.stopping = match c.stopping {
                        StoppingPolicy::Strict { tolerance, .. } => StoppingPolicy::strict(p, tolerance)?,
                        StoppingPolicy::Fuzzy { .. } => StoppingPolicy::fuzzy(p)?,
                    };
                }
                "tolerance" => {
                    let t = parse(key, value)?;
                    c.stopping = StoppingPolicy::strict(c.stopping.patience(), t)?;
                }
                "stopping" => {
                    let p = c.stopping.patience();
                    c.stopping = match value {
                        "fuzzy" => StoppingPolicy::fuzzy(p)?,
                        "strict" => StoppingPolicy::strict(p, STRICT_TOLERANCE)?,
                        other => return Err(Error::Config(format!("stopping must be fuzzy or strict, got '{other}'"))),
                    };
                }
                _ => return Err(unknown()),
            },
            Self::Grl(c) => match key {
                "lr" => c.lr = parse(key, value)?,
                "patience" => c.patience = parse(key, value)?,
                "max_epochs" => c.max_epochs = parse(key, value)?,
                "clip" => c.clip = parse(key, value)?,
                "beta" => c.beta = parse(key, value)?,
                "log_prob" => c.log_prob = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Self::Mcts(c) => match key {
                "lr" => c.lr = parse(key, value)?,
                "rollout_patience" => c.rollout_patience = parse(key, value)?,
                "rollout_max_epochs" => c.rollout_max_epochs = parse(key, value)?,
                "patience" => c.patience = parse(key, value)?,
                "max_iterations" => c.max_iterations = parse(key, value)?,
                "exploration" => c.exploration = parse(key, value)?,
                "beta" => c.beta = parse(key, value)?,
                "max_children" => {
                    c.max_children = if value == "all" { None } else { Some(parse(key, value)?) };
                }
                _ => return Err(unknown()),
            },
            Self::Greedy | Self::Oracle => return Err(unknown()),
        }
        Ok(())
    }

    /// Runs the solver on `g` and checks the reported cut against the
    /// returned assignment.
    pub fn solve(&self, g: &Graph, seed: u64) -> Result<Solution> {
        let started = Instant::now();
        let (assignment, reported, trace) = match self {
            Self::PiGnn(c) => {
                let (x, t) = train_pignn::<f64>(g, &PiGnnConfig { seed, ..c.clone() })?;
                // the answer is the best-loss projection, not the best epoch cut
                let cut = cut_size(g, &x)?;
                (x, cut, Some(t))
            }
            Self::Grl(c) => {
                let (x, t) = train_grl::<f64>(g, &GrlConfig { seed, ..c.clone() })?;
                (x, t.final_best_cut(), Some(t))
            }
            Self::Mcts(c) => {
                let (x, t) = run_mcts::<f64>(g, &MctsConfig { seed, ..c.clone() })?;
                (x, t.final_best_cut(), Some(t))
            }
            Self::Greedy => {
                let x = greedy_maxcut(g, seed);
                let cut = cut_size(g, &x)?;
                (x, cut, None)
            }
            Self::Oracle => {
                let (x, cut) = optimal_cut(g)?;
                (x, cut, None)
            }
        };
        let elapsed = started.elapsed().as_secs_f64();
        let recomputed = cut_size(g, &assignment)?;
        if recomputed != reported {
            return Err(Error::CutMismatch { reported, recomputed });
        }
        let (time_s, iterations) = match &trace {
            Some(t) => (t.wall_time, t.epochs),
            None => (elapsed, 0),
        };
        Ok(Solution { assignment, cut: recomputed, time_s, iterations, trace })
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assignment: Assignment,
    pub cut: usize,
    /// Training time, excluding graph construction.
    pub time_s: f64,
    pub iterations: usize,
    pub trace: Option<TrainTrace>,
}

impl Solution {
    /// Trace CSV in the layout that suits the solver.
    pub fn trace_csv(&self, solver: &SolverConfig) -> Option<String> {
        let t = self.trace.as_ref()?;
        Some(match solver {
            SolverConfig::PiGnn(_) => {
                let mut out = String::from("epoch,loss,episode_cut\n");
                for (e, (l, c)) in t.loss.iter().zip(&t.episode_cut).enumerate() {
                    out.push_str(&format!("{},{},{}\n", e + 1, l, c));
                }
                out
            }
            SolverConfig::Grl(_) => t.reward_csv(),
            _ => t.search_csv(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn id(&self) -> String {
        format!("n{}_m{}_s{}", self.n, self.m, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub instances: Vec<InstanceSpec>,
    pub solvers: Vec<SolverConfig>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Record wall times; when off every time column is 0.
    pub timing: bool,
    pub traces: bool,
}

impl BenchConfig {
    /// Parses config text; a relative `output` is resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut instances = Vec::new();
        let mut solvers: Vec<SolverConfig> = Vec::new();
        let mut seeds = vec![0];
        let mut output = PathBuf::from("bench-out");
        let mut timing = true;
        let mut traces = false;
        let err = |line: usize, msg: String| Error::Config(format!("line {line}: {msg}"));

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let solver = SolverConfig::from_name(name.trim()).map_err(|e| err(line_no, e.to_string()))?;
                if solvers.iter().any(|s| s.name() == solver.name()) {
                    return Err(err(line_no, format!("solver '{name}' listed twice")));
                }
                solvers.push(solver);
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                if let Some(solver) = solvers.last_mut() {
                    solver.set(key, value).map_err(|e| err(line_no, e.to_string()))?;
                    continue;
                }
                match key {
                    "output" => output = PathBuf::from(value),
                    "seeds" => {
                        seeds = value
                            .split(|c: char| c == ',' || c.is_whitespace())
                            .filter(|s| !s.is_empty())
                            .map(|s| parse(key, s))
                            .collect::<Result<_>>()
                            .map_err(|e| err(line_no, e.to_string()))?;
                    }
                    "timing" => {
                        timing = match value {
                            "measured" | "on" | "true" => true,
                            "off" | "false" => false,
                            other => return Err(err(line_no, format!("timing must be measured or off, got '{other}'"))),
                        }
                    }
                    "traces" => traces = parse(key, value).map_err(|e| err(line_no, e.to_string()))?,
                    other => return Err(err(line_no, format!("unknown key '{other}'"))),
                }
                continue;
            }
            if !solvers.is_empty() {
                return Err(err(line_no, "instance lines must precede solver sections".into()));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [n, m, seed] = fields[..] else {
                return Err(err(line_no, format!("expected 'n m seed', got '{line}'")));
            };
            instances.push(InstanceSpec {
                n: parse("n", n).map_err(|e| err(line_no, e.to_string()))?,
                m: parse("m", m).map_err(|e| err(line_no, e.to_string()))?,
                seed: parse("seed", seed).map_err(|e| err(line_no, e.to_string()))?,
            });
        }
        if seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if instances.is_empty() {
            return Err(Error::Config("no instances listed".into()));
        }
        if solvers.is_empty() {
            return Err(Error::Config("no solver sections".into()));
        }
        let output = if output.is_relative() { base.join(output) } else { output };
        Ok(Self { instances, solvers, seeds, output, timing, traces })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// One (instance, solver, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub solver: String,
    pub seed: u64,
    pub cut: usize,
    pub time_s: f64,
    pub iters: usize,
    pub trace_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub instance: String,
    pub solver: String,
    pub seed: u64,
    pub error: String,
}

/// Per-instance, per-solver aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub solver: String,
    pub mean_cut: f64,
    pub max_cut: usize,
    pub mean_time_s: f64,
    /// Largest mean cut on this instance (ties all marked).
    pub best: bool,
    /// Mean-cut difference to PI-GNN in percent, when both ran.
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
    pub summary: Vec<SummaryRow>,
    pub graphs: Vec<(InstanceSpec, DegreeStats)>,
}

/// `(other - base) / base * 100`.
pub fn percent_delta(base: f64, other: f64) -> f64 {
    (other - base) / base * 100.0
}

/// Runs every (instance, solver, seed) combination in parallel and writes
/// the reports into `config.output`.
///
/// Solver errors are recorded as failures; a cut that does not match its
/// assignment aborts the benchmark.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    let graphs: Vec<Graph> = config.instances.iter().map(|i| generate_graph(i.n, i.m, i.seed)).collect::<Result<_>>()?;
    let trace_dir = config.output.join("traces");
    fs::create_dir_all(&config.output)?;
    if config.traces {
        fs::create_dir_all(&trace_dir)?;
    }
    let jobs: Vec<(usize, usize, u64)> = (0..graphs.len())
        .flat_map(|g| (0..config.solvers.len()).flat_map(move |s| config.seeds.iter().map(move |&seed| (g, s, seed))))
        .collect();

    let outcomes: Vec<((usize, usize, u64), Result<Solution>)> = jobs
        .par_iter()
        .map(|&(gi, si, seed)| ((gi, si, seed), config.solvers[si].solve(&graphs[gi], seed)))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((gi, si, seed), outcome) in outcomes {
        let inst = config.instances[gi];
        let solver = &config.solvers[si];
        match outcome {
            Ok(sol) => {
                let trace_path = match (config.traces, sol.trace_csv(solver)) {
                    (true, Some(csv)) => {
                        let name = format!("{}_{}_seed{}.csv", inst.id(), solver.name(), seed);
                        write_text(trace_dir.join(&name), &csv)?;
                        Some(format!("traces/{name}"))
                    }
                    _ => None,
                };
                records.push(RunRecord {
                    instance: inst.id(),
                    n: inst.n,
                    m: inst.m,
                    solver: solver.name().into(),
                    seed,
                    cut: sol.cut,
                    time_s: if config.timing { sol.time_s } else { 0.0 },
                    iters: sol.iterations,
                    trace_path,
                });
            }
            Err(e @ Error::CutMismatch { .. }) => return Err(e),
            Err(e) => failures.push(Failure {
                instance: inst.id(),
                solver: solver.name().into(),
                seed,
                error: e.to_string(),
            }),
        }
    }

    let summary = summarize(config, &records);
    let report = BenchReport {
        records,
        failures,
        summary,
        graphs: config.instances.iter().copied().zip(graphs.iter().map(Graph::degree_stats)).collect(),
    };
    write_reports(&config.output, &report)?;
    Ok(report)
}

fn summarize(config: &BenchConfig, records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for inst in &config.instances {
        let id = inst.id();
        let mut per_solver: BTreeMap<usize, (f64, usize, f64)> = BTreeMap::new();
        for (si, solver) in config.solvers.iter().enumerate() {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.instance == id && r.solver == solver.name()).collect();
            if runs.is_empty() {
                continue;
            }
            let k = runs.len() as f64;
            let mean = runs.iter().map(|r| r.cut as f64).sum::<f64>() / k;
            let max = runs.iter().map(|r| r.cut).max().unwrap_or(0);
            let time = runs.iter().map(|r| r.time_s).sum::<f64>() / k;
            per_solver.insert(si, (mean, max, time));
        }
        let top = per_solver.values().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let base = config
            .solvers
            .iter()
            .position(|s| matches!(s, SolverConfig::PiGnn(_)))
            .and_then(|i| per_solver.get(&i))
            .map(|v| v.0)
            .filter(|&b| b > 0.0);
        for (&si, &(mean, max, time)) in &per_solver {
            rows.push(SummaryRow {
                instance: id.clone(),
                n: inst.n,
                m: inst.m,
                solver: config.solvers[si].name().into(),
                mean_cut: mean,
                max_cut: max,
                mean_time_s: time,
                best: mean == top,
                delta_pct: base.map(|b| percent_delta(b, mean)),
            });
        }
    }
    rows
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Config(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Config(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(format!("# format_version={FORMAT_VERSION}\n{}", String::from_utf8_lossy(&body)))
}

/// Writes runs.csv, summary.csv, graphs.csv, times.csv and, if any run
/// failed, failures.csv.
pub fn write_reports(dir: &Path, report: &BenchReport) -> Result<()> {
    let runs = csv_text(
        &["instance", "n", "m", "solver", "seed", "cut", "time_s", "iters"],
        report.records.iter().map(|r| {
            vec![
                r.instance.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.solver.clone(),
                r.seed.to_string(),
                r.cut.to_string(),
                format!("{:.6}", r.time_s),
                r.iters.to_string(),
            ]
        }),
    )?;
    write_text(dir.join("runs.csv"), &runs)?;

    let summary = csv_text(
        &["instance", "n", "m", "solver", "mean_cut", "max_cut", "best", "delta_pct"],
        report.summary.iter().map(|s| {
            vec![
                s.instance.clone(),
                s.n.to_string(),
                s.m.to_string(),
                s.solver.clone(),
                format!("{:.2}", s.mean_cut),
                s.max_cut.to_string(),
                s.best.to_string(),
                s.delta_pct.map_or_else(String::new, |d| format!("{d:.2}")),
            ]
        }),
    )?;
    write_text(dir.join("summary.csv"), &summary)?;

    let graphs = csv_text(
        &["instance", "n", "m", "max_degree", "min_degree", "mean_degree"],
        report.graphs.iter().map(|(inst, d)| {
            vec![
                inst.id(),
                inst.n.to_string(),
                inst.m.to_string(),
                d.max.to_string(),
                d.min.to_string(),
                format!("{:.2}", d.mean),
            ]
        }),
    )?;
    write_text(dir.join("graphs.csv"), &graphs)?;

    let times = csv_text(
        &["instance", "n", "m", "solver", "mean_time_s"],
        report.summary.iter().map(|s| {
            vec![s.instance.clone(), s.n.to_string(), s.m.to_string(), s.solver.clone(), format!("{:.6}", s.mean_time_s)]
        }),
    )?;
    write_text(dir.join("times.csv"), &times)?;

    let failures_path = dir.join("failures.csv");
    if report.failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(failures_path)?;
        }
    } else {
        let failures = csv_text(
            &["instance", "solver", "seed", "error"],
            report
                .failures
                .iter()
                .map(|f| vec![f.instance.clone(), f.solver.clone(), f.seed.to_string(), f.error.clone()]),
        )?;
        write_text(failures_path, &failures)?;
    }
    Ok(())
}
