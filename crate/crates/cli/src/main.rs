use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use qubo_gnn::bench::{run_benchmark, BenchConfig, SolverConfig, FORMAT_VERSION};
use qubo_gnn::oracle::optimal_cut;
use qubo_gnn::{generate_graph, load_graph, save_graph};
use serde::Serialize;

/// Max-Cut QUBO solvers on graphs.
#[derive(Parser, Debug)]
#[command(name = "qubo-gnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a connected random graph with n nodes and m edges.
    Gen {
        n: usize,
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output if omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve Max-Cut on an edge-list file.
    Solve {
        graph: PathBuf,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Extra solver parameter as key=value, repeatable.
        #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Also write the JSON result to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the training trace CSV to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a benchmark config file.
    Bench { config: PathBuf },
    /// Exact maximum cut by exhaustive search (at most 24 nodes).
    Oracle { graph: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Algo {
    Pignn,
    Grl,
    Mcts,
    Greedy,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Pignn => "pignn",
            Algo::Grl => "grl",
            Algo::Mcts => "mcts",
            Algo::Greedy => "greedy",
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    format_version: u32,
    algo: &'static str,
    seed: u64,
    n: usize,
    m: usize,
    cut: usize,
    time_s: f64,
    epochs: usize,
    assignment: String,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn solver_config(
    algo: Algo,
    lr: Option<f64>,
    patience: Option<usize>,
    max_epochs: Option<usize>,
    params: &[String],
) -> Result<SolverConfig, Failure> {
    let mut solver = SolverConfig::from_name(algo.name()).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(v) = lr {
        pairs.push(("lr".into(), v.to_string()));
    }
    if let Some(v) = patience {
        pairs.push(("patience".into(), v.to_string()));
    }
    if let Some(v) = max_epochs {
        let key = if matches!(algo, Algo::Mcts) { "max_iterations" } else { "max_epochs" };
        pairs.push((key.into(), v.to_string()));
    }
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| Failure::Usage(format!("parameter '{p}' is not key=value")))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    for (k, v) in pairs {
        solver.set(&k, &v).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(solver)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { n, m, seed, out } => {
            let g = generate_graph(n, m, seed).context("generating graph")?;
            match out {
                Some(path) => save_graph(&g, &path).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", g.to_edge_list()),
            }
        }
        Command::Solve { graph, algo, seed, lr, patience, max_epochs, params, json, trace } => {
            let solver = solver_config(algo, lr, patience, max_epochs, &params)?;
            let g = load_graph(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let sol = solver.solve(&g, seed).context("solving")?;
            let out = SolveOutput {
                format_version: FORMAT_VERSION,
                algo: algo.name(),
                seed,
                n: g.node_count(),
                m: g.edge_count(),
                cut: sol.cut,
                time_s: sol.time_s,
                epochs: sol.iterations,
                assignment: sol.assignment.bits().iter().map(|b| char::from(b'0' + b)).collect(),
            };
            let text = serde_json::to_string_pretty(&out).context("encoding result")?;
            println!("{text}");
            if let Some(path) = json {
                std::fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = trace {
                let csv = sol.trace_csv(&solver).unwrap_or_else(|| "iteration,best_cut\n".into());
                std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Bench { config } => {
            let cfg = BenchConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let report = run_benchmark(&cfg).context("running benchmark")?;
            for row in &report.summary {
                let delta = row.delta_pct.map_or_else(String::new, |d| format!(" ({d:+.2}% vs pignn)"));
                println!("{} {:>7} mean_cut={:.2} max_cut={}{}", row.instance, row.solver, row.mean_cut, row.max_cut, delta);
            }
            for f in &report.failures {
                eprintln!("failed: {} {} seed {}: {}", f.instance, f.solver, f.seed, f.error);
            }
            println!("reports written to {}", cfg.output.display());
        }
        Command::Oracle { graph } => {
            let g = load_graph(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let (x, cut) = optimal_cut(&g).context("exhaustive search")?;
            println!("optimal_cut={cut}");
            println!("assignment={}", x.bits().iter().map(|b| char::from(b'0' + b)).collect::<String>());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
