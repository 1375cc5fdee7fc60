use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use resistnet::experiment::{run_experiment, ExperimentKind, ExperimentOutput, ExperimentSpec};
use resistnet::export::{fmt_float, parse_vector_text};
use resistnet::{lipschitz_bound_k, CircuitGraph, Error};

/// Contrastive learning on linear resistor networks.
#[derive(Parser)]
#[command(name = "resistnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write its CSV artifacts.
    Run {
        spec: PathBuf,
        /// Output directory (overrides `out_dir` in the spec; default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run with this single seed instead of the spec's seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sweeps (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the property suites on seeded random instances.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the diagnostics CSVs here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the Lipschitz constant K and the step-size bound 2/K.
    Bound {
        /// Graph file (`nodes N inputs N_I outputs N_O`, then `k l` per branch).
        #[arg(long)]
        graph: PathBuf,
        /// Conductance floor.
        #[arg(long)]
        eps: f64,
        /// Input potentials, whitespace separated, `#` comments allowed.
        #[arg(long)]
        pin: PathBuf,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    /// A property or convergence check failed (exit 1).
    Check(String),
    /// Bad input (exit 2).
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::PropertyViolation(msg)) => Failure::Check(msg.clone()),
            _ => Failure::Config(e),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            spec,
            out,
            seed,
            threads,
        } => run(&spec, out, seed, threads),
        Command::Verify { seed, out, threads } => verify(seed, out, threads),
        Command::Bound { graph, eps, pin } => bound(&graph, eps, &pin).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(
    spec_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<(), Failure> {
    set_threads(threads)?;
    let mut spec = ExperimentSpec::from_file(spec_path)
        .with_context(|| format!("loading spec {}", spec_path.display()))?;
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    let dir = out
        .or_else(|| spec.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let output = run_experiment(&spec).context("running experiment")?;
    finish(&output, &dir)
}

fn verify(seed: u64, out: Option<PathBuf>, threads: Option<usize>) -> Result<(), Failure> {
    set_threads(threads)?;
    let spec = ExperimentSpec {
        seeds: vec![seed],
        ..ExperimentSpec::with_kind(ExperimentKind::Verify)
    };
    let output = run_experiment(&spec).context("running property suites")?;
    match out {
        Some(dir) => finish(&output, &dir),
        None => report(&output),
    }
}

fn finish(output: &ExperimentOutput, dir: &Path) -> Result<(), Failure> {
    let written = output
        .write_to(dir)
        .with_context(|| format!("writing artifacts to {}", dir.display()))?;
    for p in written {
        println!("wrote {}", p.display());
    }
    report(output)
}

fn report(output: &ExperimentOutput) -> Result<(), Failure> {
    for line in &output.summary {
        println!("{line}");
    }
    if output.passed {
        Ok(())
    } else {
        Err(Failure::Check("one or more checks failed".into()))
    }
}

fn bound(graph_path: &Path, eps: f64, pin_path: &Path) -> Result<()> {
    anyhow::ensure!(
        eps > 0.0 && eps.is_finite(),
        "--eps must be positive, got {eps}"
    );
    let text = std::fs::read_to_string(graph_path)
        .with_context(|| format!("reading {}", graph_path.display()))?;
    let graph = CircuitGraph::from_text(&text)
        .with_context(|| format!("parsing {}", graph_path.display()))?;
    let text = std::fs::read_to_string(pin_path)
        .with_context(|| format!("reading {}", pin_path.display()))?;
    let p_i =
        parse_vector_text(&text).with_context(|| format!("parsing {}", pin_path.display()))?;
    anyhow::ensure!(
        p_i.len() == graph.num_inputs(),
        "graph has {} inputs but {} holds {} potentials",
        graph.num_inputs(),
        pin_path.display(),
        p_i.len()
    );
    let k = lipschitz_bound_k(&graph, &p_i, eps);
    println!("K = {}", fmt_float(k));
    println!("2/K = {}", fmt_float(2.0 / k));
    Ok(())
}
