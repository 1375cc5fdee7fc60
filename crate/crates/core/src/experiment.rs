//! Experiment specifications and their CSV artifacts.
//!
//! A spec is a small `key = value` document under an `[experiment]` header:
//!
//! ```text
//! [experiment]
//! kind = "step-size-sweep"
//! n_in = 40
//! n_out = 30
//! epsilon = 0.1
//! gammas = [0.001, 0.004, 0.007, 0.010, 0.013]
//! iterations = 20
//! seeds = [0]
//! ```
//!
//! Running a spec is a pure function of the spec and its seeds: the returned
//! [`Artifact`]s are byte-identical across runs, thread counts and output
//! directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::export::{fmt_float, CsvText};
use crate::graph::CircuitGraph;
use crate::instances::{ramp_inputs, rng_stream, uniform_inputs, uniform_open_closed};
use crate::learning::{
    lipschitz_bound_k, run_contrastive_learning, run_stochastic_cl, validate_schedule,
    LearningConfig, RunStatus, RunTrace, StepSchedule,
};
use crate::solver::{ConductanceVector, FreeStateSolver, TrainingSample};
use crate::verify::{self, VerifyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    StepSizeSweep,
    SizeSweep,
    Stochastic,
    Verify,
}

impl ExperimentKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::StepSizeSweep => "step-size-sweep",
            Self::SizeSweep => "size-sweep",
            Self::Stochastic => "stochastic",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSource {
    /// `p_I = (1, 2, ..., N_I)`.
    Ramp,
    /// Each input potential uniform on `[input_low, input_high]`.
    Uniform,
}

/// One experiment. Defaults reproduce the 40×30 crossbar setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Prefix of the artifact file names; defaults to the kind.
    pub name: Option<String>,
    pub n_in: usize,
    pub n_out: usize,
    /// Graph file used instead of a crossbar. Relative paths are resolved
    /// against the spec file's directory.
    pub graph: Option<PathBuf>,
    pub epsilon: f64,
    /// Constant step sizes for the sweeps.
    pub gammas: Vec<f64>,
    /// Stochastic schedule `gamma_t = schedule_a / (1 + t)^schedule_p`.
    pub schedule_a: f64,
    pub schedule_p: f64,
    pub iterations: usize,
    /// Runs stop early once the error reaches this; 0 runs every iteration.
    pub stop_tolerance: f64,
    /// Uniform initial conductance.
    pub g0: f64,
    /// Hidden target network conductances are uniform on
    /// `(max(hidden_low, epsilon), hidden_high]`.
    pub hidden_low: f64,
    pub hidden_high: f64,
    pub inputs: InputSource,
    pub input_low: f64,
    pub input_high: f64,
    /// Training set size for the stochastic experiment.
    pub samples: usize,
    /// Crossbar branch counts for the size sweep; each must be a square.
    pub branches: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Lipschitz pairs for the verify experiment.
    pub trials: usize,
    /// A run whose final error exceeds this counts as a convergence failure.
    pub fail_above: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::StepSizeSweep,
            name: None,
            n_in: 40,
            n_out: 30,
            graph: None,
            epsilon: 0.1,
            gammas: vec![0.001, 0.004, 0.007, 0.010, 0.013],
            schedule_a: 10.0,
            schedule_p: 1.0,
            iterations: 20,
            stop_tolerance: 0.0,
            g0: 2.0,
            hidden_low: 0.0,
            hidden_high: 10.0,
            inputs: InputSource::Ramp,
            input_low: -5.0,
            input_high: 5.0,
            samples: 100,
            branches: vec![100, 225, 400, 625],
            seeds: vec![0],
            trials: 10_000,
            fail_above: None,
            out_dir: None,
        }
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    experiment: ExperimentSpec,
}

impl ExperimentSpec {
    pub fn with_kind(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: SpecDocument = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        Ok(doc.experiment)
    }

    /// Reads and validates a spec file, resolving a relative graph path
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut spec = Self::parse(&text)?;
        if let (Some(g), Some(dir)) = (&spec.graph, path.parent()) {
            if g.is_relative() {
                spec.graph = Some(dir.join(g));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(&SpecDocument {
            experiment: self.clone(),
        })
        .expect("spec serializes")
    }

    /// SHA-256 of the canonical spec text, excluding the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self {
            out_dir: None,
            ..self.clone()
        };
        Sha256::digest(canonical.to_text().as_bytes()).iter().fold(
            String::with_capacity(64),
            |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            },
        )
    }

    pub fn file_prefix(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let positive = |name: &str, x: f64| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be positive and finite, got {x}"
                )))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("hidden_high", self.hidden_high)?;
        if self.hidden_high <= self.epsilon {
            return bad(format!(
                "hidden_high {} must exceed epsilon {}",
                self.hidden_high, self.epsilon
            ));
        }
        if !(self.hidden_low >= 0.0 && self.hidden_low < self.hidden_high) {
            return bad(format!(
                "hidden_low must lie in [0, hidden_high), got {}",
                self.hidden_low
            ));
        }
        if !(self.g0 >= self.epsilon && self.g0.is_finite()) {
            return bad(format!(
                "g0 {} must be at least epsilon {}",
                self.g0, self.epsilon
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.stop_tolerance >= 0.0) {
            return bad("stop_tolerance must be nonnegative".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if !(self.input_low <= self.input_high)
            || !self.input_low.is_finite()
            || !self.input_high.is_finite()
        {
            return bad(format!(
                "input range [{}, {}] is empty",
                self.input_low, self.input_high
            ));
        }
        if self.graph.is_none() && (self.n_in == 0 || self.n_out == 0) {
            return bad("n_in and n_out must be positive".into());
        }
        match self.kind {
            ExperimentKind::StepSizeSweep | ExperimentKind::SizeSweep => {
                if self.gammas.is_empty() {
                    return bad("gammas must be nonempty".into());
                }
                for &g in &self.gammas {
                    positive("every gamma", g)?;
                }
            }
            ExperimentKind::Stochastic => {
                positive("schedule_a", self.schedule_a)?;
                if !(self.schedule_p >= 0.0 && self.schedule_p.is_finite()) {
                    return bad(format!(
                        "schedule_p must be nonnegative, got {}",
                        self.schedule_p
                    ));
                }
                if self.samples == 0 {
                    return bad("samples must be positive".into());
                }
            }
            ExperimentKind::Verify => {
                if self.trials == 0 {
                    return bad("trials must be positive".into());
                }
            }
        }
        if self.kind == ExperimentKind::SizeSweep {
            if self.branches.is_empty() {
                return bad("branches must be nonempty".into());
            }
            if let Some(&b) = self.branches.iter().find(|&&b| square_side(b).is_none()) {
                return bad(format!(
                    "size sweep needs square crossbars; B = {b} is not a perfect square"
                ));
            }
        }
        Ok(())
    }

    fn load_graph(&self) -> Result<CircuitGraph> {
        match &self.graph {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read graph {}: {e}", path.display()))
                })?;
                CircuitGraph::from_text(&text)
            }
            None => CircuitGraph::crossbar(self.n_in, self.n_out),
        }
    }
}

/// Maps a TOML error to a parse error carrying its 1-based line.
fn parse_error(text: &str, e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    match e.span() {
        Some(r) => Error::Parse {
            line: text[..r.start.min(text.len())].matches('\n').count() + 1,
            message,
        },
        None => Error::Config(message),
    }
}

fn square_side(b: usize) -> Option<usize> {
    let s = (b as f64).sqrt().round() as usize;
    (s > 0 && s * s == b).then_some(s)
}

/// One output file, held in memory until written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub artifacts: Vec<Artifact>,
    /// False on a property violation or a failed convergence threshold.
    pub passed: bool,
    /// Human-readable lines for the console.
    pub summary: Vec<String>,
}

impl ExperimentOutput {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.artifacts
            .iter()
            .map(|a| {
                let path = dir.join(&a.file_name);
                std::fs::write(&path, a.contents.as_bytes())?;
                Ok(path)
            })
            .collect()
    }
}

fn provenance(csv: &mut CsvText, spec: &ExperimentSpec, seed: u64) {
    csv.comment(&format!(
        "resistnet {} kind={} spec_sha256={} seed={seed}",
        env!("CARGO_PKG_VERSION"),
        spec.kind.as_str(),
        spec.hash(),
    ));
}

/// Maps `f` over `items` in parallel when available; order is preserved.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

// Streams of the per-seed generator.
const HIDDEN_STREAM: u64 = 0;
const INPUT_STREAM: u64 = 1;

/// Hidden network conductances uniform on `(max(low, eps), high]`.
pub fn hidden_network(spec: &ExperimentSpec, num_branches: usize, seed: u64) -> ConductanceVector {
    let mut rng = rng_stream(seed, HIDDEN_STREAM);
    let low = spec.hidden_low.max(spec.epsilon);
    let values: Vec<f64> = (0..num_branches)
        .map(|_| uniform_open_closed(&mut rng, low, spec.hidden_high))
        .collect();
    ConductanceVector::new(values, spec.epsilon).expect("draws lie above the floor")
}

/// `count` input vectors for `graph`, from the spec's input source.
pub fn input_vectors(
    spec: &ExperimentSpec,
    graph: &CircuitGraph,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let n = graph.num_inputs();
    match spec.inputs {
        InputSource::Ramp => vec![ramp_inputs(n); count],
        InputSource::Uniform => {
            let mut rng = rng_stream(seed, INPUT_STREAM);
            (0..count)
                .map(|_| uniform_inputs(&mut rng, n, spec.input_low, spec.input_high))
                .collect()
        }
    }
}

/// The deterministic problem for one seed: graph, hidden-network target and
/// starting point.
pub fn deterministic_problem(
    spec: &ExperimentSpec,
    graph: &CircuitGraph,
    seed: u64,
) -> Result<(TrainingSample, ConductanceVector)> {
    let hidden = hidden_network(spec, graph.num_branches(), seed);
    let p_i = input_vectors(spec, graph, 1, seed).remove(0);
    let sample = TrainingSample::realized_by(graph, &hidden, p_i)?;
    let g0 = ConductanceVector::uniform(graph.num_branches(), spec.g0, spec.epsilon)?;
    Ok((sample, g0))
}

fn finished(trace: RunTrace) -> Result<RunTrace> {
    match &trace.status {
        RunStatus::Failed(e) => Err(e.clone()),
        _ => Ok(trace),
    }
}

fn threshold_check(
    spec: &ExperimentSpec,
    label: &str,
    trace: &RunTrace,
    summary: &mut Vec<String>,
) -> bool {
    summary.extend(
        trace
            .warnings
            .iter()
            .map(|w| format!("{label}: warning: {w}")),
    );
    let fin = trace.final_error().unwrap_or(f64::NAN);
    match spec.fail_above {
        Some(limit) if !(fin <= limit) => {
            summary.push(format!(
                "{label}: final error {fin:e} exceeds fail_above {limit:e}"
            ));
            false
        }
        _ => true,
    }
}

/// Writes error curves side by side, one column per run. Runs that stopped
/// early leave their remaining cells empty.
fn wide_errors(csv: &mut CsvText, columns: &[String], traces: &[RunTrace]) {
    csv.row(std::iter::once("t".to_string()).chain(columns.iter().cloned()));
    let rows = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    for t in 0..rows {
        let mut cells = vec![t.to_string()];
        cells.extend(traces.iter().map(|tr| {
            tr.records
                .get(t)
                .map(|r| fmt_float(r.error))
                .unwrap_or_default()
        }));
        csv.row(cells);
    }
}

fn learning_config(spec: &ExperimentSpec, gamma: f64) -> LearningConfig {
    LearningConfig::deterministic(gamma, spec.epsilon, spec.iterations)
        .with_stop_tolerance(spec.stop_tolerance)
}

/// Fixed step sizes on one instance; one error column per gamma.
pub fn experiment_step_size_sweep(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    expect_kind(spec, ExperimentKind::StepSizeSweep)?;
    spec.validate()?;
    let graph = spec.load_graph()?;
    let mut out = ExperimentOutput {
        artifacts: Vec::new(),
        passed: true,
        summary: Vec::new(),
    };
    for &seed in &spec.seeds {
        let (sample, g0) = deterministic_problem(spec, &graph, seed)?;
        let k = lipschitz_bound_k(&graph, &sample.p_i, spec.epsilon);
        let traces = par_map(&spec.gammas, |&gamma| {
            run_contrastive_learning(&graph, &g0, &sample, &learning_config(spec, gamma))
                .and_then(finished)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let prefix = format!("{}_seed{seed}", spec.file_prefix());
        let mut csv = CsvText::new();
        provenance(&mut csv, spec, seed);
        csv.comment(&format!("two_over_k={}", fmt_float(2.0 / k)));
        let columns: Vec<String> = spec.gammas.iter().map(|g| format!("gamma={g}")).collect();
        wide_errors(&mut csv, &columns, &traces);
        out.artifacts.push(Artifact {
            file_name: format!("{prefix}_errors.csv"),
            contents: csv.finish(),
        });

        let mut bound = CsvText::new();
        provenance(&mut bound, spec, seed);
        bound.row(["branches", "k", "two_over_k"]);
        bound.row([
            graph.num_branches().to_string(),
            fmt_float(k),
            fmt_float(2.0 / k),
        ]);
        out.artifacts.push(Artifact {
            file_name: format!("{prefix}_bound.csv"),
            contents: bound.finish(),
        });

        out.summary.push(format!(
            "seed {seed}: B = {}, 2/K = {:e}",
            graph.num_branches(),
            2.0 / k
        ));
        for (gamma, trace) in spec.gammas.iter().zip(&traces) {
            let label = format!("seed {seed} gamma {gamma}");
            out.summary.push(format!(
                "{label}: final error {:e} after {} iterations",
                trace.final_error().unwrap_or(f64::NAN),
                trace.records.len() - 1
            ));
            out.passed &= threshold_check(spec, &label, trace, &mut out.summary);
        }
    }
    Ok(out)
}

/// Square crossbars of increasing size at one step size; error curves plus
/// `2/K` against `B`.
pub fn experiment_size_sweep(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    expect_kind(spec, ExperimentKind::SizeSweep)?;
    spec.validate()?;
    if spec.graph.is_some() {
        return Err(Error::Config(
            "the size sweep builds its own crossbars; remove `graph`".into(),
        ));
    }
    let gamma = spec.gammas[0];
    if spec.gammas.len() > 1 {
        log::warn!("size sweep uses only the first gamma ({gamma})");
    }
    let mut out = ExperimentOutput {
        artifacts: Vec::new(),
        passed: true,
        summary: Vec::new(),
    };
    for &seed in &spec.seeds {
        let runs = par_map(&spec.branches, |&b| -> Result<(f64, RunTrace)> {
            let side = square_side(b).expect("validated");
            let graph = CircuitGraph::crossbar(side, side)?;
            let (sample, g0) = deterministic_problem(spec, &graph, seed)?;
            let k = lipschitz_bound_k(&graph, &sample.p_i, spec.epsilon);
            let trace =
                run_contrastive_learning(&graph, &g0, &sample, &learning_config(spec, gamma))
                    .and_then(finished)?;
            Ok((k, trace))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let prefix = format!("{}_seed{seed}", spec.file_prefix());
        let mut csv = CsvText::new();
        provenance(&mut csv, spec, seed);
        csv.comment(&format!("gamma={gamma}"));
        let columns: Vec<String> = spec.branches.iter().map(|b| format!("B={b}")).collect();
        let traces: Vec<RunTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
        wide_errors(&mut csv, &columns, &traces);
        out.artifacts.push(Artifact {
            file_name: format!("{prefix}_errors.csv"),
            contents: csv.finish(),
        });

        let mut bound = CsvText::new();
        provenance(&mut bound, spec, seed);
        bound.row(["branches", "two_over_k"]);
        for (b, (k, _)) in spec.branches.iter().zip(&runs) {
            bound.row([b.to_string(), fmt_float(2.0 / k)]);
        }
        out.artifacts.push(Artifact {
            file_name: format!("{prefix}_bound.csv"),
            contents: bound.finish(),
        });

        for (b, (k, trace)) in spec.branches.iter().zip(&runs) {
            let label = format!("seed {seed} B {b}");
            out.summary.push(format!(
                "{label}: 2/K = {:e}, final error {:e}",
                2.0 / k,
                trace.final_error().unwrap_or(f64::NAN)
            ));
            out.passed &= threshold_check(spec, &label, trace, &mut out.summary);
        }
    }
    Ok(out)
}

/// Training set of `spec.samples` inputs with targets from one hidden
/// network.
pub fn stochastic_problem(
    spec: &ExperimentSpec,
    graph: &CircuitGraph,
    seed: u64,
) -> Result<(Vec<TrainingSample>, ConductanceVector)> {
    let hidden = hidden_network(spec, graph.num_branches(), seed);
    let samples = input_vectors(spec, graph, spec.samples, seed)
        .into_iter()
        .map(|p_i| TrainingSample::realized_by(graph, &hidden, p_i))
        .collect::<Result<Vec<_>>>()?;
    let g0 = ConductanceVector::uniform(graph.num_branches(), spec.g0, spec.epsilon)?;
    Ok((samples, g0))
}

/// Stochastic learning with a decaying schedule; mean error per iteration.
pub fn experiment_stochastic(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    expect_kind(spec, ExperimentKind::Stochastic)?;
    spec.validate()?;
    let graph = spec.load_graph()?;
    let schedule = StepSchedule::Power {
        scale: spec.schedule_a,
        exponent: spec.schedule_p,
    };
    let diag = validate_schedule(&schedule, spec.iterations);
    let runs = par_map(&spec.seeds, |&seed| -> Result<RunTrace> {
        let (samples, g0) = stochastic_problem(spec, &graph, seed)?;
        let config =
            LearningConfig::stochastic(schedule.clone(), spec.epsilon, spec.iterations, seed)
                .with_stop_tolerance(spec.stop_tolerance);
        run_stochastic_cl(&graph, &g0, &samples, &config).and_then(finished)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut out = ExperimentOutput {
        artifacts: Vec::new(),
        passed: true,
        summary: diag
            .warnings
            .iter()
            .map(|w| format!("schedule: {w}"))
            .collect(),
    };
    for (&seed, trace) in spec.seeds.iter().zip(&runs) {
        let mut csv = CsvText::new();
        provenance(&mut csv, spec, seed);
        trace.write_csv(&mut csv);
        out.artifacts.push(Artifact {
            file_name: format!("{}_seed{seed}_trace.csv", spec.file_prefix()),
            contents: csv.finish(),
        });
        let e0 = trace.records.first().map(|r| r.error).unwrap_or(f64::NAN);
        let label = format!("seed {seed}");
        out.summary.push(format!(
            "{label}: mean error {e0:e} -> {:e} (ratio {:.4})",
            trace.final_error().unwrap_or(f64::NAN),
            trace.final_error().unwrap_or(f64::NAN) / e0
        ));
        out.passed &= threshold_check(spec, &label, trace, &mut out.summary);
    }
    Ok(out)
}

/// Runs the property suites. With a graph file, the Lipschitz sweep runs on
/// that graph instead of the crossbar.
pub fn experiment_verify(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    expect_kind(spec, ExperimentKind::Verify)?;
    spec.validate()?;
    let mut out = ExperimentOutput {
        artifacts: Vec::new(),
        passed: true,
        summary: Vec::new(),
    };
    for &seed in &spec.seeds {
        let cfg = VerifyConfig {
            epsilon: spec.epsilon,
            lipschitz_pairs: spec.trials,
            lipschitz_crossbar: (spec.n_in, spec.n_out),
            ..VerifyConfig::with_seed(seed)
        };
        // a graph file replaces the crossbar in the Lipschitz sweep; check it
        // first so a singular Laplacian surfaces before any suite runs
        let custom = match &spec.graph {
            Some(_) => {
                let graph = spec.load_graph()?;
                let g = vec![spec.g0; graph.num_branches()];
                FreeStateSolver::new(&graph, &g)?;
                let hidden = hidden_network(spec, graph.num_branches(), seed);
                let p_i = ramp_inputs(graph.num_inputs());
                let sample = TrainingSample::realized_by(&graph, &hidden, p_i)?;
                Some((graph, sample))
            }
            None => None,
        };
        let mut report = verify::run_all(&cfg);
        if let Some((graph, sample)) = custom {
            let (suite, diag) = verify::lipschitz_suite_on(&graph, &sample, &cfg);
            let slot = report
                .suites
                .iter_mut()
                .find(|s| s.name == suite.name)
                .expect("lipschitz suite present");
            *slot = suite;
            report.lipschitz = diag;
        }

        let prefix = format!("{}_seed{seed}", spec.file_prefix());
        let mut csv = CsvText::new();
        provenance(&mut csv, spec, seed);
        report.write_csv(&mut csv);
        out.artifacts.push(Artifact {
            file_name: format!("{prefix}_diagnostics.csv"),
            contents: csv.finish(),
        });
        if let Some(diag) = &report.lipschitz {
            let mut lip = CsvText::new();
            provenance(&mut lip, spec, seed);
            out.artifacts.push(Artifact {
                file_name: format!("{prefix}_lipschitz.csv"),
                contents: lip.finish() + &diag.to_csv(),
            });
        }
        for s in &report.suites {
            out.summary.push(format!(
                "seed {seed} {:<22} {} ({} checks) {}",
                s.name,
                if s.passed { "pass" } else { "FAIL" },
                s.checks,
                s.detail
            ));
        }
        out.passed &= report.passed();
    }
    Ok(out)
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind == kind {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "expected a {} spec, got {}",
            kind.as_str(),
            spec.kind.as_str()
        )))
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    match spec.kind {
        ExperimentKind::StepSizeSweep => experiment_step_size_sweep(spec),
        ExperimentKind::SizeSweep => experiment_size_sweep(spec),
        ExperimentKind::Stochastic => experiment_stochastic(spec),
        ExperimentKind::Verify => experiment_verify(spec),
    }
}
