//! Property suites over seeded random instances.
//!
//! Each suite samples its own instances from an independent stream of the
//! run seed, so suites can be run alone or together with identical results.

use nalgebra::DVector;
use rand::Rng;

use crate::analysis::{
    check_lipschitz_cocoercive, io_map_matrix, jacobian_report, max_symmetric_eigenvalue,
    path_independence, random_box_point, LipschitzDiagnostics,
};
use crate::error::{Error, Result};
use crate::export::{fmt_float, CsvText};
use crate::graph::CircuitGraph;
use crate::instances::{
    ramp_inputs, random_instance, rng_stream, uniform_conductances, Instance, InstanceParams,
};
use crate::learning::{
    lipschitz_bound_k, project_c_eps, run_contrastive_learning, run_stochastic_cl,
    surrogate_gradient_extended, LearningConfig, StepSchedule,
};
use crate::solver::{
    power_at_potentials, solve_output_potentials, ConductanceVector, TrainingSample,
};

/// Result of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Number of individual checks performed.
    pub checks: usize,
    /// Worst observed value of the suite's key statistic.
    pub worst: f64,
    /// Threshold the key statistic is compared against.
    pub threshold: f64,
    /// Witness of the first failure, or a short summary.
    pub detail: String,
}

impl SuiteOutcome {
    fn from_checks(
        name: &'static str,
        checks: usize,
        worst: f64,
        threshold: f64,
        failure: Option<String>,
    ) -> Self {
        Self {
            name,
            passed: failure.is_none(),
            checks,
            worst,
            threshold,
            detail: failure.unwrap_or_else(|| "ok".into()),
        }
    }

    fn errored(name: &'static str, err: Error) -> Self {
        Self {
            name,
            passed: false,
            checks: 0,
            worst: f64::NAN,
            threshold: f64::NAN,
            detail: err.to_string(),
        }
    }
}

/// Sizes of each suite.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub epsilon: f64,
    pub jacobian_instances: usize,
    pub fd_step: f64,
    pub row_stochastic_instances: usize,
    pub lipschitz_pairs: usize,
    pub lipschitz_crossbar: (usize, usize),
    pub km_instances: usize,
    pub km_iterations: usize,
    pub min_power_instances: usize,
    pub perturbations: usize,
    pub feasibility_instances: usize,
    pub path_instances: usize,
}

impl VerifyConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            epsilon: 0.1,
            jacobian_instances: 50,
            fd_step: 1e-6,
            row_stochastic_instances: 100,
            lipschitz_pairs: 10_000,
            lipschitz_crossbar: (40, 30),
            km_instances: 20,
            km_iterations: 500,
            min_power_instances: 50,
            perturbations: 100,
            feasibility_instances: 20,
            path_instances: 10,
        }
    }

    fn params(&self) -> InstanceParams {
        InstanceParams {
            epsilon: self.epsilon,
            ..InstanceParams::default()
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self::with_seed(42)
    }
}

// Stream ids, one per suite.
const JACOBIAN: u64 = 1;
const ROW_STOCHASTIC: u64 = 2;
const LIPSCHITZ: u64 = 3;
const KM: u64 = 4;
const MIN_POWER: u64 = 5;
const FEASIBILITY: u64 = 6;
const PATH: u64 = 7;

fn instances(cfg: &VerifyConfig, stream: u64, count: usize) -> Result<Vec<Instance>> {
    let mut rng = rng_stream(cfg.seed, stream);
    (0..count)
        .map(|_| random_instance(&mut rng, &cfg.params()))
        .collect()
}

/// Closed form vs central differences, symmetry, semidefiniteness and
/// `lambda_max(J) <= K`.
pub fn jacobian_suite(cfg: &VerifyConfig) -> SuiteOutcome {
    const NAME: &str = "jacobian";
    const FD_TOL: f64 = 1e-5;
    const SYM_TOL: f64 = 1e-12;
    const EIG_TOL: f64 = -1e-10;
    let insts = match instances(cfg, JACOBIAN, cfg.jacobian_instances) {
        Ok(i) => i,
        Err(e) => return SuiteOutcome::errored(NAME, e),
    };
    let mut worst_fd: f64 = 0.0;
    let mut failure = None;
    for (n, inst) in insts.iter().enumerate() {
        // keep every conductance clear of the floor for the central stencil
        let g = ConductanceVector::new(
            inst.conductances
                .as_slice()
                .iter()
                .map(|&x| x.max(cfg.epsilon + 1e3 * cfg.fd_step))
                .collect::<Vec<_>>(),
            cfg.epsilon,
        )
        .expect("raised above the floor");
        let report = match jacobian_report(&inst.graph, &g, &inst.sample, cfg.fd_step) {
            Ok(r) => r,
            Err(e) => return SuiteOutcome::errored(NAME, e),
        };
        let k = lipschitz_bound_k(&inst.graph, &inst.sample.p_i, cfg.epsilon);
        let lam = max_symmetric_eigenvalue(&report.jacobian);
        worst_fd = worst_fd.max(report.fd_defect);
        if failure.is_none()
            && (report.fd_defect > FD_TOL
                || report.symmetry_defect > SYM_TOL
                || report.min_eigenvalue < EIG_TOL
                || lam > k)
        {
            failure = Some(format!(
                "instance {}: B={} fd_defect={:e} symmetry_defect={:e} min_eig={:e} lambda_max={:e} K={:e}",
                n + 1,
                inst.graph.num_branches(),
                report.fd_defect,
                report.symmetry_defect,
                report.min_eigenvalue,
                lam,
                k
            ));
        }
    }
    SuiteOutcome::from_checks(NAME, insts.len(), worst_fd, FD_TOL, failure)
}

/// Rows of the input-output map sum to one and entries lie in `[0, 1]`.
pub fn row_stochastic_suite(cfg: &VerifyConfig) -> SuiteOutcome {
    const NAME: &str = "row-stochastic";
    const SUM_TOL: f64 = 1e-10;
    const ENTRY_SLACK: f64 = 1e-12;
    let insts = match instances(cfg, ROW_STOCHASTIC, cfg.row_stochastic_instances) {
        Ok(i) => i,
        Err(e) => return SuiteOutcome::errored(NAME, e),
    };
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for (n, inst) in insts.iter().enumerate() {
        let m = match io_map_matrix(&inst.graph, &inst.conductances) {
            Ok(m) => m,
            Err(e) => return SuiteOutcome::errored(NAME, e),
        };
        for (r, row) in m.row_iter().enumerate() {
            let dev = (row.sum() - 1.0).abs();
            worst = worst.max(dev);
            let bad_entry = row
                .iter()
                .find(|&&x| !(-ENTRY_SLACK..=1.0 + ENTRY_SLACK).contains(&x));
            if failure.is_none() && (dev > SUM_TOL || bad_entry.is_some()) {
                failure = Some(format!(
                    "instance {} row {}: sum deviation {dev:e}, entry {:?}",
                    n + 1,
                    r + 1,
                    bad_entry
                ));
            }
        }
    }
    SuiteOutcome::from_checks(NAME, insts.len(), worst, SUM_TOL, failure)
}

/// The crossbar instance used for the Lipschitz sweep: ramp inputs and a
/// target realized by a hidden uniform `(eps, 10]` network.
pub fn lipschitz_instance(cfg: &VerifyConfig) -> Result<(CircuitGraph, TrainingSample)> {
    let (n_in, n_out) = cfg.lipschitz_crossbar;
    let graph = CircuitGraph::crossbar(n_in, n_out)?;
    let mut rng = rng_stream(cfg.seed, LIPSCHITZ);
    let hidden = uniform_conductances(&mut rng, graph.num_branches(), cfg.epsilon, 10.0);
    let sample = TrainingSample::realized_by(&graph, &hidden, ramp_inputs(n_in))?;
    Ok((graph, sample))
}

pub fn lipschitz_suite(cfg: &VerifyConfig) -> (SuiteOutcome, Option<LipschitzDiagnostics>) {
    match lipschitz_instance(cfg) {
        Ok((graph, sample)) => lipschitz_suite_on(&graph, &sample, cfg),
        Err(e) => (SuiteOutcome::errored(LIPSCHITZ_NAME, e), None),
    }
}

const LIPSCHITZ_NAME: &str = "lipschitz-cocoercive";

/// Lipschitz and cocoercivity sweep on a caller-supplied problem.
pub fn lipschitz_suite_on(
    graph: &CircuitGraph,
    sample: &TrainingSample,
    cfg: &VerifyConfig,
) -> (SuiteOutcome, Option<LipschitzDiagnostics>) {
    match check_lipschitz_cocoercive(graph, sample, cfg.epsilon, cfg.lipschitz_pairs, cfg.seed) {
        Ok(d) => (
            SuiteOutcome::from_checks(
                LIPSCHITZ_NAME,
                d.pairs.len(),
                d.worst_lipschitz_ratio,
                1.0,
                None,
            ),
            Some(d),
        ),
        Err(e @ Error::PropertyViolation(_)) => (
            SuiteOutcome::from_checks(
                LIPSCHITZ_NAME,
                cfg.lipschitz_pairs,
                f64::NAN,
                1.0,
                Some(e.to_string()),
            ),
            None,
        ),
        Err(e) => (SuiteOutcome::errored(LIPSCHITZ_NAME, e), None),
    }
}

/// With `gamma = 1/K` the iteration map is averaged, so the fixed-point
/// residual `||g^{t+1} - g^t||` never increases.
pub fn residual_monotonicity_suite(cfg: &VerifyConfig) -> SuiteOutcome {
    const NAME: &str = "residual-monotonicity";
    const STEP_TOL: f64 = 1e-12;
    let insts = match instances(cfg, KM, cfg.km_instances) {
        Ok(i) => i,
        Err(e) => return SuiteOutcome::errored(NAME, e),
    };
    let mut worst = f64::NEG_INFINITY;
    let mut failure = None;
    let mut checks = 0;
    for (n, inst) in insts.iter().enumerate() {
        let k = lipschitz_bound_k(&inst.graph, &inst.sample.p_i, cfg.epsilon);
        let config = LearningConfig::deterministic(1.0 / k, cfg.epsilon, cfg.km_iterations)
            .with_stop_tolerance(0.0);
        let trace = match run_contrastive_learning(
            &inst.graph,
            &inst.conductances,
            &inst.sample,
            &config,
        ) {
            Ok(t) => t,
            Err(e) => return SuiteOutcome::errored(NAME, e),
        };
        let res = trace.residuals();
        for (t, w) in res.windows(2).enumerate() {
            checks += 1;
            let rise = w[1] - w[0];
            worst = worst.max(rise);
            if failure.is_none() && rise > STEP_TOL {
                failure = Some(format!(
                    "instance {} step {}: residual rose from {:e} to {:e}",
                    n + 1,
                    t + 1,
                    w[0],
                    w[1]
                ));
            }
        }
    }
    SuiteOutcome::from_checks(NAME, checks, worst, STEP_TOL, failure)
}

/// The free-state output potentials minimize dissipated power:
/// `S(p_I, p_O(g)) <= S(p_I, p_O(g) + delta)` for perturbations of norm 0.1.
pub fn minimum_power_suite(cfg: &VerifyConfig) -> SuiteOutcome {
    const NAME: &str = "minimum-power";
    const TOL: f64 = 1e-12;
    let mut rng = rng_stream(cfg.seed, MIN_POWER);
    let mut worst = f64::NEG_INFINITY;
    let mut failure = None;
    let mut checks = 0;
    for n in 0..cfg.min_power_instances {
        let inst = match random_instance(&mut rng, &cfg.params()) {
            Ok(i) => i,
            Err(e) => return SuiteOutcome::errored(NAME, e),
        };
        let (graph, g, p_i) = (&inst.graph, &inst.conductances, &inst.sample.p_i);
        let mut run = || -> Result<()> {
            let p_o = solve_output_potentials(graph, g, p_i)?;
            let base = power_at_potentials(graph, g, p_i, &p_o)?;
            for _ in 0..cfg.perturbations {
                let dir = DVector::from_fn(p_o.len(), |_, _| rng.random_range(-1.0..1.0));
                let delta = dir.normalize() * 0.1;
                let perturbed = power_at_potentials(graph, g, p_i, &(&p_o + delta))?;
                checks += 1;
                // positive means the minimum-power property is violated
                let excess = base - perturbed;
                worst = worst.max(excess);
                if failure.is_none() && excess > TOL {
                    failure = Some(format!(
                        "instance {}: free-state power {base:e} exceeds perturbed power {perturbed:e}",
                        n + 1
                    ));
                }
            }
            Ok(())
        };
        if let Err(e) = run() {
            return SuiteOutcome::errored(NAME, e);
        }
    }
    SuiteOutcome::from_checks(NAME, checks, worst, TOL, failure)
}

/// Projection used by [`feasibility_suite_with`].
pub type Projection = fn(&DVector<f64>, f64) -> DVector<f64>;

fn library_projection(g: &DVector<f64>, epsilon: f64) -> DVector<f64> {
    project_c_eps(g, epsilon).values().clone()
}

/// Every iterate stays in the conductance box, for both the library drivers
/// and a reference loop built on `projection`. Step sizes are large so the
/// floor is active.
pub fn feasibility_suite_with(cfg: &VerifyConfig, projection: Projection) -> SuiteOutcome {
    const NAME: &str = "feasibility";
    const ITERS: usize = 30;
    let insts = match instances(cfg, FEASIBILITY, cfg.feasibility_instances) {
        Ok(i) => i,
        Err(e) => return SuiteOutcome::errored(NAME, e),
    };
    let eps = cfg.epsilon;
    let mut floor = FloorTracker::new(eps);
    for (n, inst) in insts.iter().enumerate() {
        let gamma = 5.0;
        // reference loop with the supplied projection
        let mut g = inst.conductances.values().clone();
        for _ in 0..ITERS {
            let h = match surrogate_gradient_extended(&inst.graph, g.as_slice(), &inst.sample) {
                Ok(h) => h,
                Err(e) => {
                    floor.fail(format!(
                        "instance {}: reference iterate left the domain: {e}",
                        n + 1
                    ));
                    break;
                }
            };
            g = projection(&(&g - h * gamma), eps);
            floor.check(n, "reference", g.as_slice());
        }

        let mut det = LearningConfig::deterministic(gamma, eps, ITERS).with_stop_tolerance(0.0);
        det.record_conductances_every = 1;
        let schedule = StepSchedule::Power {
            scale: gamma,
            exponent: 1.0,
        };
        let mut sto =
            LearningConfig::stochastic(schedule, eps, ITERS, cfg.seed).with_stop_tolerance(0.0);
        sto.record_conductances_every = 1;
        let samples = [inst.sample.clone()];
        let traces = [
            (
                "deterministic",
                run_contrastive_learning(&inst.graph, &inst.conductances, &inst.sample, &det),
            ),
            (
                "stochastic",
                run_stochastic_cl(&inst.graph, &inst.conductances, &samples, &sto),
            ),
        ];
        for (what, trace) in traces {
            let trace = match trace {
                Ok(t) => t,
                Err(e) => return SuiteOutcome::errored(NAME, e),
            };
            for r in &trace.records {
                if let Some(g) = &r.conductances {
                    floor.check(n, what, g);
                }
            }
            floor.check(n, what, trace.final_conductances.as_slice());
        }
    }
    SuiteOutcome::from_checks(NAME, floor.checks, floor.lowest, eps, floor.failure)
}

struct FloorTracker {
    eps: f64,
    checks: usize,
    lowest: f64,
    failure: Option<String>,
}

impl FloorTracker {
    fn new(eps: f64) -> Self {
        Self {
            eps,
            checks: 0,
            lowest: f64::INFINITY,
            failure: None,
        }
    }

    fn fail(&mut self, msg: String) {
        self.failure.get_or_insert(msg);
    }

    fn check(&mut self, n: usize, what: &str, g: &[f64]) {
        self.checks += 1;
        let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
        self.lowest = self.lowest.min(lo);
        // negated so that NaN also fails
        if !(lo >= self.eps) {
            let eps = self.eps;
            self.fail(format!(
                "instance {}: {what} iterate has min conductance {lo:e} < {eps}",
                n + 1
            ));
        }
    }
}

pub fn feasibility_suite(cfg: &VerifyConfig) -> SuiteOutcome {
    feasibility_suite_with(cfg, library_projection)
}

/// Line integrals of `h` between two random points along two different
/// two-segment paths agree, as they must for a gradient field.
pub fn path_independence_suite(cfg: &VerifyConfig) -> SuiteOutcome {
    const NAME: &str = "path-independence";
    const TOL: f64 = 1e-6;
    let mut rng = rng_stream(cfg.seed, PATH);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for n in 0..cfg.path_instances {
        let inst = match random_instance(&mut rng, &cfg.params()) {
            Ok(i) => i,
            Err(e) => return SuiteOutcome::errored(NAME, e),
        };
        let b = inst.graph.num_branches();
        let pts: Vec<DVector<f64>> = (0..4)
            .map(|_| random_box_point(&mut rng, b, cfg.epsilon, 10.0))
            .collect();
        let (a, c) = match path_independence(
            &inst.graph,
            &inst.sample,
            &pts[0],
            &pts[1],
            (&pts[2], &pts[3]),
            16,
        ) {
            Ok(x) => x,
            Err(e) => return SuiteOutcome::errored(NAME, e),
        };
        let gap = (a - c).abs();
        worst = worst.max(gap);
        if failure.is_none() && gap > TOL {
            failure = Some(format!(
                "instance {}: integrals {a:e} and {c:e} differ by {gap:e}",
                n + 1
            ));
        }
    }
    SuiteOutcome::from_checks(NAME, cfg.path_instances, worst, TOL, failure)
}

/// All suites.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteOutcome>,
    pub lipschitz: Option<LipschitzDiagnostics>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    /// `suite,passed,checks,worst,threshold,detail`.
    pub fn to_csv(&self) -> String {
        let mut csv = CsvText::new();
        self.write_csv(&mut csv);
        csv.finish()
    }

    pub fn write_csv(&self, csv: &mut CsvText) {
        csv.row(["suite", "passed", "checks", "worst", "threshold", "detail"]);
        for s in &self.suites {
            csv.row([
                s.name.to_string(),
                s.passed.to_string(),
                s.checks.to_string(),
                fmt_float(s.worst),
                fmt_float(s.threshold),
                format!("\"{}\"", s.detail.replace('"', "'")),
            ]);
        }
    }
}

pub fn run_all(cfg: &VerifyConfig) -> VerifyReport {
    let (lip, diag) = lipschitz_suite(cfg);
    let suites = vec![
        jacobian_suite(cfg),
        row_stochastic_suite(cfg),
        lip,
        residual_monotonicity_suite(cfg),
        minimum_power_suite(cfg),
        feasibility_suite(cfg),
        path_independence_suite(cfg),
    ];
    VerifyReport {
        seed: cfg.seed,
        suites,
        lipschitz: diag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            jacobian_instances: 5,
            row_stochastic_instances: 10,
            lipschitz_pairs: 50,
            lipschitz_crossbar: (4, 3),
            km_instances: 3,
            km_iterations: 50,
            min_power_instances: 5,
            perturbations: 10,
            feasibility_instances: 3,
            path_instances: 2,
            ..VerifyConfig::with_seed(5)
        }
    }

    #[test]
    fn small_suites_pass() {
        let report = run_all(&small());
        for s in &report.suites {
            assert!(s.passed, "{}: {}", s.name, s.detail);
            assert!(s.checks > 0, "{}", s.name);
        }
        assert!(report.to_csv().starts_with("suite,passed,"));
    }

    #[test]
    fn clamping_from_above_breaks_feasibility() {
        fn clamp_above(g: &DVector<f64>, eps: f64) -> DVector<f64> {
            g.map(|x| x.min(eps))
        }
        let out = feasibility_suite_with(&small(), clamp_above);
        assert!(!out.passed);
    }
}
