//! Contrastive Learning on resistor networks.
//!
//! Every iteration solves the free state, compares squared branch voltages
//! with the clamped state and moves each conductance by its own difference:
//!
//! ```text
//! g_k <- max(eps, g_k - gamma * ((v^D_k)^2 - v_k(g)^2))
//! ```
//!
//! Three drivers share one loop: the single-sample iteration, a batch
//! variant averaging the update over all samples, and a stochastic variant
//! that draws one sample per step with a decaying step size.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::export::{fmt_float, fmt_opt_float, CsvText};
use crate::graph::CircuitGraph;
use crate::solver::{ConductanceVector, FreeStateSolver, TrainingSample};

/// Euclidean projection onto `{g : g_k >= epsilon}`.
///
/// # Panics
/// If `epsilon` is not positive.
pub fn project_c_eps(g: &DVector<f64>, epsilon: f64) -> ConductanceVector {
    assert!(epsilon > 0.0, "conductance floor must be positive");
    ConductanceVector::from_projected(g.map(|x| x.max(epsilon)), epsilon)
}

/// The update applied at a single branch, using only that branch's
/// conductance, free-state voltage and clamped voltage.
#[inline]
pub fn local_update(g_k: f64, v_k: f64, v_desired_k: f64, gamma: f64, epsilon: f64) -> f64 {
    projected_step(g_k, v_desired_k * v_desired_k - v_k * v_k, gamma, epsilon)
}

#[inline]
fn projected_step(g_k: f64, direction_k: f64, gamma: f64, epsilon: f64) -> f64 {
    (g_k - gamma * direction_k).max(epsilon)
}

fn h_from_voltages(v: &DVector<f64>, v_desired: &DVector<f64>) -> DVector<f64> {
    v_desired.zip_map(v, |d, f| d * d - f * f)
}

/// Surrogate gradient `h(g) = (v^D)^2 - v(g)^2`.
pub fn surrogate_gradient_h(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
) -> Result<DVector<f64>> {
    let v = FreeStateSolver::new(graph, g.as_slice())?.branch_voltages(&sample.p_i)?;
    check_len("clamped voltages", v.len(), sample.v_desired.len())?;
    Ok(h_from_voltages(&v, &sample.v_desired))
}

/// `h` on the open orthant `(0, inf)^B`, without the floor check.
pub(crate) fn surrogate_gradient_extended(
    graph: &CircuitGraph,
    g: &[f64],
    sample: &TrainingSample,
) -> Result<DVector<f64>> {
    let v = FreeStateSolver::new(graph, g)?.branch_voltages(&sample.p_i)?;
    Ok(h_from_voltages(&v, &sample.v_desired))
}

/// Power gap `Q(g) = (v^D)^T G v^D - v(g)^T G v(g)`. Nonnegative because
/// the free state minimizes dissipated power.
pub fn cost_q(graph: &CircuitGraph, g: &ConductanceVector, sample: &TrainingSample) -> Result<f64> {
    cost_q_extended(graph, g.as_slice(), sample)
}

pub(crate) fn cost_q_extended(
    graph: &CircuitGraph,
    g: &[f64],
    sample: &TrainingSample,
) -> Result<f64> {
    let v = FreeStateSolver::new(graph, g)?.branch_voltages(&sample.p_i)?;
    check_len("clamped voltages", v.len(), sample.v_desired.len())?;
    Ok(g.iter()
        .zip(sample.v_desired.iter().zip(v.iter()))
        .map(|(g, (d, f))| g * (d * d - f * f))
        .sum())
}

/// One Contrastive Learning step `T(g) = P(g - gamma h(g))`.
pub fn cl_step(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
    gamma: f64,
) -> Result<ConductanceVector> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    let v = FreeStateSolver::new(graph, g.as_slice())?.branch_voltages(&sample.p_i)?;
    check_len("clamped voltages", v.len(), sample.v_desired.len())?;
    let eps = g.epsilon();
    let next = DVector::from_iterator(
        g.len(),
        (0..g.len()).map(|k| local_update(g.values()[k], v[k], sample.v_desired[k], gamma, eps)),
    );
    Ok(ConductanceVector::from_projected(next, eps))
}

fn apply_direction(
    g: &ConductanceVector,
    direction: &DVector<f64>,
    gamma: f64,
) -> ConductanceVector {
    let eps = g.epsilon();
    let next = g
        .values()
        .zip_map(direction, |g_k, d_k| projected_step(g_k, d_k, gamma, eps));
    ConductanceVector::from_projected(next, eps)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m * m.transpose();
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .sqrt()
}

/// Lipschitz constant of `h` on the conductance box,
/// `K = (2/eps) (||D_I|| + sqrt(N_I N_O) ||D_O||)^2 ||p_I||^2`, with
/// spectral norms.
pub fn lipschitz_bound_k(graph: &CircuitGraph, p_i: &DVector<f64>, epsilon: f64) -> f64 {
    let (d_i, d_o) = graph.partition_incidence();
    let coupling = ((graph.num_inputs() * graph.num_outputs()) as f64).sqrt();
    let s = spectral_norm(&d_i) + coupling * spectral_norm(&d_o);
    2.0 / epsilon * s * s * p_i.norm_squared()
}

/// Step size as a function of the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `scale / (1 + t)^exponent`.
    Power {
        scale: f64,
        exponent: f64,
    },
    /// Explicit values; the last one repeats past the end.
    Table(Vec<f64>),
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            StepSchedule::Constant(g) => *g,
            StepSchedule::Power { scale, exponent } => scale / (1.0 + t as f64).powf(*exponent),
            StepSchedule::Table(v) => v.get(t).or(v.last()).copied().unwrap_or(f64::NAN),
        }
    }
}

/// Outcome of [`validate_schedule`]. Infinite-sum conditions are decided
/// symbolically where the schedule family allows it, never from a finite
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDiagnostics {
    pub positive: bool,
    pub nonincreasing: bool,
    /// `sum_t gamma_t = inf`, when decidable.
    pub sum_diverges: Option<bool>,
    /// `sum_t gamma_t^2 < inf`, when decidable.
    pub square_summable: Option<bool>,
    pub warnings: Vec<String>,
}

impl ScheduleDiagnostics {
    /// Both stochastic-approximation conditions are known to hold.
    pub fn satisfies_conditions(&self) -> bool {
        self.positive
            && self.nonincreasing
            && self.sum_diverges == Some(true)
            && self.square_summable == Some(true)
    }
}

pub fn validate_schedule(schedule: &StepSchedule, horizon: usize) -> ScheduleDiagnostics {
    let mut warnings = Vec::new();
    let values: Vec<f64> = (0..=horizon).map(|t| schedule.at(t)).collect();
    let positive = values.iter().all(|&g| g > 0.0 && g.is_finite());
    if !positive {
        warnings.push("step sizes must be positive and finite".to_string());
    }
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0]);
    if !nonincreasing {
        warnings.push("step sizes increase somewhere within the horizon".to_string());
    }

    let (sum_diverges, square_summable) = match schedule {
        StepSchedule::Constant(g) if *g > 0.0 => (Some(true), Some(false)),
        StepSchedule::Table(v) if v.last().is_some_and(|&g| g > 0.0) => (Some(true), Some(false)),
        StepSchedule::Power { scale, exponent } if *scale > 0.0 => {
            (Some(*exponent <= 1.0), Some(*exponent > 0.5))
        }
        _ => (None, None),
    };
    if matches!(schedule, StepSchedule::Constant(_))
        || matches!(schedule, StepSchedule::Power { exponent, .. } if *exponent == 0.0)
    {
        warnings.push("constant step size is not strictly decreasing".to_string());
    }
    if sum_diverges == Some(false) {
        warnings.push("sum of step sizes is finite".to_string());
    }
    if square_summable == Some(false) {
        warnings.push("sum of squared step sizes diverges".to_string());
    }
    ScheduleDiagnostics {
        positive,
        nonincreasing,
        sum_diverges,
        square_summable,
        warnings,
    }
}

/// Parameters shared by all drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub schedule: StepSchedule,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the (mean) output error is at or below this.
    pub stop_tolerance: f64,
    /// Seed for the sample draws of the stochastic driver (ChaCha8).
    pub rng_seed: u64,
    /// Stochastic driver: evaluate the error over the whole data set each
    /// iteration. When off, the drawn sample's error is recorded instead.
    pub record_mean_error: bool,
    /// Keep `g^t` in the trace every this many iterations; 0 keeps none.
    pub record_conductances_every: usize,
}

impl LearningConfig {
    pub fn deterministic(gamma: f64, epsilon: f64, max_iterations: usize) -> Self {
        Self {
            schedule: StepSchedule::Constant(gamma),
            epsilon,
            max_iterations,
            stop_tolerance: 1e-10,
            rng_seed: 0,
            record_mean_error: true,
            record_conductances_every: 0,
        }
    }

    pub fn stochastic(
        schedule: StepSchedule,
        epsilon: f64,
        max_iterations: usize,
        rng_seed: u64,
    ) -> Self {
        Self {
            schedule,
            rng_seed,
            ..Self::deterministic(1.0, epsilon, max_iterations)
        }
    }

    pub fn with_stop_tolerance(mut self, tol: f64) -> Self {
        self.stop_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "conductance floor must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(
                "stop_tolerance must be nonnegative".into(),
            ));
        }
        let diag = validate_schedule(&self.schedule, self.max_iterations);
        if !diag.positive {
            return Err(Error::InvalidArgument("step sizes must be positive".into()));
        }
        if !diag.nonincreasing {
            return Err(Error::InvalidArgument(
                "step sizes must be nonincreasing".into(),
            ));
        }
        Ok(())
    }
}

/// One row of a [`RunTrace`]. The last row of a run carries the error of
/// the final iterate and no step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub error: f64,
    /// `||g^{t+1} - g^t||`.
    pub residual: Option<f64>,
    pub gamma: Option<f64>,
    /// 0-based sample drawn at this step (stochastic driver only).
    pub sample_index: Option<usize>,
    pub conductances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    pub final_conductances: ConductanceVector,
    pub warnings: Vec<String>,
}

impl RunTrace {
    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.error)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.residual).collect()
    }

    /// `t,error,residual,gamma,sample_index`; sample indices are 1-based.
    pub fn to_csv(&self) -> String {
        let mut csv = CsvText::new();
        self.write_csv(&mut csv);
        csv.finish()
    }

    pub fn write_csv(&self, csv: &mut CsvText) {
        csv.row(["t", "error", "residual", "gamma", "sample_index"]);
        for r in &self.records {
            csv.row([
                r.t.to_string(),
                fmt_float(r.error),
                fmt_opt_float(r.residual),
                fmt_opt_float(r.gamma),
                r.sample_index
                    .map(|l| (l + 1).to_string())
                    .unwrap_or_default(),
            ]);
        }
    }
}

struct Evaluation {
    error: f64,
    /// Surrogate gradient at the current iterate.
    direction: DVector<f64>,
    sample_index: Option<usize>,
}

/// Shared iteration loop. `evaluate` solves the network at the current
/// iterate and returns the error plus the update direction.
fn drive(
    g0: &ConductanceVector,
    config: &LearningConfig,
    warnings: Vec<String>,
    mut evaluate: impl FnMut(&ConductanceVector) -> Result<Evaluation>,
) -> RunTrace {
    let mut g = g0.clone();
    let mut records = Vec::with_capacity(config.max_iterations.min(1 << 16) + 1);
    let keep = |t: usize, g: &ConductanceVector| {
        (config.record_conductances_every > 0 && t.is_multiple_of(config.record_conductances_every))
            .then(|| g.as_slice().to_vec())
    };
    let mut t = 0;
    let status = loop {
        let eval = match evaluate(&g) {
            Ok(e) => e,
            Err(e) => break RunStatus::Failed(e),
        };
        let done = if eval.error <= config.stop_tolerance {
            Some(RunStatus::Converged)
        } else if t == config.max_iterations {
            Some(RunStatus::MaxIterations)
        } else {
            None
        };
        if let Some(status) = done {
            records.push(IterationRecord {
                t,
                error: eval.error,
                residual: None,
                gamma: None,
                sample_index: None,
                conductances: keep(t, &g),
            });
            break status;
        }
        let gamma = config.schedule.at(t);
        let next = apply_direction(&g, &eval.direction, gamma);
        records.push(IterationRecord {
            t,
            error: eval.error,
            residual: Some((next.values() - g.values()).norm()),
            gamma: Some(gamma),
            sample_index: eval.sample_index,
            conductances: keep(t, &g),
        });
        g = next;
        t += 1;
    };
    RunTrace {
        records,
        status,
        final_conductances: g,
        warnings,
    }
}

fn check_start(
    graph: &CircuitGraph,
    g0: &ConductanceVector,
    config: &LearningConfig,
) -> Result<()> {
    config.validate()?;
    check_len("initial conductances", graph.num_branches(), g0.len())?;
    if g0.as_slice().iter().any(|&g| g < config.epsilon) {
        return Err(Error::InvalidArgument(
            "initial conductances lie below the configured floor".into(),
        ));
    }
    Ok(())
}

fn with_floor(g0: &ConductanceVector, eps: f64) -> ConductanceVector {
    ConductanceVector::from_projected(g0.values().clone(), eps)
}

fn check_sample(graph: &CircuitGraph, s: &TrainingSample) -> Result<()> {
    check_len("input potentials", graph.num_inputs(), s.p_i.len())?;
    check_len(
        "desired output potentials",
        graph.num_outputs(),
        s.p_o_desired.len(),
    )?;
    check_len("clamped voltages", graph.num_branches(), s.v_desired.len())
}

/// Single-sample Contrastive Learning with a constant step (or the
/// configured schedule). Stops on `||p_O - p_O^D|| <= stop_tolerance` or
/// after `max_iterations` steps. Solver failures end the run with a
/// [`RunStatus::Failed`] trace rather than an `Err`.
pub fn run_contrastive_learning(
    graph: &CircuitGraph,
    g0: &ConductanceVector,
    sample: &TrainingSample,
    config: &LearningConfig,
) -> Result<RunTrace> {
    check_start(graph, g0, config)?;
    check_sample(graph, sample)?;
    let mut warnings = Vec::new();
    let bound = 2.0 / lipschitz_bound_k(graph, &sample.p_i, config.epsilon);
    if config.schedule.at(0) >= bound {
        let msg = format!(
            "step size {} is not below 2/K = {bound:e}; convergence is not guaranteed",
            config.schedule.at(0)
        );
        log::info!("{msg}");
        warnings.push(msg);
    }
    Ok(drive(
        &with_floor(g0, config.epsilon),
        config,
        warnings,
        |g| {
            let solver = FreeStateSolver::new(graph, g.as_slice())?;
            let p_o = solver.output_potentials(&sample.p_i)?;
            let v = crate::solver::voltages_from_potentials(graph, &sample.p_i, &p_o);
            Ok(Evaluation {
                error: (p_o - &sample.p_o_desired).norm(),
                direction: h_from_voltages(&v, &sample.v_desired),
                sample_index: None,
            })
        },
    ))
}

fn schedule_warnings(config: &LearningConfig) -> Vec<String> {
    let diag = validate_schedule(&config.schedule, config.max_iterations);
    for w in &diag.warnings {
        log::info!("step schedule: {w}");
    }
    diag.warnings
}

/// Per-sample free-state solve with the current factorization.
fn sample_error_and_voltages(
    solver: &FreeStateSolver<'_>,
    sample: &TrainingSample,
) -> Result<(f64, DVector<f64>)> {
    let p_o = solver.output_potentials(&sample.p_i)?;
    let v = crate::solver::voltages_from_potentials(solver.graph(), &sample.p_i, &p_o);
    Ok(((p_o - &sample.p_o_desired).norm(), v))
}

/// Stochastic Contrastive Learning: each step draws one sample uniformly
/// with replacement from a ChaCha8 stream seeded by `rng_seed` and applies
/// the step size `schedule.at(t)`. The recorded error is the mean over all
/// samples of `||p_O,j - p_O,j^D||` unless `record_mean_error` is off.
pub fn run_stochastic_cl(
    graph: &CircuitGraph,
    g0: &ConductanceVector,
    samples: &[TrainingSample],
    config: &LearningConfig,
) -> Result<RunTrace> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    check_start(graph, g0, config)?;
    for s in samples {
        check_sample(graph, s)?;
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    Ok(drive(
        &with_floor(g0, config.epsilon),
        config,
        schedule_warnings(config),
        |g| {
            let solver = FreeStateSolver::new(graph, g.as_slice())?;
            let l = rng.random_range(0..n);
            let (err_l, v) = sample_error_and_voltages(&solver, &samples[l])?;
            let error = if config.record_mean_error {
                let mut sum = 0.0;
                for (j, s) in samples.iter().enumerate() {
                    sum += if j == l {
                        err_l
                    } else {
                        sample_error_and_voltages(&solver, s)?.0
                    };
                }
                sum / n as f64
            } else {
                err_l
            };
            Ok(Evaluation {
                error,
                direction: h_from_voltages(&v, &samples[l].v_desired),
                sample_index: Some(l),
            })
        },
    ))
}

/// Deterministic multi-sample variant: the update direction is the mean of
/// the per-sample surrogate gradients, and the error is the mean output
/// error.
pub fn run_batch_cl(
    graph: &CircuitGraph,
    g0: &ConductanceVector,
    samples: &[TrainingSample],
    config: &LearningConfig,
) -> Result<RunTrace> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    check_start(graph, g0, config)?;
    for s in samples {
        check_sample(graph, s)?;
    }
    let n = samples.len() as f64;
    let b = graph.num_branches();
    Ok(drive(
        &with_floor(g0, config.epsilon),
        config,
        schedule_warnings(config),
        |g| {
            let solver = FreeStateSolver::new(graph, g.as_slice())?;
            let mut err = 0.0;
            let mut mean_h = DVector::zeros(b);
            for s in samples {
                let (e, v) = sample_error_and_voltages(&solver, s)?;
                err += e;
                mean_h += h_from_voltages(&v, &s.v_desired);
            }
            mean_h /= n;
            Ok(Evaluation {
                error: err / n,
                direction: mean_h,
                sample_index: None,
            })
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn divider() -> CircuitGraph {
        CircuitGraph::new(3, [(0, 1), (1, 2)], vec![0, 2], vec![1]).unwrap()
    }

    fn divider_sample() -> TrainingSample {
        TrainingSample::new(&divider(), dvector![1.0, 0.0], dvector![2.0 / 3.0]).unwrap()
    }

    fn cv(v: &[f64]) -> ConductanceVector {
        ConductanceVector::new(v, 0.1).unwrap()
    }

    #[test]
    fn projection() {
        let p = project_c_eps(&dvector![0.05, 3.0], 0.1);
        assert_eq!(p.as_slice(), &[0.1, 3.0]);
        let inside = dvector![0.2, 7.0];
        assert_eq!(project_c_eps(&inside, 0.1).values(), &inside);
        assert_eq!(project_c_eps(&dvector![-5.0], 0.1).as_slice(), &[0.1]);
        let twice = project_c_eps(p.values(), 0.1);
        assert_eq!(twice, p);
    }

    #[test]
    fn divider_surrogate_gradient() {
        let h = surrogate_gradient_h(&divider(), &cv(&[1.0, 1.0]), &divider_sample()).unwrap();
        assert_relative_eq!(h, dvector![-5.0 / 36.0, 7.0 / 36.0], epsilon = 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_realizing_conductances() {
        // g = (2, 1) realizes p_O = 2/3, and so does any multiple of it
        let h = surrogate_gradient_h(&divider(), &cv(&[2.0, 1.0]), &divider_sample()).unwrap();
        assert!(h.amax() < 1e-15);
        let h = surrogate_gradient_h(&divider(), &cv(&[6.0, 3.0]), &divider_sample()).unwrap();
        assert!(h.amax() < 1e-15);
    }

    #[test]
    fn divider_cost() {
        let q = cost_q(&divider(), &cv(&[1.0, 1.0]), &divider_sample()).unwrap();
        assert_relative_eq!(q, 1.0 / 18.0, epsilon = 1e-15);
        let q = cost_q(&divider(), &cv(&[2.0, 1.0]), &divider_sample()).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn divider_step() {
        let next = cl_step(&divider(), &cv(&[1.0, 1.0]), &divider_sample(), 0.1).unwrap();
        assert_relative_eq!(
            next.values(),
            &dvector![1.0 + 5.0 / 360.0, 1.0 - 7.0 / 360.0],
            epsilon = 1e-15
        );
        let huge = cl_step(&divider(), &cv(&[1.0, 1.0]), &divider_sample(), 1e3).unwrap();
        assert_eq!(huge.as_slice()[1], 0.1);
        let fixed = cv(&[2.0, 1.0]);
        assert_eq!(
            cl_step(&divider(), &fixed, &divider_sample(), 0.5).unwrap(),
            fixed
        );
        assert!(cl_step(&divider(), &fixed, &divider_sample(), 0.0).is_err());
    }

    #[test]
    fn k_for_divider() {
        // ||D_I|| = 1, ||D_O|| = sqrt(2), N_I N_O = 2
        let k = lipschitz_bound_k(&divider(), &dvector![1.0, 0.0], 0.1);
        assert_relative_eq!(k, 180.0, max_relative = 1e-12);
        let k3 = lipschitz_bound_k(&divider(), &dvector![3.0, 0.0], 0.1);
        assert_relative_eq!(k3, 9.0 * k, max_relative = 1e-12);
    }

    #[test]
    fn schedules() {
        let d = validate_schedule(
            &StepSchedule::Power {
                scale: 10.0,
                exponent: 1.0,
            },
            1000,
        );
        assert!(d.satisfies_conditions());
        assert!(d.warnings.is_empty());
        let d = validate_schedule(&StepSchedule::Constant(0.1), 100);
        assert_eq!(d.square_summable, Some(false));
        assert!(!d.warnings.is_empty());
        let d = validate_schedule(
            &StepSchedule::Power {
                scale: 1.0,
                exponent: 2.0,
            },
            100,
        );
        assert_eq!(d.sum_diverges, Some(false));
        assert!(!d.satisfies_conditions());
        let d = validate_schedule(&StepSchedule::Table(vec![1.0, 2.0]), 5);
        assert!(!d.nonincreasing);
        let d = validate_schedule(&StepSchedule::Constant(-1.0), 5);
        assert!(!d.positive);
        assert_eq!(StepSchedule::Table(vec![3.0, 2.0]).at(10), 2.0);
    }

    #[test]
    fn config_validation() {
        let g = divider();
        let g0 = cv(&[1.0, 1.0]);
        let s = divider_sample();
        let mut c = LearningConfig::deterministic(0.1, 0.1, 10);
        c.max_iterations = 0;
        assert!(run_contrastive_learning(&g, &g0, &s, &c).is_err());
        let c = LearningConfig::stochastic(StepSchedule::Table(vec![0.1, 0.2]), 0.1, 5, 1);
        assert!(run_stochastic_cl(&g, &g0, std::slice::from_ref(&s), &c).is_err());
        let c = LearningConfig::deterministic(0.1, 0.1, 10);
        assert!(matches!(
            run_stochastic_cl(&g, &g0, &[], &c),
            Err(Error::InvalidArgument(_))
        ));
        // floor of the config above the initial point
        let c = LearningConfig::deterministic(0.1, 2.0, 10);
        assert!(run_contrastive_learning(&g, &g0, &s, &c).is_err());
    }

    #[test]
    fn starts_at_target() {
        let c = LearningConfig::deterministic(0.5, 0.1, 50);
        let tr =
            run_contrastive_learning(&divider(), &cv(&[2.0, 1.0]), &divider_sample(), &c).unwrap();
        assert_eq!(tr.status, RunStatus::Converged);
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].t, 0);
    }

    #[test]
    fn divider_converges() {
        let c = LearningConfig::deterministic(0.5, 0.1, 5000).with_stop_tolerance(1e-10);
        let tr =
            run_contrastive_learning(&divider(), &cv(&[1.0, 1.0]), &divider_sample(), &c).unwrap();
        assert_eq!(tr.status, RunStatus::Converged);
        assert!(tr.final_error().unwrap() <= 1e-10);
        assert!(tr.records.len() <= 5001);
        assert!(!tr.warnings.is_empty(), "0.5 exceeds 2/K = 1/90");
    }

    #[test]
    fn failure_keeps_partial_trace() {
        let g = CircuitGraph::new(4, [(0, 2), (1, 3)], vec![0, 1], vec![2, 3]).unwrap();
        let s = TrainingSample::new(&g, dvector![1.0, 0.0], dvector![1.0, 0.0]).unwrap();
        let c = LearningConfig::deterministic(0.1, 0.1, 5);
        let tr = run_contrastive_learning(&g, &cv(&[1.0, 1.0]), &s, &c).unwrap();
        assert!(matches!(
            tr.status,
            RunStatus::Failed(Error::SingularLaplacian(_))
        ));
        assert!(tr.records.is_empty());
    }

    #[test]
    fn batch_with_one_sample_matches_single() {
        let c = LearningConfig::deterministic(0.3, 0.1, 40).with_stop_tolerance(0.0);
        let g0 = cv(&[1.0, 4.0]);
        let a = run_contrastive_learning(&divider(), &g0, &divider_sample(), &c).unwrap();
        let b = run_batch_cl(&divider(), &g0, &[divider_sample()], &c).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_relative_eq!(x.error, y.error, max_relative = 1e-12, epsilon = 1e-15);
        }
        assert_relative_eq!(
            a.final_conductances.values(),
            b.final_conductances.values(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn trace_csv_layout() {
        let c = LearningConfig::stochastic(StepSchedule::Constant(0.1), 0.1, 2, 3)
            .with_stop_tolerance(0.0);
        let tr = run_stochastic_cl(&divider(), &cv(&[1.0, 1.0]), &[divider_sample()], &c).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,error,residual,gamma,sample_index");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,") && lines[1].ends_with(",1"));
        assert!(lines[3].ends_with(",,,"));
    }
}
