//! Browser bindings for the demo page in `www/`.
//!
//! Three operations: a fixed-step sweep on a crossbar, the step-size bound
//! `2/K` against crossbar size, and a stochastic run with a decaying step.

use resistnet::experiment::{
    deterministic_problem, stochastic_problem, ExperimentKind, ExperimentSpec, InputSource,
};
use resistnet::instances::ramp_inputs;
use resistnet::{
    lipschitz_bound_k, run_contrastive_learning, run_stochastic_cl, CircuitGraph, LearningConfig,
    Result, StepSchedule,
};
use wasm_bindgen::prelude::*;

const EPSILON: f64 = 0.1;
const MAX_BRANCHES: usize = 2500;

fn crossbar(n_in: usize, n_out: usize) -> Result<CircuitGraph> {
    if n_in * n_out > MAX_BRANCHES {
        return Err(resistnet::Error::InvalidArgument(format!(
            "the demo is limited to {MAX_BRANCHES} branches"
        )));
    }
    CircuitGraph::crossbar(n_in, n_out)
}

/// Error curves of a fixed-step sweep, one series per step size.
#[wasm_bindgen]
pub struct SweepResult {
    two_over_k: f64,
    series: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl SweepResult {
    #[wasm_bindgen(getter)]
    pub fn two_over_k(&self) -> f64 {
        self.two_over_k
    }

    #[wasm_bindgen(getter)]
    pub fn count(&self) -> usize {
        self.series.len()
    }

    /// Error `||p_O - p_O^D||` per iteration for step size `i`.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.series.get(i).cloned().unwrap_or_default()
    }
}

pub fn sweep(
    n_in: usize,
    n_out: usize,
    gammas: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<SweepResult> {
    let graph = crossbar(n_in, n_out)?;
    let spec = ExperimentSpec {
        n_in,
        n_out,
        epsilon: EPSILON,
        ..ExperimentSpec::default()
    };
    let (sample, g0) = deterministic_problem(&spec, &graph, seed)?;
    let k = lipschitz_bound_k(&graph, &sample.p_i, EPSILON);
    let series = gammas
        .iter()
        .map(|&gamma| {
            let config =
                LearningConfig::deterministic(gamma, EPSILON, iterations).with_stop_tolerance(0.0);
            run_contrastive_learning(&graph, &g0, &sample, &config).map(|t| t.errors())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        two_over_k: 2.0 / k,
        series,
    })
}

/// `2/K` for square crossbars with side `1..=max_side` and ramp inputs.
pub fn bound_curve(max_side: usize, epsilon: f64) -> Result<Vec<f64>> {
    (1..=max_side)
        .map(|side| {
            let graph = crossbar(side, side)?;
            Ok(2.0 / lipschitz_bound_k(&graph, &ramp_inputs(side), epsilon))
        })
        .collect()
}

/// Mean error over the training set per iteration, with
/// `gamma_t = a / (1 + t)^p` and inputs uniform in `[-5, 5]`.
#[allow(clippy::too_many_arguments)]
pub fn stochastic(
    n_in: usize,
    n_out: usize,
    samples: usize,
    a: f64,
    p: f64,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let graph = crossbar(n_in, n_out)?;
    let spec = ExperimentSpec {
        kind: ExperimentKind::Stochastic,
        n_in,
        n_out,
        epsilon: EPSILON,
        samples,
        inputs: InputSource::Uniform,
        ..ExperimentSpec::default()
    };
    let (set, g0) = stochastic_problem(&spec, &graph, seed)?;
    let schedule = StepSchedule::Power {
        scale: a,
        exponent: p,
    };
    let config =
        LearningConfig::stochastic(schedule, EPSILON, iterations, seed).with_stop_tolerance(0.0);
    Ok(run_stochastic_cl(&graph, &g0, &set, &config)?.errors())
}

fn js(e: resistnet::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = stepSizeSweep)]
pub fn step_size_sweep_js(
    n_in: usize,
    n_out: usize,
    gammas: Vec<f64>,
    iterations: usize,
    seed: u32,
) -> std::result::Result<SweepResult, JsError> {
    sweep(n_in, n_out, &gammas, iterations, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve_js(max_side: usize, epsilon: f64) -> std::result::Result<Vec<f64>, JsError> {
    bound_curve(max_side, epsilon).map_err(js)
}

#[wasm_bindgen(js_name = stochasticRun)]
pub fn stochastic_js(
    n_in: usize,
    n_out: usize,
    samples: usize,
    a: f64,
    p: f64,
    iterations: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    stochastic(n_in, n_out, samples, a, p, iterations, seed.into()).map_err(js)
}
