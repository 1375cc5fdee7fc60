//! Seeded random problem instances.
//!
//! All randomness goes through [`ChaCha8Rng`] so that a seed fixes every
//! graph, conductance vector and target bit-for-bit on every platform.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Branch, CircuitGraph};
use crate::solver::{ConductanceVector, TrainingSample};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `(low, high]`.
pub fn uniform_open_closed(rng: &mut impl Rng, low: f64, high: f64) -> f64 {
    high - (high - low) * rng.random::<f64>()
}

/// `exp(U[ln low, ln high])`.
pub fn log_uniform(rng: &mut impl Rng, low: f64, high: f64) -> f64 {
    let (a, b) = (low.ln(), high.ln());
    (a + (b - a) * rng.random::<f64>()).exp().clamp(low, high)
}

/// Conductances drawn uniformly on `(epsilon, high]`.
pub fn uniform_conductances(
    rng: &mut impl Rng,
    num_branches: usize,
    epsilon: f64,
    high: f64,
) -> ConductanceVector {
    let values: Vec<f64> = (0..num_branches)
        .map(|_| uniform_open_closed(rng, epsilon, high))
        .collect();
    ConductanceVector::new(values, epsilon).expect("draws lie above the floor")
}

/// Conductances drawn log-uniformly on `[epsilon, high]`.
pub fn log_uniform_conductances(
    rng: &mut impl Rng,
    num_branches: usize,
    epsilon: f64,
    high: f64,
) -> ConductanceVector {
    let values: Vec<f64> = (0..num_branches)
        .map(|_| log_uniform(rng, epsilon, high))
        .collect();
    ConductanceVector::new(values, epsilon).expect("draws lie above the floor")
}

/// `(1, 2, ..., n)`.
pub fn ramp_inputs(n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (1..=n).map(|i| i as f64))
}

pub fn uniform_inputs(rng: &mut impl Rng, n: usize, low: f64, high: f64) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.random_range(low..=high)))
}

/// Erdős–Rényi graph on `num_nodes` nodes with edge probability
/// `edge_prob`, resampled until connected. Each edge gets a random
/// orientation and the nodes a random nonempty input/output split.
pub fn random_connected_graph(
    rng: &mut impl Rng,
    num_nodes: usize,
    edge_prob: f64,
) -> Result<CircuitGraph> {
    assert!(
        num_nodes >= 2,
        "need at least one input and one output node"
    );
    loop {
        let mut branches = Vec::new();
        for a in 0..num_nodes {
            for b in a + 1..num_nodes {
                if rng.random_bool(edge_prob) {
                    branches.push(if rng.random_bool(0.5) {
                        Branch::new(a, b)
                    } else {
                        Branch::new(b, a)
                    });
                }
            }
        }
        if crate::graph::connected_components(num_nodes, &branches) != 1 {
            continue;
        }
        let mut nodes: Vec<usize> = (0..num_nodes).collect();
        nodes.shuffle(rng);
        let n_in = rng.random_range(1..num_nodes);
        let outputs = nodes.split_off(n_in);
        return CircuitGraph::new(num_nodes, branches, nodes, outputs);
    }
}

/// A random graph together with a current conductance vector and a
/// realizable training sample.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: CircuitGraph,
    pub conductances: ConductanceVector,
    pub hidden: ConductanceVector,
    pub sample: TrainingSample,
}

/// Parameters of [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct InstanceParams {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub edge_prob: f64,
    pub epsilon: f64,
    /// Upper end of the log-uniform conductance range.
    pub g_high: f64,
    /// Input potentials are uniform on `[-input_amplitude, input_amplitude]`.
    pub input_amplitude: f64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            min_nodes: 3,
            max_nodes: 10,
            edge_prob: 0.5,
            epsilon: 0.1,
            g_high: 10.0,
            input_amplitude: 1.0,
        }
    }
}

/// Small random instance: at most `max_nodes (max_nodes - 1) / 2`
/// branches, which is 45 for the defaults.
pub fn random_instance(rng: &mut impl Rng, params: &InstanceParams) -> Result<Instance> {
    let n = rng.random_range(params.min_nodes..=params.max_nodes);
    let graph = random_connected_graph(rng, n, params.edge_prob)?;
    let b = graph.num_branches();
    let conductances = log_uniform_conductances(rng, b, params.epsilon, params.g_high);
    let hidden = log_uniform_conductances(rng, b, params.epsilon, params.g_high);
    let a = params.input_amplitude;
    let p_i = uniform_inputs(rng, graph.num_inputs(), -a, a);
    let sample = TrainingSample::realized_by(&graph, &hidden, p_i)?;
    Ok(Instance {
        graph,
        conductances,
        hidden,
        sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_graphs_are_connected_and_small() {
        let mut rng = rng_from_seed(7);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, &InstanceParams::default()).unwrap();
            assert!(inst.graph.is_connected());
            assert!(inst.graph.num_branches() <= 45);
            assert!(inst
                .conductances
                .as_slice()
                .iter()
                .all(|&g| (0.1..=10.0).contains(&g)));
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = random_instance(&mut rng_from_seed(3), &InstanceParams::default()).unwrap();
        let b = random_instance(&mut rng_from_seed(3), &InstanceParams::default()).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.conductances, b.conductances);
        assert_eq!(a.sample, b.sample);
    }

    #[test]
    fn open_closed_uniform_stays_above_floor() {
        let mut rng = rng_from_seed(1);
        let g = uniform_conductances(&mut rng, 10_000, 0.1, 10.0);
        assert!(g.as_slice().iter().all(|&x| x > 0.1 && x <= 10.0));
    }

    #[test]
    fn ramp() {
        assert_eq!(ramp_inputs(3).as_slice(), &[1.0, 2.0, 3.0]);
    }
}
