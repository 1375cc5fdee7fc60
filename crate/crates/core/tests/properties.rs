//! Invariants of the circuit solver and the learning step on random
//! connected graphs.

use proptest::prelude::*;
use resistnet::analysis::branch_voltages_via_w;
use resistnet::instances::{random_instance, rng_from_seed, Instance, InstanceParams};
use resistnet::learning::local_update;
use resistnet::solver::power_at_potentials;
use resistnet::{
    branch_voltages, cl_step, cost_q, solve_network, solve_output_potentials, CircuitGraph, DVector,
};

fn instance(seed: u64) -> Instance {
    random_instance(&mut rng_from_seed(seed), &InstanceParams::default()).unwrap()
}

fn perturbation(dim: usize, raw: &[f64], norm: f64) -> DVector<f64> {
    let d = DVector::from_iterator(dim, raw.iter().copied().cycle().take(dim));
    if d.norm() == 0.0 {
        DVector::from_element(dim, norm / (dim as f64).sqrt())
    } else {
        d.normalize() * norm
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_state_minimizes_power(
        seed in any::<u64>(),
        raw in prop::collection::vec(-1.0f64..1.0, 10),
        norm in 1e-3f64..1.0,
    ) {
        let inst = instance(seed);
        let (graph, g, p_i) = (&inst.graph, &inst.conductances, &inst.sample.p_i);
        let p_o = solve_output_potentials(graph, g, p_i).unwrap();
        let delta = perturbation(p_o.len(), &raw, norm);
        let base = power_at_potentials(graph, g, p_i, &p_o).unwrap();
        let moved = power_at_potentials(graph, g, p_i, &(&p_o + delta)).unwrap();
        prop_assert!(base <= moved + 1e-12, "{base} > {moved}");
    }

    #[test]
    fn potentials_are_invariant_to_conductance_scale(seed in any::<u64>(), c in 1.0f64..1e3) {
        // Scaling up keeps every conductance above the floor, and comparing
        // both ways covers factors in [1e-3, 1e3].
        let inst = instance(seed);
        let scaled = inst.conductances.scaled(c).unwrap();
        let a = solve_output_potentials(&inst.graph, &inst.conductances, &inst.sample.p_i).unwrap();
        let b = solve_output_potentials(&inst.graph, &scaled, &inst.sample.p_i).unwrap();
        prop_assert!((a - b).amax() <= 1e-10);
    }

    #[test]
    fn outputs_interpolate_inputs(seed in any::<u64>()) {
        let inst = instance(seed);
        let p_i = &inst.sample.p_i;
        let p_o = solve_output_potentials(&inst.graph, &inst.conductances, p_i).unwrap();
        let (lo, hi) = (p_i.min(), p_i.max());
        for &x in p_o.iter() {
            prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12, "{x} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn voltage_routes_agree(seed in any::<u64>()) {
        let inst = instance(seed);
        let a = branch_voltages(&inst.graph, &inst.conductances, &inst.sample.p_i).unwrap();
        let b = branch_voltages_via_w(&inst.graph, &inst.conductances, &inst.sample.p_i).unwrap();
        prop_assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn currents_balance_at_outputs(seed in any::<u64>()) {
        let inst = instance(seed);
        let state = solve_network(&inst.graph, &inst.conductances, &inst.sample.p_i).unwrap();
        let (_, d_o) = inst.graph.partition_incidence();
        let scale = state.i.amax().max(1.0);
        prop_assert!((d_o * &state.i).amax() <= 1e-12 * scale);
    }

    #[test]
    fn power_gap_is_nonnegative(seed in any::<u64>()) {
        let inst = instance(seed);
        let q = cost_q(&inst.graph, &inst.conductances, &inst.sample).unwrap();
        prop_assert!(q >= -1e-12, "Q = {q}");
    }

    #[test]
    fn step_is_feasible_and_local(seed in any::<u64>(), gamma in 1e-3f64..100.0) {
        let inst = instance(seed);
        let (graph, g, sample) = (&inst.graph, &inst.conductances, &inst.sample);
        let next = cl_step(graph, g, sample, gamma).unwrap();
        let eps = g.epsilon();
        prop_assert!(next.as_slice().iter().all(|&x| x >= eps));

        // each branch needs only its own conductance and voltages
        let v = branch_voltages(graph, g, &sample.p_i).unwrap();
        for k in 0..g.len() {
            let local = local_update(g.as_slice()[k], v[k], sample.v_desired[k], gamma, eps);
            prop_assert_eq!(local.to_bits(), next.as_slice()[k].to_bits());
        }
    }

    #[test]
    fn graph_text_round_trips(n_in in 1usize..6, n_out in 1usize..6) {
        let g = CircuitGraph::crossbar(n_in, n_out).unwrap();
        let back = CircuitGraph::from_text(&g.to_text().unwrap()).unwrap();
        prop_assert_eq!(g, back);
    }
}
