//! Simulation and verification of Contrastive Learning on networks of linear
//! adjustable resistors.
//!
//! - [`graph`]: circuit topologies, crossbar generator, incidence matrices
//! - [`solver`]: free/clamped state voltages, currents and power
//! - [`learning`]: projection, surrogate gradient, deterministic, batch and
//!   stochastic learning drivers, Lipschitz bound `K`
//! - [`analysis`]: closed-form and finite-difference Jacobians, the
//!   input-output map, Lipschitz/cocoercivity sweeps, full gradient baseline
//! - [`instances`]: seeded random graphs, conductances and targets
//! - [`verify`]: property suites over random instances
//! - [`experiment`]: experiment specs and CSV artifact generation

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod export;
pub mod graph;
pub mod instances;
pub mod learning;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use experiment::{run_experiment, Artifact, ExperimentKind, ExperimentOutput, ExperimentSpec};
pub use graph::{Branch, CircuitGraph, Terminal};
pub use learning::{
    cl_step, cost_q, lipschitz_bound_k, project_c_eps, run_batch_cl, run_contrastive_learning,
    run_stochastic_cl, surrogate_gradient_h, validate_schedule, IterationRecord, LearningConfig,
    RunStatus, RunTrace, ScheduleDiagnostics, StepSchedule,
};
pub use solver::{
    branch_voltages, clamped_voltages, solve_network, solve_output_potentials, total_power,
    ConductanceVector, FreeStateSolver, NetworkState, TrainingSample,
};

pub use nalgebra::{DMatrix, DVector};
