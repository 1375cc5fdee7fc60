//! Numerical checks on the structure of the surrogate gradient `h`.
//!
//! The Jacobian of `h` has the closed form `2 diag(v) W diag(v)` with
//! `W = D_O^T (D_O G D_O^T)^{-1} D_O`; it is compared here against central
//! finite differences, and its consequences (symmetry, semidefiniteness,
//! Lipschitz bound, cocoercivity, path independence of line integrals) are
//! sampled directly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::export::{fmt_float, CsvText};
use crate::graph::{CircuitGraph, Terminal};
use crate::instances::{log_uniform_conductances, rng_stream};
use crate::learning::{cost_q_extended, lipschitz_bound_k, surrogate_gradient_extended};
use crate::solver::{ConductanceVector, FreeStateSolver, TrainingSample};

/// `W(g) = D_O^T (D_O G D_O^T)^{-1} D_O`, a `B x B` symmetric PSD matrix.
pub fn w_matrix(graph: &CircuitGraph, g: &ConductanceVector) -> Result<DMatrix<f64>> {
    w_matrix_extended(graph, g.as_slice())
}

fn w_matrix_extended(graph: &CircuitGraph, g: &[f64]) -> Result<DMatrix<f64>> {
    let solver = FreeStateSolver::new(graph, g)?;
    let (_, d_o) = graph.partition_incidence();
    let x = DMatrix::from_columns(
        &d_o.column_iter()
            .map(|c| solver.solve_laplacian(&c.into_owned()))
            .collect::<Vec<_>>(),
    );
    Ok(d_o.transpose() * x)
}

/// Branch voltages through `v = (I - W G) D_I^T p_I`, an algebraically
/// distinct route from the free-state solve.
pub fn branch_voltages_via_w(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    p_i: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("input potentials", graph.num_inputs(), p_i.len())?;
    let w = w_matrix(graph, g)?;
    let (d_i, _) = graph.partition_incidence();
    let base = d_i.transpose() * p_i;
    let g_base = base.component_mul(g.values());
    Ok(&base - w * g_base)
}

/// `J(g) = 2 diag(v(g)) W(g) diag(v(g))`.
pub fn jacobian_closed_form(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
) -> Result<DMatrix<f64>> {
    let v = FreeStateSolver::new(graph, g.as_slice())?.branch_voltages(&sample.p_i)?;
    let w = w_matrix(graph, g)?;
    let b = v.len();
    Ok(DMatrix::from_fn(b, b, |r, c| 2.0 * v[r] * w[(r, c)] * v[c]))
}

/// Central differences of `h`: column `k` is
/// `(h(g + s e_k) - h(g - s e_k)) / (2 s)`. Every conductance must exceed
/// the floor by more than `step`.
pub fn jacobian_finite_difference(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
    step: f64,
) -> Result<DMatrix<f64>> {
    check_margin(g, step)?;
    let b = g.len();
    let mut j = DMatrix::zeros(b, b);
    let mut probe = g.as_slice().to_vec();
    for k in 0..b {
        let base = probe[k];
        probe[k] = base + step;
        let plus = surrogate_gradient_extended(graph, &probe, sample)?;
        probe[k] = base - step;
        let minus = surrogate_gradient_extended(graph, &probe, sample)?;
        probe[k] = base;
        j.set_column(k, &((plus - minus) / (2.0 * step)));
    }
    Ok(j)
}

fn check_margin(g: &ConductanceVector, step: f64) -> Result<()> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {step}"
        )));
    }
    if let Some(k) = g.as_slice().iter().position(|&x| x - g.epsilon() <= step) {
        return Err(Error::InvalidArgument(format!(
            "branch {} conductance {} is within {step} of the floor {}",
            k + 1,
            g.as_slice()[k],
            g.epsilon()
        )));
    }
    Ok(())
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues of the symmetric part `(M + M^T) / 2`.
fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// Closed-form Jacobian with its structural diagnostics.
#[derive(Debug, Clone)]
pub struct JacobianReport {
    pub jacobian: DMatrix<f64>,
    /// `||J - J^T||_max`.
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of `(J + J^T) / 2`.
    pub min_eigenvalue: f64,
    /// `||J - J_fd||_max`.
    pub fd_defect: f64,
}

pub fn jacobian_report(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
    step: f64,
) -> Result<JacobianReport> {
    let jacobian = jacobian_closed_form(graph, g, sample)?;
    let fd = jacobian_finite_difference(graph, g, sample, step)?;
    Ok(JacobianReport {
        symmetry_defect: (&jacobian - jacobian.transpose()).amax(),
        min_eigenvalue: min_symmetric_eigenvalue(&jacobian),
        fd_defect: (&jacobian - fd).amax(),
        jacobian,
    })
}

/// Exact gradient of the power gap `Q`,
/// `grad Q = h + 2 v ⊙ (W G v)`, using `dv/dg_k = -W e_k e_k^T v`.
///
/// Every entry couples all branches through `W`, so this update cannot be
/// computed locally. Kirchhoff's current law gives `D_O G v = 0`, which
/// makes the coupling term vanish up to rounding.
pub fn full_gradient_q(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
) -> Result<DVector<f64>> {
    let v = FreeStateSolver::new(graph, g.as_slice())?.branch_voltages(&sample.p_i)?;
    let w = w_matrix(graph, g)?;
    let coupling = &w * v.component_mul(g.values());
    let h = sample.v_desired.zip_map(&v, |d, f| d * d - f * f);
    Ok(h + 2.0 * v.component_mul(&coupling))
}

/// `||grad Q(g) - h(g)||`.
pub fn gradient_gap(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
) -> Result<f64> {
    let full = full_gradient_q(graph, g, sample)?;
    let h = surrogate_gradient_extended(graph, g.as_slice(), sample)?;
    Ok((full - h).norm())
}

/// Central finite differences of `Q`.
pub fn cost_gradient_finite_difference(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    sample: &TrainingSample,
    step: f64,
) -> Result<DVector<f64>> {
    check_margin(g, step)?;
    let mut probe = g.as_slice().to_vec();
    let mut grad = DVector::zeros(g.len());
    for k in 0..g.len() {
        let base = probe[k];
        probe[k] = base + step;
        let plus = cost_q_extended(graph, &probe, sample)?;
        probe[k] = base - step;
        let minus = cost_q_extended(graph, &probe, sample)?;
        probe[k] = base;
        grad[k] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// `M(g) = -(D_O G D_O^T)^{-1} D_O G D_I^T`, so that `p_O = M p_I`.
pub fn io_map_matrix(graph: &CircuitGraph, g: &ConductanceVector) -> Result<DMatrix<f64>> {
    let solver = FreeStateSolver::new(graph, g.as_slice())?;
    // -D_O G D_I^T: conductance sums of the branches joining each output to
    // each input
    let mut coupling = DMatrix::zeros(graph.num_outputs(), graph.num_inputs());
    for (br, &c) in graph.branches().iter().zip(g.as_slice()) {
        match (graph.terminal(br.from), graph.terminal(br.to)) {
            (Terminal::Output(o), Terminal::Input(i))
            | (Terminal::Input(i), Terminal::Output(o)) => coupling[(o, i)] += c,
            _ => {}
        }
    }
    let cols: Vec<DVector<f64>> = coupling
        .column_iter()
        .map(|c| solver.solve_laplacian(&c.into_owned()))
        .collect();
    Ok(DMatrix::from_columns(&cols))
}

/// One sampled pair in a Lipschitz/cocoercivity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    pub trial: usize,
    /// `||h(g) - h(g')|| / (K ||g - g'||)`; at most 1 when the bound holds.
    pub lipschitz_ratio: f64,
    /// `(h(g) - h(g'))^T (g - g') - ||h(g) - h(g')||^2 / K`; nonnegative
    /// when cocoercivity holds.
    pub cocoercivity_slack: f64,
    /// Rounding allowance for the slack. Each entry of `h` is a difference
    /// of squared voltages bounded by the node potentials `P`, so it carries
    /// an error of order `u P^2`; through the inner product this becomes
    /// `16 u P^2 sqrt(B) ||g - g'||`.
    pub slack_tolerance: f64,
}

impl PairCheck {
    pub fn violated(&self) -> bool {
        !(self.lipschitz_ratio <= 1.0 && self.cocoercivity_slack >= -self.slack_tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzDiagnostics {
    pub k: f64,
    pub pairs: Vec<PairCheck>,
    pub worst_lipschitz_ratio: f64,
    pub min_cocoercivity_slack: f64,
}

impl LipschitzDiagnostics {
    /// `trial,lipschitz_ratio,cocoercivity_slack` with a trailing summary
    /// comment.
    pub fn to_csv(&self) -> String {
        let mut csv = CsvText::new();
        csv.row(["trial", "lipschitz_ratio", "cocoercivity_slack"]);
        for p in &self.pairs {
            csv.row([
                (p.trial + 1).to_string(),
                fmt_float(p.lipschitz_ratio),
                fmt_float(p.cocoercivity_slack),
            ]);
        }
        csv.comment(&format!(
            "summary pairs={} K={} worst_lipschitz_ratio={} min_cocoercivity_slack={} violations=0",
            self.pairs.len(),
            fmt_float(self.k),
            fmt_float(self.worst_lipschitz_ratio),
            fmt_float(self.min_cocoercivity_slack)
        ));
        csv.finish()
    }
}

fn check_pair(
    graph: &CircuitGraph,
    sample: &TrainingSample,
    epsilon: f64,
    k: f64,
    trial: usize,
    seed: u64,
) -> Result<(PairCheck, Vec<f64>, Vec<f64>)> {
    let mut rng = rng_stream(seed, trial as u64);
    let b = graph.num_branches();
    let g1 = log_uniform_conductances(&mut rng, b, epsilon, 1e3 * epsilon);
    let g2 = log_uniform_conductances(&mut rng, b, epsilon, 1e3 * epsilon);
    let h1 = surrogate_gradient_extended(graph, g1.as_slice(), sample)?;
    let h2 = surrogate_gradient_extended(graph, g2.as_slice(), sample)?;
    let dh = h1 - h2;
    let dg = g1.values() - g2.values();
    let dg_norm = dg.norm();
    let lipschitz_ratio = if dg_norm == 0.0 {
        0.0
    } else {
        dh.norm() / (k * dg_norm)
    };
    let p_max = sample.p_i.amax().max(sample.p_o_desired.amax());
    let check = PairCheck {
        trial,
        lipschitz_ratio,
        cocoercivity_slack: dh.dot(&dg) - dh.norm_squared() / k,
        slack_tolerance: 16.0 * f64::EPSILON * p_max * p_max * (b as f64).sqrt() * dg_norm,
    };
    Ok((check, g1.as_slice().to_vec(), g2.as_slice().to_vec()))
}

/// Samples `trials` pairs `g, g'` log-uniformly on `[eps, 1000 eps]^B` and
/// checks `||h(g) - h(g')|| <= K ||g - g'||` and
/// `(h(g) - h(g'))^T (g - g') >= ||h(g) - h(g')||^2 / K`, the latter up to
/// [`PairCheck::slack_tolerance`]. Pair `i` draws from
/// stream `i` of the seeded generator, so results do not depend on how the
/// pairs are scheduled.
pub fn check_lipschitz_cocoercive(
    graph: &CircuitGraph,
    sample: &TrainingSample,
    epsilon: f64,
    trials: usize,
    rng_seed: u64,
) -> Result<LipschitzDiagnostics> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let k = lipschitz_bound_k(graph, &sample.p_i, epsilon);
    let run = |t: usize| check_pair(graph, sample, epsilon, k, t, rng_seed);

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..trials).map(run).collect();

    let mut pairs = Vec::with_capacity(trials);
    for r in results {
        let (check, g1, g2) = r?;
        if check.violated() {
            return Err(Error::PropertyViolation(format!(
                "pair {}: lipschitz ratio {:e}, cocoercivity slack {:e}, g = {:?}, g' = {:?}",
                check.trial + 1,
                check.lipschitz_ratio,
                check.cocoercivity_slack,
                g1,
                g2
            )));
        }
        pairs.push(check);
    }
    Ok(LipschitzDiagnostics {
        k,
        worst_lipschitz_ratio: pairs.iter().map(|p| p.lipschitz_ratio).fold(0.0, f64::max),
        min_cocoercivity_slack: pairs
            .iter()
            .map(|p| p.cocoercivity_slack)
            .fold(f64::INFINITY, f64::min),
        pairs,
    })
}

// 5-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_889,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// `∫ h · dg` along the polyline through `waypoints`, using composite
/// 5-point Gauss–Legendre with `panels` panels per segment.
pub fn line_integral_h(
    graph: &CircuitGraph,
    sample: &TrainingSample,
    waypoints: &[DVector<f64>],
    panels: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for seg in waypoints.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let d = b - a;
        for p in 0..panels {
            let (lo, hi) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let s = mid + half * x;
                let point = a + &d * s;
                let h = surrogate_gradient_extended(graph, point.as_slice(), sample)?;
                total += w * half * h.dot(&d);
            }
        }
    }
    Ok(total)
}

/// Integrates `h` from `start` to `end` via two different intermediate
/// points and returns both values; a conservative field gives equal ones.
pub fn path_independence(
    graph: &CircuitGraph,
    sample: &TrainingSample,
    start: &DVector<f64>,
    end: &DVector<f64>,
    via: (&DVector<f64>, &DVector<f64>),
    panels: usize,
) -> Result<(f64, f64)> {
    let first = line_integral_h(
        graph,
        sample,
        &[start.clone(), via.0.clone(), end.clone()],
        panels,
    )?;
    let second = line_integral_h(
        graph,
        sample,
        &[start.clone(), via.1.clone(), end.clone()],
        panels,
    )?;
    Ok((first, second))
}

/// Random point of the conductance box for path tests.
pub fn random_box_point(rng: &mut impl Rng, b: usize, epsilon: f64, high: f64) -> DVector<f64> {
    log_uniform_conductances(rng, b, epsilon, high)
        .values()
        .clone()
}
