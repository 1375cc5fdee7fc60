//! Free-state and clamped-state circuit physics.
//!
//! The free state is found by solving `(D_O G D_O^T) p_O = -D_O G D_I^T p_I`.
//! The output Laplacian block is assembled by stamping each branch rather
//! than forming the dense products, and factorized with Cholesky; it is
//! symmetric positive definite whenever the graph is connected and every
//! conductance is positive.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::graph::{CircuitGraph, Terminal};

/// Per-branch conductances (siemens) that respect the floor `g_k >= epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceVector {
    values: DVector<f64>,
    epsilon: f64,
}

impl ConductanceVector {
    pub fn new(values: impl Into<Vec<f64>>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "conductance floor must be positive and finite, got {epsilon}"
            )));
        }
        let values = values.into();
        if let Some((k, &g)) = values
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g >= epsilon))
        {
            return Err(Error::InvalidArgument(format!(
                "conductance {g} on branch {} is below the floor {epsilon}",
                k + 1
            )));
        }
        Ok(Self {
            values: DVector::from_vec(values),
            epsilon,
        })
    }

    /// Every branch set to `value`.
    pub fn uniform(num_branches: usize, value: f64, epsilon: f64) -> Result<Self> {
        Self::new(vec![value; num_branches], epsilon)
    }

    /// Builds from values already known to lie in the box.
    pub(crate) fn from_projected(values: DVector<f64>, epsilon: f64) -> Self {
        debug_assert!(values.iter().all(|&g| g >= epsilon));
        Self { values, epsilon }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `c * g` with the same floor.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new((&self.values * c).as_slice(), self.epsilon)
    }
}

/// Solved free-state quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Output node potentials (V).
    pub p_o: DVector<f64>,
    /// Branch voltages (V).
    pub v: DVector<f64>,
    /// Branch currents `G v` (A).
    pub i: DVector<f64>,
    /// Total dissipated power `v^T G v` (W).
    pub power: f64,
}

/// One input/desired-output pair together with its clamped branch voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub p_i: DVector<f64>,
    pub p_o_desired: DVector<f64>,
    pub v_desired: DVector<f64>,
}

impl TrainingSample {
    pub fn new(graph: &CircuitGraph, p_i: DVector<f64>, p_o_desired: DVector<f64>) -> Result<Self> {
        let v_desired = clamped_voltages(graph, &p_i, &p_o_desired)?;
        Ok(Self {
            p_i,
            p_o_desired,
            v_desired,
        })
    }

    /// Sample whose desired outputs are those produced by `hidden`, so it is
    /// realizable by construction.
    pub fn realized_by(
        graph: &CircuitGraph,
        hidden: &ConductanceVector,
        p_i: DVector<f64>,
    ) -> Result<Self> {
        let p_o = solve_output_potentials(graph, hidden, &p_i)?;
        Self::new(graph, p_i, p_o)
    }
}

/// Cholesky factorization of `D_O G D_O^T` for one conductance vector,
/// reusable across any number of input vectors.
pub struct FreeStateSolver<'a> {
    graph: &'a CircuitGraph,
    g: &'a [f64],
    chol: Cholesky<f64, Dyn>,
}

impl<'a> FreeStateSolver<'a> {
    /// Factorizes for conductances `g`, which must all be positive. This is
    /// the extended domain `(0, inf)^B`; callers that need the floor use
    /// [`ConductanceVector`].
    pub fn new(graph: &'a CircuitGraph, g: &'a [f64]) -> Result<Self> {
        check_len("conductance vector", graph.num_branches(), g.len())?;
        if !graph.is_connected() {
            return Err(Error::SingularLaplacian(format!(
                "graph has {} connected components over {} nodes and {} branches",
                graph.component_count(),
                graph.num_nodes(),
                graph.num_branches()
            )));
        }
        if let Some(k) = g.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::SingularLaplacian(format!(
                "branch {} has non-positive conductance {}",
                k + 1,
                g[k]
            )));
        }
        let laplacian = output_laplacian(graph, g);
        let chol = Cholesky::new(laplacian)
            .ok_or_else(|| Error::SingularLaplacian("Cholesky factorization failed".into()))?;
        Ok(Self { graph, g, chol })
    }

    pub fn graph(&self) -> &CircuitGraph {
        self.graph
    }

    /// `(D_O G D_O^T)^{-1} x`.
    pub fn solve_laplacian(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(x)
    }

    /// Right-hand side `-D_O G D_I^T p_I`.
    pub fn rhs(&self, p_i: &DVector<f64>) -> DVector<f64> {
        let mut b = DVector::zeros(self.graph.num_outputs());
        for (br, &c) in self.graph.branches().iter().zip(self.g) {
            match (self.graph.terminal(br.from), self.graph.terminal(br.to)) {
                (Terminal::Output(o), Terminal::Input(i))
                | (Terminal::Input(i), Terminal::Output(o)) => b[o] += c * p_i[i],
                _ => {}
            }
        }
        b
    }

    pub fn output_potentials(&self, p_i: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("input potentials", self.graph.num_inputs(), p_i.len())?;
        Ok(self.chol.solve(&self.rhs(p_i)))
    }

    /// `||(D_O G D_O^T) p_O - rhs||`, for checking solve accuracy.
    pub fn residual(&self, p_i: &DVector<f64>, p_o: &DVector<f64>) -> f64 {
        let l = output_laplacian(self.graph, self.g);
        (l * p_o - self.rhs(p_i)).norm()
    }

    pub fn branch_voltages(&self, p_i: &DVector<f64>) -> Result<DVector<f64>> {
        let p_o = self.output_potentials(p_i)?;
        Ok(voltages_from_potentials(self.graph, p_i, &p_o))
    }

    pub fn state(&self, p_i: &DVector<f64>) -> Result<NetworkState> {
        let p_o = self.output_potentials(p_i)?;
        let v = voltages_from_potentials(self.graph, p_i, &p_o);
        let i = v.component_mul(&DVector::from_column_slice(self.g));
        let power = i.dot(&v);
        Ok(NetworkState { p_o, v, i, power })
    }
}

/// Dense `D_O G D_O^T`, assembled branch by branch.
pub(crate) fn output_laplacian(graph: &CircuitGraph, g: &[f64]) -> DMatrix<f64> {
    let n_out = graph.num_outputs();
    let mut l = DMatrix::zeros(n_out, n_out);
    for (br, &c) in graph.branches().iter().zip(g) {
        let a = graph.terminal(br.from);
        let b = graph.terminal(br.to);
        if let Terminal::Output(o) = a {
            l[(o, o)] += c;
        }
        if let Terminal::Output(o) = b {
            l[(o, o)] += c;
        }
        if let (Terminal::Output(x), Terminal::Output(y)) = (a, b) {
            l[(x, y)] -= c;
            l[(y, x)] -= c;
        }
    }
    l
}

/// `D^T (p_I; p_O)` evaluated branch by branch.
pub(crate) fn voltages_from_potentials(
    graph: &CircuitGraph,
    p_i: &DVector<f64>,
    p_o: &DVector<f64>,
) -> DVector<f64> {
    let potential = |n: usize| match graph.terminal(n) {
        Terminal::Input(i) => p_i[i],
        Terminal::Output(o) => p_o[o],
    };
    DVector::from_iterator(
        graph.num_branches(),
        graph
            .branches()
            .iter()
            .map(|b| potential(b.from) - potential(b.to)),
    )
}

/// Free-state output potentials `p_O(g)`.
pub fn solve_output_potentials(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    p_i: &DVector<f64>,
) -> Result<DVector<f64>> {
    FreeStateSolver::new(graph, g.as_slice())?.output_potentials(p_i)
}

/// Free-state branch voltages `v(g)`.
pub fn branch_voltages(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    p_i: &DVector<f64>,
) -> Result<DVector<f64>> {
    FreeStateSolver::new(graph, g.as_slice())?.branch_voltages(p_i)
}

/// Full free-state solution.
pub fn solve_network(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    p_i: &DVector<f64>,
) -> Result<NetworkState> {
    FreeStateSolver::new(graph, g.as_slice())?.state(p_i)
}

/// Clamped-state branch voltages `v^D = D_I^T p_I + D_O^T p_O^D`.
pub fn clamped_voltages(
    graph: &CircuitGraph,
    p_i: &DVector<f64>,
    p_o_desired: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("input potentials", graph.num_inputs(), p_i.len())?;
    check_len(
        "desired output potentials",
        graph.num_outputs(),
        p_o_desired.len(),
    )?;
    Ok(voltages_from_potentials(graph, p_i, p_o_desired))
}

/// `sum_k g_k v_k^2`.
pub fn total_power(g: &ConductanceVector, v: &DVector<f64>) -> Result<f64> {
    check_len("branch voltages", g.len(), v.len())?;
    Ok(g.values()
        .iter()
        .zip(v.iter())
        .map(|(g, v)| g * v * v)
        .sum())
}

/// Power `S(p_I, p_O)` dissipated when the node potentials are imposed.
pub fn power_at_potentials(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    p_i: &DVector<f64>,
    p_o: &DVector<f64>,
) -> Result<f64> {
    total_power(g, &clamped_voltages(graph, p_i, p_o)?)
}

/// Input nodal currents `j_I = D_I G v`.
pub fn input_currents(
    graph: &CircuitGraph,
    g: &ConductanceVector,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("branch voltages", graph.num_branches(), v.len())?;
    check_len("conductance vector", graph.num_branches(), g.len())?;
    let mut j = DVector::zeros(graph.num_inputs());
    for (k, b) in graph.branches().iter().enumerate() {
        let current = g.values()[k] * v[k];
        if let Terminal::Input(i) = graph.terminal(b.from) {
            j[i] += current;
        }
        if let Terminal::Input(i) = graph.terminal(b.to) {
            j[i] -= current;
        }
    }
    Ok(j)
}
