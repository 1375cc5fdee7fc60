//! Circuit topologies: oriented branches over a node set split into input
//! and output nodes, plus the incidence matrices derived from them.
//!
//! Node indices are 0-based in memory. The plain-text graph format and all
//! user-facing output use 1-based indices.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Where a node sits in the input/output partition, with its position
/// inside that side's ordered list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Input(usize),
    Output(usize),
}

/// An oriented branch from node `from` to node `to`. Its incidence column
/// is `e_from - e_to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
}

impl Branch {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }

    pub fn reversed(self) -> Self {
        Self {
            from: self.to,
            to: self.from,
        }
    }
}

impl From<(usize, usize)> for Branch {
    fn from((from, to): (usize, usize)) -> Self {
        Self { from, to }
    }
}

/// A resistor network topology. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    num_nodes: usize,
    branches: Vec<Branch>,
    input_nodes: Vec<usize>,
    output_nodes: Vec<usize>,
    terminals: Vec<Terminal>,
    components: usize,
}

impl CircuitGraph {
    /// Validates and builds a graph. Connectivity is *not* required here so
    /// that disconnected inputs can still be inspected; the solver rejects
    /// them.
    pub fn new<B: Into<Branch>>(
        num_nodes: usize,
        branches: impl IntoIterator<Item = B>,
        input_nodes: Vec<usize>,
        output_nodes: Vec<usize>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::MalformedGraph("graph has no nodes".into()));
        }
        let branches: Vec<Branch> = branches.into_iter().map(Into::into).collect();
        for (k, b) in branches.iter().enumerate() {
            if b.from >= num_nodes || b.to >= num_nodes {
                return Err(Error::MalformedGraph(format!(
                    "branch {} ({}, {}) references a node outside 1..={num_nodes}",
                    k + 1,
                    b.from + 1,
                    b.to + 1
                )));
            }
            if b.from == b.to {
                return Err(Error::MalformedGraph(format!(
                    "branch {} is a self-loop at node {}",
                    k + 1,
                    b.from + 1
                )));
            }
        }
        if input_nodes.is_empty() {
            return Err(Error::InvalidPartition("no input nodes".into()));
        }
        if output_nodes.is_empty() {
            return Err(Error::InvalidPartition("no output nodes".into()));
        }

        let mut terminals: Vec<Option<Terminal>> = vec![None; num_nodes];
        let sides = [
            (&input_nodes, Terminal::Input as fn(usize) -> Terminal),
            (&output_nodes, Terminal::Output as fn(usize) -> Terminal),
        ];
        for (nodes, tag) in sides {
            for (pos, &n) in nodes.iter().enumerate() {
                if n >= num_nodes {
                    return Err(Error::InvalidPartition(format!(
                        "node {} is outside 1..={num_nodes}",
                        n + 1
                    )));
                }
                if terminals[n].is_some() {
                    return Err(Error::InvalidPartition(format!(
                        "node {} is listed more than once",
                        n + 1
                    )));
                }
                terminals[n] = Some(tag(pos));
            }
        }
        let terminals = terminals
            .into_iter()
            .enumerate()
            .map(|(n, t)| {
                t.ok_or_else(|| {
                    Error::InvalidPartition(format!(
                        "node {} is neither an input nor an output",
                        n + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let components = connected_components(num_nodes, &branches);
        Ok(Self {
            num_nodes,
            branches,
            input_nodes,
            output_nodes,
            terminals,
            components,
        })
    }

    /// Complete bipartite graph between `n_in` input and `n_out` output
    /// nodes. Inputs are nodes `0..n_in`; branch `i * n_out + o` runs from
    /// input `i` to output `o`.
    pub fn crossbar(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::InvalidArgument(format!(
                "crossbar needs at least one node per side, got {n_in}x{n_out}"
            )));
        }
        let branches = (0..n_in).flat_map(|i| (0..n_out).map(move |o| Branch::new(i, n_in + o)));
        Self::new(
            n_in + n_out,
            branches,
            (0..n_in).collect(),
            (n_in..n_in + n_out).collect(),
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.input_nodes.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.output_nodes.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn input_nodes(&self) -> &[usize] {
        &self.input_nodes
    }

    pub fn output_nodes(&self) -> &[usize] {
        &self.output_nodes
    }

    pub fn terminal(&self, node: usize) -> Terminal {
        self.terminals[node]
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    /// Node-by-branch incidence matrix `D`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.num_nodes, self.branches.len());
        for (k, b) in self.branches.iter().enumerate() {
            d[(b.from, k)] = 1.0;
            d[(b.to, k)] = -1.0;
        }
        d
    }

    /// Rows of `D` for the input nodes and for the output nodes, each in
    /// the declared node order.
    pub fn partition_incidence(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.incidence_matrix();
        (
            d.select_rows(&self.input_nodes),
            d.select_rows(&self.output_nodes),
        )
    }

    /// Parses the plain-text graph format:
    ///
    /// ```text
    /// nodes N inputs N_I outputs N_O
    /// k l
    /// ...
    /// ```
    ///
    /// Nodes are 1-based; inputs are `1..=N_I`, outputs `N_I+1..=N`. Blank
    /// lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::Parse {
            line: hline,
            message: format!("expected `nodes N inputs N_I outputs N_O`, got `{header}`"),
        };
        if tok.len() != 6 || tok[0] != "nodes" || tok[2] != "inputs" || tok[4] != "outputs" {
            return Err(bad_header());
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad_header());
        let (n, n_in, n_out) = (num(tok[1])?, num(tok[3])?, num(tok[5])?);
        if n_in + n_out != n {
            return Err(Error::Parse {
                line: hline,
                message: format!("inputs ({n_in}) + outputs ({n_out}) must equal nodes ({n})"),
            });
        }

        let mut branches = Vec::new();
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let parse_node = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(Error::Parse {
                        line,
                        message: format!("invalid node index `{s}`"),
                    }),
                }
            };
            if parts.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `k l`, got `{l}`"),
                });
            }
            branches.push(Branch::new(parse_node(parts[0])?, parse_node(parts[1])?));
        }
        Self::new(n, branches, (0..n_in).collect(), (n_in..n).collect())
    }

    /// Serializes to the plain-text format. Only graphs whose inputs are
    /// exactly the first `N_I` nodes in natural order can be written.
    pub fn to_text(&self) -> Result<String> {
        let n_in = self.num_inputs();
        let natural = self.input_nodes.iter().copied().eq(0..n_in)
            && self.output_nodes.iter().copied().eq(n_in..self.num_nodes);
        if !natural {
            return Err(Error::InvalidArgument(
                "graph file format requires inputs 1..N_I and outputs N_I+1..N in order".into(),
            ));
        }
        let mut s = format!(
            "nodes {} inputs {} outputs {}\n",
            self.num_nodes,
            n_in,
            self.num_outputs()
        );
        for b in &self.branches {
            let _ = writeln!(s, "{} {}", b.from + 1, b.to + 1);
        }
        Ok(s)
    }
}

/// Number of connected components of the undirected graph on `num_nodes`
/// nodes. Zero nodes gives zero components; one isolated node gives one.
pub fn connected_components(num_nodes: usize, branches: &[Branch]) -> usize {
    let mut adj = vec![Vec::new(); num_nodes];
    for b in branches {
        adj[b.from].push(b.to);
        adj[b.to].push(b.from);
    }
    let mut seen = vec![false; num_nodes];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..num_nodes {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn path3() -> CircuitGraph {
        CircuitGraph::new(3, [(0, 1), (1, 2)], vec![0, 2], vec![1]).unwrap()
    }

    #[test]
    fn single_branch_incidence() {
        let g = CircuitGraph::new(2, [(0, 1)], vec![0], vec![1]).unwrap();
        assert_eq!(g.incidence_matrix(), dmatrix![1.0; -1.0]);
    }

    #[test]
    fn path_incidence() {
        assert_eq!(
            path3().incidence_matrix(),
            dmatrix![1.0, 0.0; -1.0, 1.0; 0.0, -1.0]
        );
    }

    #[test]
    fn reversing_branch_negates_column() {
        let a = path3();
        let b = CircuitGraph::new(
            3,
            [Branch::new(0, 1), Branch::new(1, 2).reversed()],
            vec![0, 2],
            vec![1],
        )
        .unwrap();
        let (da, db) = (a.incidence_matrix(), b.incidence_matrix());
        assert_eq!(da.column(0), db.column(0));
        assert_eq!(da.column(1), -db.column(1));
    }

    #[test]
    fn path_partition() {
        let (di, d_o) = path3().partition_incidence();
        assert_eq!(di, dmatrix![1.0, 0.0; 0.0, -1.0]);
        assert_eq!(d_o, dmatrix![-1.0, 1.0]);
    }

    #[test]
    fn crossbar_partition_shape() {
        let (di, d_o) = CircuitGraph::crossbar(2, 2).unwrap().partition_incidence();
        assert_eq!(di.shape(), (2, 4));
        assert_eq!(d_o.shape(), (2, 4));
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            CircuitGraph::new(2, [(0, 1)], vec![0, 1], vec![]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            CircuitGraph::new(3, [(0, 1)], vec![0], vec![1]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            CircuitGraph::new(2, [(0, 1)], vec![0, 1], vec![1]),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn malformed_branches() {
        assert!(matches!(
            CircuitGraph::new(2, [(0, 2)], vec![0], vec![1]),
            Err(Error::MalformedGraph(_))
        ));
        assert!(matches!(
            CircuitGraph::new(2, [(1, 1)], vec![0], vec![1]),
            Err(Error::MalformedGraph(_))
        ));
    }

    #[test]
    fn parallel_branches_allowed() {
        let g = CircuitGraph::new(2, [(0, 1), (0, 1)], vec![0], vec![1]).unwrap();
        assert_eq!(g.num_branches(), 2);
    }

    #[test]
    fn crossbar_sizes() {
        let g = CircuitGraph::crossbar(40, 30).unwrap();
        assert_eq!(g.num_branches(), 1200);
        assert_eq!(g.num_nodes(), 70);
        let one = CircuitGraph::crossbar(1, 1).unwrap();
        assert_eq!(one.num_branches(), 1);
        assert!(one.is_connected());
        let g = CircuitGraph::crossbar(2, 3).unwrap();
        assert_eq!(g.num_branches(), 6);
        assert!(g.is_connected());
        assert_eq!(g.branches()[4], Branch::new(1, 3));
        assert!(matches!(
            CircuitGraph::crossbar(0, 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn connectivity() {
        assert!(CircuitGraph::crossbar(3, 2).unwrap().is_connected());
        let g = CircuitGraph::new(4, [(0, 2), (1, 3)], vec![0, 1], vec![2, 3]).unwrap();
        assert!(!g.is_connected());
        assert_eq!(g.component_count(), 2);
        assert_eq!(connected_components(1, &[]), 1);
    }

    #[test]
    fn columns_sum_to_zero_and_rank() {
        let g = CircuitGraph::crossbar(4, 3).unwrap();
        let d = g.incidence_matrix();
        for c in d.column_iter() {
            assert_eq!(c.sum(), 0.0);
        }
        assert_eq!(d.rank(1e-9), g.num_nodes() - 1);
    }

    #[test]
    fn text_format_round_trip() {
        let text = "# divider\nnodes 3 inputs 2 outputs 1\n1 3\n3 2\n";
        let g = CircuitGraph::from_text(text).unwrap();
        assert_eq!(g.input_nodes(), &[0, 1]);
        assert_eq!(g.output_nodes(), &[2]);
        assert_eq!(g.branches(), &[Branch::new(0, 2), Branch::new(2, 1)]);
        assert_eq!(CircuitGraph::from_text(&g.to_text().unwrap()).unwrap(), g);
    }

    #[test]
    fn text_format_errors() {
        assert!(matches!(
            CircuitGraph::from_text("nodes 3 inputs 1 outputs 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            CircuitGraph::from_text("nodes 2 inputs 1 outputs 1\n0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            CircuitGraph::from_text("nodes 2 inputs 1 outputs 1\n1 2 3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            CircuitGraph::from_text(""),
            Err(Error::Parse { .. })
        ));
    }
}
