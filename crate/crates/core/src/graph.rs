//! Formation graph: agents, undirected edges with desired distances, and the
//! incidence / Laplacian matrices built from them.
//!
//! Agents are indexed from zero. Every edge is stored with `tail < head`, which
//! fixes the sign convention of the incidence matrix (`+1` at the tail, `-1` at
//! the head). The Laplacian `L = B Bᵀ` does not depend on that choice.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use thiserror::Error;

/// One undirected edge of the formation with its desired inter-agent distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a formation needs at least one agent")]
    NoAgents,
    #[error("edge ({agent}, {agent}) is a self loop")]
    SelfLoop { agent: usize },
    #[error("edge ({tail}, {head}) appears more than once")]
    DuplicateEdge { tail: usize, head: usize },
    #[error("agent index {index} out of range for {agent_count} agents")]
    IndexOutOfRange { index: usize, agent_count: usize },
    #[error("edge ({tail}, {head}) has non-positive desired distance {distance}")]
    NonPositiveDistance {
        tail: usize,
        head: usize,
        distance: f64,
    },
    #[error("graph is disconnected: agent {unreachable} is not reachable from agent 0")]
    Disconnected { unreachable: usize },
}

/// Validated, immutable formation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationGraph {
    agent_count: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    incidence: DMatrix<f64>,
    laplacian: DMatrix<f64>,
}

impl FormationGraph {
    /// Builds and validates a graph from `(i, j, d_ij)` triples with 0-based
    /// agent indices. The edge order given here is the edge order used by
    /// every per-edge output (incidence columns, edge errors).
    pub fn new(
        agent_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        if agent_count == 0 {
            return Err(GraphError::NoAgents);
        }
        let mut seen = BTreeSet::new();
        let mut stored = Vec::new();
        for (i, j, distance) in edges {
            for index in [i, j] {
                if index >= agent_count {
                    return Err(GraphError::IndexOutOfRange { index, agent_count });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop { agent: i });
            }
            let (tail, head) = if i < j { (i, j) } else { (j, i) };
            // NaN fails this check too.
            if !(distance > 0.0) || !distance.is_finite() {
                return Err(GraphError::NonPositiveDistance {
                    tail,
                    head,
                    distance,
                });
            }
            if !seen.insert((tail, head)) {
                return Err(GraphError::DuplicateEdge { tail, head });
            }
            stored.push(Edge {
                tail,
                head,
                distance,
            });
        }

        let mut neighbors = vec![Vec::new(); agent_count];
        for e in &stored {
            neighbors[e.tail].push(e.head);
            neighbors[e.head].push(e.tail);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        check_connected(&neighbors)?;

        let mut incidence = DMatrix::zeros(agent_count, stored.len());
        for (k, e) in stored.iter().enumerate() {
            incidence[(e.tail, k)] = 1.0;
            incidence[(e.head, k)] = -1.0;
        }
        let laplacian = &incidence * incidence.transpose();

        Ok(Self {
            agent_count,
            edges: stored,
            neighbors,
            incidence,
            laplacian,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Incidence matrix `B`, `s × |E|`.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    /// Graph Laplacian `L = B Bᵀ`, `s × s`.
    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// `L ⊗ I_n` acting on agent-major stacked vectors of `n`-dimensional points.
    pub fn inflated_laplacian(&self, dim: usize) -> DMatrix<f64> {
        self.laplacian.kronecker(&DMatrix::identity(dim, dim))
    }

    /// Sorted neighbor set `N_i`.
    pub fn neighbors(&self, agent: usize) -> Result<&[usize], GraphError> {
        self.neighbors
            .get(agent)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange {
                index: agent,
                agent_count: self.agent_count,
            })
    }

    /// Writes `(L ⊗ I_n) x` into `out` using the edge list (no dense product).
    pub fn apply_inflated_laplacian(&self, x: &[f64], dim: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.agent_count * dim);
        debug_assert_eq!(out.len(), x.len());
        out.fill(0.0);
        for e in &self.edges {
            let (t, h) = (e.tail * dim, e.head * dim);
            for a in 0..dim {
                let diff = x[t + a] - x[h + a];
                out[t + a] += diff;
                out[h + a] -= diff;
            }
        }
    }
}

fn check_connected(neighbors: &[Vec<usize>]) -> Result<(), GraphError> {
    let mut visited = vec![false; neighbors.len()];
    let mut queue = VecDeque::from([0]);
    visited[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &neighbors[i] {
            if !visited[j] {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    match visited.iter().position(|v| !v) {
        Some(unreachable) => Err(GraphError::Disconnected { unreachable }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn triangle() -> FormationGraph {
        FormationGraph::new(3, [(0, 1, 10.0), (1, 2, 10.0), (0, 2, 10.0)]).unwrap()
    }

    #[test]
    fn triangle_laplacian() {
        let g = triangle();
        let expected = DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 2., -1., -1., -1., 2.]);
        assert_eq!(g.laplacian(), &expected);
    }

    #[test]
    fn lone_agent_is_connected() {
        let g = FormationGraph::new(1, []).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.laplacian()[(0, 0)], 0.0);
    }

    #[test]
    fn single_edge_laplacian() {
        let g = FormationGraph::new(2, [(0, 1, 5.0)]).unwrap();
        assert_eq!(
            g.laplacian(),
            &DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.])
        );
    }

    #[test]
    fn orientation_is_tail_smaller() {
        let g = FormationGraph::new(2, [(1, 0, 5.0)]).unwrap();
        assert_eq!(g.edges()[0].tail, 0);
        assert_eq!(g.incidence()[(0, 0)], 1.0);
        assert_eq!(g.incidence()[(1, 0)], -1.0);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            FormationGraph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]),
            Err(GraphError::Disconnected { unreachable: 2 })
        );
        assert_eq!(
            FormationGraph::new(2, [(1, 1, 1.0)]),
            Err(GraphError::SelfLoop { agent: 1 })
        );
        assert_eq!(
            FormationGraph::new(2, [(0, 1, 1.0), (1, 0, 2.0)]),
            Err(GraphError::DuplicateEdge { tail: 0, head: 1 })
        );
        assert_eq!(
            FormationGraph::new(2, [(0, 2, 1.0)]),
            Err(GraphError::IndexOutOfRange {
                index: 2,
                agent_count: 2
            })
        );
        assert!(matches!(
            FormationGraph::new(2, [(0, 1, 0.0)]),
            Err(GraphError::NonPositiveDistance { .. })
        ));
        assert!(matches!(
            FormationGraph::new(2, [(0, 1, f64::NAN)]),
            Err(GraphError::NonPositiveDistance { .. })
        ));
        assert_eq!(
            FormationGraph::new(0, std::iter::empty()),
            Err(GraphError::NoAgents)
        );
    }

    #[test]
    fn neighbor_sets() {
        assert_eq!(triangle().neighbors(0).unwrap(), &[1, 2]);
        let edge = FormationGraph::new(2, [(0, 1, 5.0)]).unwrap();
        assert_eq!(edge.neighbors(1).unwrap(), &[0]);
        let path = FormationGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(path.neighbors(1).unwrap(), &[0, 2]);
        assert!(path.neighbors(3).is_err());
    }

    #[test]
    fn inflated_laplacian_blocks() {
        let g = triangle();
        assert_eq!(g.inflated_laplacian(1), *g.laplacian());

        let edge = FormationGraph::new(2, [(0, 1, 5.0)]).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1., 0., -1., 0., //
                0., 1., 0., -1., //
                -1., 0., 1., 0., //
                0., -1., 0., 1.,
            ],
        );
        assert_eq!(edge.inflated_laplacian(2), expected);

        let w = DVector::from_row_slice(&[0.3, -7.0, 0.3, -7.0, 0.3, -7.0]);
        assert_eq!(g.inflated_laplacian(2) * w, DVector::zeros(6));
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let g = triangle();
        let x = [1.0, 2.0, -3.0, 0.5, 4.0, -1.5];
        let mut out = [0.0; 6];
        g.apply_inflated_laplacian(&x, 2, &mut out);
        let dense = g.inflated_laplacian(2) * DVector::from_row_slice(&x);
        for (a, b) in out.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    /// Random connected graph: a random spanning tree plus random extra edges.
    fn connected_graph() -> impl Strategy<Value = FormationGraph> {
        (2usize..9)
            .prop_flat_map(|s| {
                (
                    Just(s),
                    proptest::collection::vec(any::<prop::sample::Index>(), s - 1),
                    proptest::collection::vec((0..s, 0..s), 0..12),
                )
            })
            .prop_map(|(s, parents, extra)| {
                let mut pairs = BTreeSet::new();
                for (k, p) in parents.iter().enumerate() {
                    let child = k + 1;
                    pairs.insert((p.index(child), child));
                }
                for (i, j) in extra {
                    if i != j {
                        pairs.insert((i.min(j), i.max(j)));
                    }
                }
                FormationGraph::new(s, pairs.into_iter().map(|(i, j)| (i, j, 1.0))).unwrap()
            })
    }

    proptest! {
        #[test]
        fn laplacian_kernel_and_spectrum(g in connected_graph()) {
            let s = g.agent_count();
            let ones = DVector::from_element(s, 1.0);
            prop_assert_eq!(g.laplacian() * &ones, DVector::zeros(s));
            for col in g.incidence().column_iter() {
                prop_assert_eq!(col.sum(), 0.0);
                prop_assert_eq!(col.iter().filter(|&&b| b == 1.0).count(), 1);
                prop_assert_eq!(col.iter().filter(|&&b| b == -1.0).count(), 1);
            }
            prop_assert_eq!(g.laplacian(), &g.laplacian().transpose());
            let eig = g.laplacian().clone().symmetric_eigen();
            let zeros = eig.eigenvalues.iter().filter(|l| l.abs() < 1e-9).count();
            prop_assert_eq!(zeros, 1);
            prop_assert!(eig.eigenvalues.iter().all(|&l| l > -1e-9));
        }

        #[test]
        fn inflated_kernel(g in connected_graph(), w in proptest::collection::vec(-50.0f64..50.0, 1..4)) {
            let n = w.len();
            let stacked: Vec<f64> = (0..g.agent_count()).flat_map(|_| w.iter().copied()).collect();
            let out = g.inflated_laplacian(n) * DVector::from_vec(stacked);
            let tol = 1e-12 * 50.0 * g.agent_count() as f64;
            prop_assert!(out.iter().all(|x| x.abs() <= tol));
        }

        #[test]
        fn neighbor_relation_is_symmetric(g in connected_graph()) {
            for i in 0..g.agent_count() {
                for &j in g.neighbors(i).unwrap() {
                    prop_assert!(g.neighbors(j).unwrap().contains(&i));
                }
            }
        }
    }
}
