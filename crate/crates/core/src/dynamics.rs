//! Continuous-time model of double-integrator agents with distance-based
//! shape potentials and velocity consensus:
//!
//! ```text
//! q̈_i = -Σ_{j ∈ N_i} [ (q̇_i - q̇_j) + Γ_ij (q_i - q_j) ],   Γ_ij = ‖q_i - q_j‖² - d_ij²
//! ```
//!
//! i.e. `q̈ = -(L ⊗ I_n) q̇ - ∇V` with `V = Σ_edges ¼ (‖q_ij‖² - d_ij²)²`.

use crate::error::{Error, Result};
use crate::graph::FormationGraph;

/// Agent-major stacked vector: coordinates of agent 0, then agent 1, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Stacked {
    coords: Vec<f64>,
    dim: usize,
}

/// Stacked positions `q = (q_1, …, q_s)`.
pub type StackedPosition = Stacked;
/// Stacked velocities, same layout as [`StackedPosition`].
pub type StackedVelocity = Stacked;

impl Stacked {
    pub fn new(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::shape(
                "stacked vector",
                coords.len().next_multiple_of(dim),
                coords.len(),
            ));
        }
        Ok(Self { coords, dim })
    }

    pub fn zeros(agents: usize, dim: usize) -> Self {
        Self {
            coords: vec![0.0; agents * dim],
            dim,
        }
    }

    /// `1_s ⊗ w`: every agent gets the same point `w`.
    pub fn uniform(agents: usize, w: &[f64]) -> Self {
        Self {
            coords: w.repeat(agents),
            dim: w.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn check_graph(&self, g: &FormationGraph, what: &'static str) -> Result<()> {
        if self.agents() != g.agent_count() {
            return Err(Error::shape(
                what,
                g.agent_count() * self.dim,
                self.coords.len(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &Stacked, what: &'static str) -> Result<()> {
        if self.dim != other.dim || self.coords.len() != other.coords.len() {
            return Err(Error::shape(what, self.coords.len(), other.coords.len()));
        }
        Ok(())
    }
}

fn squared_distance(qi: &[f64], qj: &[f64]) -> f64 {
    qi.iter().zip(qj).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `Γ_ij = ‖q_i - q_j‖² - d_ij²`.
pub fn pair_gamma(qi: &[f64], qj: &[f64], dij: f64) -> f64 {
    squared_distance(qi, qj) - dij * dij
}

/// `V_ij = ¼ (‖q_i - q_j‖² - d_ij²)²`.
pub fn pair_potential(qi: &[f64], qj: &[f64], dij: f64) -> f64 {
    let gamma = pair_gamma(qi, qj, dij);
    0.25 * gamma * gamma
}

/// Gradient of [`pair_potential`] with respect to `qi`: `Γ_ij (q_i - q_j)`.
pub fn pair_gradient(qi: &[f64], qj: &[f64], dij: f64) -> Vec<f64> {
    let gamma = pair_gamma(qi, qj, dij);
    qi.iter().zip(qj).map(|(a, b)| gamma * (a - b)).collect()
}

/// Total shape potential `Σ_edges V_ij`.
pub fn total_potential(q: &StackedPosition, g: &FormationGraph) -> Result<f64> {
    q.check_graph(g, "positions")?;
    Ok(g.edges()
        .iter()
        .map(|e| pair_potential(q.agent(e.tail), q.agent(e.head), e.distance))
        .sum())
}

/// Stacked gradient of the total potential, `Γ^i = Σ_{j ∈ N_i} Γ_ij (q_i - q_j)`.
pub fn stacked_gamma(q: &StackedPosition, g: &FormationGraph) -> Result<Vec<f64>> {
    q.check_graph(g, "positions")?;
    let mut out = vec![0.0; q.as_slice().len()];
    gamma_into(g, q.dim(), q.as_slice(), 1.0, &mut out);
    Ok(out)
}

/// Overwrites `out` with `scale · Γ(q)`.
pub(crate) fn gamma_into(g: &FormationGraph, dim: usize, q: &[f64], scale: f64, out: &mut [f64]) {
    out.fill(0.0);
    for e in g.edges() {
        let (t, h) = (e.tail * dim, e.head * dim);
        let gamma = scale * pair_gamma(&q[t..t + dim], &q[h..h + dim], e.distance);
        for a in 0..dim {
            let f = gamma * (q[t + a] - q[h + a]);
            out[t + a] += f;
            out[h + a] -= f;
        }
    }
}

/// Gains of the second-order system `q̈ = -damping · L̄ q̇ - potential · ∇V`.
///
/// [`Dynamics::FORMATION`] is the formation/flocking model. Other gains
/// describe the modified equations that a discretization actually follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub damping: f64,
    pub potential: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self::FORMATION
    }
}

impl Dynamics {
    pub const FORMATION: Self = Self {
        damping: 1.0,
        potential: 1.0,
    };

    /// Writes `q̈` into `out`. Slices are agent-major and of equal length.
    pub(crate) fn acceleration_into(
        &self,
        g: &FormationGraph,
        dim: usize,
        q: &[f64],
        v: &[f64],
        out: &mut [f64],
    ) {
        out.fill(0.0);
        for e in g.edges() {
            let (t, h) = (e.tail * dim, e.head * dim);
            let gamma = self.potential * pair_gamma(&q[t..t + dim], &q[h..h + dim], e.distance);
            for a in 0..dim {
                let f = gamma * (q[t + a] - q[h + a]) + self.damping * (v[t + a] - v[h + a]);
                out[t + a] -= f;
                out[h + a] += f;
            }
        }
    }

    pub fn accelerations(
        &self,
        q: &StackedPosition,
        v: &StackedVelocity,
        g: &FormationGraph,
    ) -> Result<Vec<f64>> {
        q.check_graph(g, "positions")?;
        q.check_same(v, "velocities")?;
        let mut out = vec![0.0; q.as_slice().len()];
        self.acceleration_into(g, q.dim(), q.as_slice(), v.as_slice(), &mut out);
        Ok(out)
    }
}

/// Right-hand side of the formation/flocking model, `-Γ(q) - L̄ v`.
pub fn accelerations(
    q: &StackedPosition,
    v: &StackedVelocity,
    g: &FormationGraph,
) -> Result<Vec<f64>> {
    Dynamics::FORMATION.accelerations(q, v, g)
}

/// `E_i = ½‖q̇_i‖² + ½ Σ_{j ∈ N_i} V_ij`.
pub fn agent_energy(
    i: usize,
    q: &StackedPosition,
    v: &StackedVelocity,
    g: &FormationGraph,
) -> Result<f64> {
    q.check_graph(g, "positions")?;
    q.check_same(v, "velocities")?;
    let vi = v.agent(i);
    let kinetic = 0.5 * vi.iter().map(|x| x * x).sum::<f64>();
    let mut potential = 0.0;
    for &j in g.neighbors(i)? {
        let d = g
            .edges()
            .iter()
            .find(|e| (e.tail, e.head) == (i.min(j), i.max(j)))
            .map(|e| e.distance)
            .expect("neighbor lists mirror the edge list");
        potential += pair_potential(q.agent(i), q.agent(j), d);
    }
    Ok(kinetic + 0.5 * potential)
}

/// `Σ_i E_i`, which equals kinetic energy plus `Σ_edges V_ij`.
pub fn total_energy(q: &StackedPosition, v: &StackedVelocity, g: &FormationGraph) -> Result<f64> {
    (0..g.agent_count()).map(|i| agent_energy(i, q, v, g)).sum()
}
