//! Per-step monitors: discrete energies, distance errors, velocity consensus
//! and linear momentum.
//!
//! Discrete velocities are forward differences `(q_{k+1} - q_k)/h`.
//!
//! The per-agent discrete energy is the trapezoidal-rule expression
//!
//! ```text
//! E_i^d = ‖q^i_{k+1} - q^i_k‖² / 2h + (h/4) Σ_{j ∈ N_i} (‖q^i_k - q^j_k‖² - d_ij²)²
//! ```
//!
//! which carries a factor `h` relative to an energy; `E^d / h` is reported
//! alongside it.

use crate::dynamics::{pair_gamma, StackedPosition, StackedVelocity};
use crate::error::{Error, Result};
use crate::graph::FormationGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub time: f64,
    pub per_agent_discrete_energy: Vec<f64>,
    pub total_discrete_energy: f64,
    pub edge_errors: Vec<f64>,
    pub velocity_disagreement: f64,
    pub momentum: Vec<f64>,
}

fn check_step(q_k: &StackedPosition, q_next: &StackedPosition, g: &FormationGraph) -> Result<()> {
    q_k.check_graph(g, "q_k")?;
    q_k.check_same(q_next, "q_{k+1}")
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            "h",
            format!("step must be positive, got {h}"),
        ))
    }
}

/// `E_i^d(q^i_k, q^i_{k+1})`.
pub fn discrete_energy(
    i: usize,
    q_k: &StackedPosition,
    q_next: &StackedPosition,
    g: &FormationGraph,
    h: f64,
) -> Result<f64> {
    check_step(q_k, q_next, g)?;
    check_h(h)?;
    if i >= g.agent_count() {
        return Err(Error::InvalidArgument(format!(
            "agent {i} out of range for {} agents",
            g.agent_count()
        )));
    }
    let energies = discrete_energies(q_k.as_slice(), q_next.as_slice(), g, q_k.dim(), h);
    Ok(energies[i])
}

fn discrete_energies(
    q_k: &[f64],
    q_next: &[f64],
    g: &FormationGraph,
    dim: usize,
    h: f64,
) -> Vec<f64> {
    let mut out: Vec<f64> = (0..g.agent_count())
        .map(|i| {
            let r = i * dim..(i + 1) * dim;
            let sq: f64 = q_next[r.clone()]
                .iter()
                .zip(&q_k[r])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq / (2.0 * h)
        })
        .collect();
    for e in g.edges() {
        let gamma = pair_gamma(
            &q_k[e.tail * dim..(e.tail + 1) * dim],
            &q_k[e.head * dim..(e.head + 1) * dim],
            e.distance,
        );
        let share = 0.25 * h * gamma * gamma;
        out[e.tail] += share;
        out[e.head] += share;
    }
    out
}

/// `‖q_i - q_j‖ - d_ij` per edge, in graph edge order.
pub fn edge_errors(q: &StackedPosition, g: &FormationGraph) -> Result<Vec<f64>> {
    q.check_graph(g, "positions")?;
    Ok(edge_errors_raw(q.as_slice(), g, q.dim()))
}

fn edge_errors_raw(q: &[f64], g: &FormationGraph, dim: usize) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|e| {
            let qi = &q[e.tail * dim..(e.tail + 1) * dim];
            let qj = &q[e.head * dim..(e.head + 1) * dim];
            let dist = qi
                .iter()
                .zip(qj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist - e.distance
        })
        .collect()
}

/// `max_{i<j} ‖v_i - v_j‖`; zero exactly at consensus.
pub fn velocity_disagreement(v: &StackedVelocity) -> f64 {
    disagreement_raw(v.as_slice(), v.dim(), 1.0)
}

fn disagreement_raw(v: &[f64], dim: usize, scale: f64) -> f64 {
    let s = v.len() / dim;
    let mut worst = 0.0f64;
    for i in 0..s {
        for j in i + 1..s {
            let d = (0..dim)
                .map(|a| {
                    let x = scale * (v[i * dim + a] - v[j * dim + a]);
                    x * x
                })
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

/// `(1/h) Σ_i (q^i_{k+1} - q^i_k)`.
pub fn momentum(q_k: &StackedPosition, q_next: &StackedPosition, h: f64) -> Result<Vec<f64>> {
    q_k.check_same(q_next, "q_{k+1}")?;
    check_h(h)?;
    Ok(momentum_raw(
        q_k.as_slice(),
        q_next.as_slice(),
        q_k.dim(),
        h,
    ))
}

fn momentum_raw(q_k: &[f64], q_next: &[f64], dim: usize, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (k, (a, b)) in q_next.iter().zip(q_k).enumerate() {
        out[k % dim] += a - b;
    }
    out.iter_mut().for_each(|m| *m /= h);
    out
}

/// All monitors for the step `(q_k, q_{k+1})`.
pub fn step_diagnostics(
    time: f64,
    q_k: &[f64],
    q_next: &[f64],
    g: &FormationGraph,
    dim: usize,
    h: f64,
) -> StepDiagnostics {
    let per_agent = discrete_energies(q_k, q_next, g, dim, h);
    let diff: Vec<f64> = q_next.iter().zip(q_k).map(|(a, b)| a - b).collect();
    StepDiagnostics {
        time,
        total_discrete_energy: per_agent.iter().sum(),
        per_agent_discrete_energy: per_agent,
        edge_errors: edge_errors_raw(q_k, g, dim),
        velocity_disagreement: disagreement_raw(&diff, dim, 1.0 / h),
        momentum: momentum_raw(q_k, q_next, dim, h),
    }
}

/// Least-squares slope of `ln(E(t) - floor)` against `t` over the given
/// `(t, E)` samples. Samples at or below `floor` are skipped; `None` when
/// fewer than two remain.
pub fn log_decay_rate(samples: &[(f64, f64)], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, e)| *e > floor)
        .map(|&(t, e)| (t, (e - floor).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, e)| (t - mt) * (e - me)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
