//! Scenario orchestration: build the integrator, step it `N` times and record
//! positions plus diagnostics every `record_every` steps.
//!
//! Diagnostics for step `k` use the forward difference `(q_{k+1} - q_k)/h`,
//! so every propagator exposes both the current position and the next one.

use std::mem;

use super::phase::{PhaseMethod, PhaseScheme};
use super::variational::{start_pair, StepperMatrices, VariationalScheme};
use super::{Bootstrap, IntegratorKind, Variant};
use crate::diagnostics::step_diagnostics;
use crate::dynamics::{Dynamics, StackedPosition, StackedVelocity};
use crate::error::Result;
use crate::graph::FormationGraph;
use crate::scenario::{RecordedStep, Scenario, TrajectoryRecord};

/// A position stream `q_0, q_1, …` on a fixed time grid.
pub trait Propagator {
    /// `q_k`.
    fn current(&self) -> &[f64];
    /// `q_{k+1}`.
    fn ahead(&self) -> &[f64];
    /// `k ← k + 1`.
    fn advance(&mut self);
}

pub struct VariationalPropagator<'g> {
    scheme: VariationalScheme<'g>,
    prev: Vec<f64>,
    curr: Vec<f64>,
    next: Vec<f64>,
}

impl<'g> VariationalPropagator<'g> {
    pub fn new(
        graph: &'g FormationGraph,
        matrices: StepperMatrices,
        q0: &StackedPosition,
        q1: &StackedPosition,
    ) -> Self {
        let dim = q0.dim();
        Self {
            scheme: VariationalScheme::new(graph, dim, matrices),
            prev: q0.as_slice().to_vec(),
            curr: q1.as_slice().to_vec(),
            next: vec![0.0; q0.as_slice().len()],
        }
    }
}

impl Propagator for VariationalPropagator<'_> {
    fn current(&self) -> &[f64] {
        &self.prev
    }

    fn ahead(&self) -> &[f64] {
        &self.curr
    }

    fn advance(&mut self) {
        self.scheme.step(&self.prev, &self.curr, &mut self.next);
        mem::swap(&mut self.prev, &mut self.curr);
        mem::swap(&mut self.curr, &mut self.next);
    }
}

/// Euler or RK4 with `substeps` internal steps of `h / substeps` per grid step.
pub struct PhasePropagator<'g> {
    graph: &'g FormationGraph,
    scheme: PhaseScheme,
    h_sub: f64,
    substeps: usize,
    now_q: Vec<f64>,
    now_v: Vec<f64>,
    next_q: Vec<f64>,
    next_v: Vec<f64>,
}

impl<'g> PhasePropagator<'g> {
    pub fn new(
        graph: &'g FormationGraph,
        method: PhaseMethod,
        dynamics: Dynamics,
        q0: &StackedPosition,
        v0: &StackedVelocity,
        h: f64,
        substeps: usize,
    ) -> Self {
        let substeps = substeps.max(1);
        let len = q0.as_slice().len();
        let mut prop = Self {
            graph,
            scheme: PhaseScheme::new(method, dynamics, q0.dim(), len),
            h_sub: h / substeps as f64,
            substeps,
            now_q: q0.as_slice().to_vec(),
            now_v: v0.as_slice().to_vec(),
            next_q: q0.as_slice().to_vec(),
            next_v: v0.as_slice().to_vec(),
        };
        prop.step_ahead();
        prop
    }

    fn step_ahead(&mut self) {
        for _ in 0..self.substeps {
            self.scheme
                .step(self.graph, self.h_sub, &mut self.next_q, &mut self.next_v);
        }
    }

    /// Velocity at the current grid point.
    pub fn velocity(&self) -> &[f64] {
        &self.now_v
    }
}

impl Propagator for PhasePropagator<'_> {
    fn current(&self) -> &[f64] {
        &self.now_q
    }

    fn ahead(&self) -> &[f64] {
        &self.next_q
    }

    fn advance(&mut self) {
        mem::swap(&mut self.now_q, &mut self.next_q);
        mem::swap(&mut self.now_v, &mut self.next_v);
        self.next_q.copy_from_slice(&self.now_q);
        self.next_v.copy_from_slice(&self.now_v);
        self.step_ahead();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Start for the variational integrator.
    pub bootstrap: Bootstrap,
    /// Dynamics integrated by Euler and RK4.
    pub phase_dynamics: Dynamics,
    /// Internal substeps per grid step for Euler and RK4.
    pub substeps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            bootstrap: Bootstrap::FirstOrder,
            phase_dynamics: Dynamics::FORMATION,
            substeps: 1,
        }
    }
}

/// Builds the propagator selected by the scenario.
pub fn propagator<'g>(
    scenario: &Scenario,
    graph: &'g FormationGraph,
    options: &RunOptions,
) -> Result<Box<dyn Propagator + 'g>> {
    let (q0, v0) = scenario.initial_state()?;
    let h = scenario.h;
    Ok(match scenario.integrator {
        IntegratorKind::Variational => {
            let variant: Variant = scenario.variant;
            let matrices = StepperMatrices::new(graph, h, variant)?;
            let pair = start_pair(&q0, &v0, h, graph, variant, options.bootstrap)?;
            Box::new(VariationalPropagator::new(
                graph,
                matrices,
                &pair.q_prev,
                &pair.q_curr,
            ))
        }
        IntegratorKind::Euler | IntegratorKind::Rk4 => {
            let method = if scenario.integrator == IntegratorKind::Euler {
                PhaseMethod::Euler
            } else {
                PhaseMethod::Rk4
            };
            Box::new(PhasePropagator::new(
                graph,
                method,
                options.phase_dynamics,
                &q0,
                &v0,
                h,
                options.substeps,
            ))
        }
    })
}

/// Runs the scenario with default options (first-order start, formation dynamics).
pub fn run(scenario: &Scenario) -> Result<TrajectoryRecord> {
    run_with(scenario, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: &RunOptions) -> Result<TrajectoryRecord> {
    let graph = scenario.graph()?;
    let mut prop = propagator(scenario, &graph, options)?;
    Ok(record_trajectory(scenario, &graph, prop.as_mut()))
}

/// Steps `prop` through `scenario.steps` steps and records every
/// `record_every`-th one. The final step is always kept in `final_step`.
pub(crate) fn record_trajectory(
    scenario: &Scenario,
    graph: &FormationGraph,
    prop: &mut dyn Propagator,
) -> TrajectoryRecord {
    let h = scenario.h;
    let every = scenario.record_every.max(1);
    let dim = scenario.dim;
    let mut rows = Vec::with_capacity(scenario.steps / every + 1);
    let snapshot = |k: usize, prop: &dyn Propagator| {
        let time = k as f64 * h;
        RecordedStep {
            step: k,
            time,
            positions: prop.current().to_vec(),
            diagnostics: step_diagnostics(time, prop.current(), prop.ahead(), graph, dim, h),
        }
    };
    for k in 0..scenario.steps {
        if k % every == 0 {
            rows.push(snapshot(k, prop));
        }
        prop.advance();
    }
    let final_step = snapshot(scenario.steps, prop);
    if scenario.steps.is_multiple_of(every) {
        rows.push(final_step.clone());
    }
    TrajectoryRecord {
        scenario: scenario.clone(),
        rows,
        final_step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, PAPER_TRIANGLE_H005};

    #[test]
    fn zero_steps_records_initial_state() {
        let mut sc = preset(PAPER_TRIANGLE_H005).unwrap();
        sc.steps = 0;
        let rec = run(&sc).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].positions, sc.initial_positions);
        assert_eq!(rec.rows[0].time, 0.0);
    }

    #[test]
    fn record_every_spacing() {
        let mut sc = preset(PAPER_TRIANGLE_H005).unwrap();
        sc.steps = 100;
        sc.record_every = 10;
        for kind in IntegratorKind::ALL {
            sc.integrator = kind;
            let rec = run(&sc).unwrap();
            assert_eq!(rec.rows.len(), 11);
            assert_eq!(rec.rows[10].step, 100);
            for w in rec.rows.windows(2) {
                assert!(w[1].time > w[0].time);
                assert_eq!(w[1].step - w[0].step, 10);
            }
        }
        sc.steps = 95;
        let rec = run(&sc).unwrap();
        assert_eq!(rec.rows.len(), 10);
        assert_eq!(rec.final_step.step, 95);
    }

    #[test]
    fn equilibrium_run_is_constant() {
        let c = 5.0 * 3f64.sqrt();
        let q = vec![0.0, 0.0, 10.0, 0.0, 5.0, c];
        let sc = Scenario {
            dim: 2,
            agent_count: 3,
            edges: vec![(1, 2, 10.0), (2, 3, 10.0), (1, 3, 10.0)],
            initial_positions: q.clone(),
            initial_velocities: vec![0.0; 6],
            h: 0.01,
            steps: 200,
            integrator: IntegratorKind::Variational,
            variant: Variant::Paper,
            record_every: 1,
        };
        let rec = run(&sc).unwrap();
        for row in &rec.rows {
            for (a, b) in row.positions.iter().zip(&q) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
