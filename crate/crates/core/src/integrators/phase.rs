//! One-step methods on the first-order form `(q, v)` of the formation model.

use crate::dynamics::{Dynamics, StackedPosition, StackedVelocity};
use crate::error::Result;
use crate::graph::FormationGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: StackedPosition,
    pub v: StackedVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMethod {
    Euler,
    Rk4,
}

/// Reusable scratch space for [`PhaseMethod`] steps.
#[derive(Debug, Clone)]
pub struct PhaseScheme {
    method: PhaseMethod,
    dynamics: Dynamics,
    dim: usize,
    qs: Vec<f64>,
    vs: Vec<f64>,
    acc: Vec<f64>,
    sum_q: Vec<f64>,
    sum_v: Vec<f64>,
}

impl PhaseScheme {
    pub fn new(method: PhaseMethod, dynamics: Dynamics, dim: usize, len: usize) -> Self {
        Self {
            method,
            dynamics,
            dim,
            qs: vec![0.0; len],
            vs: vec![0.0; len],
            acc: vec![0.0; len],
            sum_q: vec![0.0; len],
            sum_v: vec![0.0; len],
        }
    }

    /// Advances `(q, v)` by `h` in place.
    pub fn step(&mut self, g: &FormationGraph, h: f64, q: &mut [f64], v: &mut [f64]) {
        match self.method {
            PhaseMethod::Euler => self.euler(g, h, q, v),
            PhaseMethod::Rk4 => self.rk4(g, h, q, v),
        }
    }

    fn euler(&mut self, g: &FormationGraph, h: f64, q: &mut [f64], v: &mut [f64]) {
        self.dynamics
            .acceleration_into(g, self.dim, q, v, &mut self.acc);
        for ((qi, vi), ai) in q.iter_mut().zip(v.iter_mut()).zip(&self.acc) {
            *qi += h * *vi;
            *vi += h * ai;
        }
    }

    fn rk4(&mut self, g: &FormationGraph, h: f64, q: &mut [f64], v: &mut [f64]) {
        let half = 0.5 * h;
        let dim = self.dim;

        // stage 1
        self.dynamics.acceleration_into(g, dim, q, v, &mut self.acc);
        self.sum_q.copy_from_slice(v);
        self.sum_v.copy_from_slice(&self.acc);
        for k in 0..q.len() {
            self.qs[k] = q[k] + half * v[k];
            self.vs[k] = v[k] + half * self.acc[k];
        }

        // stage 2
        self.dynamics
            .acceleration_into(g, dim, &self.qs, &self.vs, &mut self.acc);
        for k in 0..q.len() {
            self.sum_q[k] += 2.0 * self.vs[k];
            self.sum_v[k] += 2.0 * self.acc[k];
            self.qs[k] = q[k] + half * self.vs[k];
            self.vs[k] = v[k] + half * self.acc[k];
        }

        // stage 3
        self.dynamics
            .acceleration_into(g, dim, &self.qs, &self.vs, &mut self.acc);
        for k in 0..q.len() {
            self.sum_q[k] += 2.0 * self.vs[k];
            self.sum_v[k] += 2.0 * self.acc[k];
            self.qs[k] = q[k] + h * self.vs[k];
            self.vs[k] = v[k] + h * self.acc[k];
        }

        // stage 4
        self.dynamics
            .acceleration_into(g, dim, &self.qs, &self.vs, &mut self.acc);
        for k in 0..q.len() {
            self.sum_q[k] += self.vs[k];
            self.sum_v[k] += self.acc[k];
            q[k] += h / 6.0 * self.sum_q[k];
            v[k] += h / 6.0 * self.sum_v[k];
        }
    }
}

fn one_step(
    method: PhaseMethod,
    state: &PhaseState,
    g: &FormationGraph,
    h: f64,
) -> Result<PhaseState> {
    state.q.check_graph(g, "positions")?;
    state.q.check_same(&state.v, "velocities")?;
    let mut next = state.clone();
    let len = next.q.as_slice().len();
    let mut scheme = PhaseScheme::new(method, Dynamics::FORMATION, next.q.dim(), len);
    scheme.step(g, h, next.q.as_mut_slice(), next.v.as_mut_slice());
    Ok(next)
}

/// `q⁺ = q + h v`, `v⁺ = v + h a(q, v)`.
pub fn euler_step(state: &PhaseState, g: &FormationGraph, h: f64) -> Result<PhaseState> {
    one_step(PhaseMethod::Euler, state, g, h)
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step(state: &PhaseState, g: &FormationGraph, h: f64) -> Result<PhaseState> {
    one_step(PhaseMethod::Rk4, state, g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{accelerations, Stacked};
    use crate::scenario::{preset, PAPER_TRIANGLE_H005};

    fn at_rest_equilateral() -> (FormationGraph, PhaseState) {
        let g = FormationGraph::new(3, [(0, 1, 10.0), (1, 2, 10.0), (0, 2, 10.0)]).unwrap();
        let c = 5.0 * 3f64.sqrt();
        let q = Stacked::new(vec![0.0, 0.0, 10.0, 0.0, 5.0, c], 2).unwrap();
        let v = Stacked::zeros(3, 2);
        (g, PhaseState { q, v })
    }

    #[test]
    fn equilibrium_unchanged() {
        let (g, state) = at_rest_equilateral();
        for next in [
            euler_step(&state, &g, 0.01).unwrap(),
            rk4_step(&state, &g, 0.01).unwrap(),
        ] {
            for (a, b) in next.q.as_slice().iter().zip(state.q.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(next.v.as_slice().iter().all(|x| x.abs() < 1e-10));
        }

        let edge = FormationGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let state = PhaseState {
            q: Stacked::new(vec![0.0, 0.0, 1.0, 0.0], 2).unwrap(),
            v: Stacked::zeros(2, 2),
        };
        assert_eq!(euler_step(&state, &edge, 0.1).unwrap(), state);
    }

    #[test]
    fn euler_matches_hand_update() {
        let sc = preset(PAPER_TRIANGLE_H005).unwrap();
        let g = sc.graph().unwrap();
        let (q, v) = sc.initial_state().unwrap();
        let a = accelerations(&q, &v, &g).unwrap();
        let next = euler_step(
            &PhaseState {
                q: q.clone(),
                v: v.clone(),
            },
            &g,
            sc.h,
        )
        .unwrap();
        for k in 0..6 {
            let qk = q.as_slice()[k] + sc.h * v.as_slice()[k];
            let vk = v.as_slice()[k] + sc.h * a[k];
            assert!((next.q.as_slice()[k] - qk).abs() < 1e-12);
            assert!((next.v.as_slice()[k] - vk).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_checked() {
        let (g, mut state) = at_rest_equilateral();
        state.v = Stacked::zeros(2, 2);
        assert!(rk4_step(&state, &g, 0.1).is_err());
    }
}
