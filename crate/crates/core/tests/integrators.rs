//! Independent oracles for the integrators: dense linear algebra for the
//! variational step, closed forms for the linear consensus system, and
//! self-convergence of the reference solver.

use formation_vi::dynamics::{Dynamics, Stacked};
use formation_vi::graph::FormationGraph;
use formation_vi::integrators::IntegratorKind;
use formation_vi::integrators::{
    vi_step, DiscretePair, PhaseMethod, PhaseScheme, StepperMatrices, Variant,
};
use formation_vi::scenario::{preset, Scenario, PAPER_TRIANGLE_H00005, PAPER_TRIANGLE_H005};
use formation_vi::verification::{
    convergence_order, reference_solution, terminal_error, DEFAULT_GRID, DEFAULT_HORIZON,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn graph_and_states() -> impl Strategy<Value = (FormationGraph, Vec<f64>, Vec<f64>, usize)> {
    (2usize..6, 1usize..4).prop_flat_map(|(s, dim)| {
        let extra = proptest::collection::vec((0..s, 0..s, 1.0f64..12.0), 0..6);
        let chain = proptest::collection::vec(1.0f64..12.0, s - 1);
        let q = proptest::collection::vec(-10.0f64..10.0, s * dim);
        let dq = proptest::collection::vec(-0.1f64..0.1, s * dim);
        (Just(s), Just(dim), chain, extra, q, dq).prop_map(|(s, dim, chain, extra, q, dq)| {
            let mut edges: Vec<(usize, usize, f64)> = chain
                .iter()
                .enumerate()
                .map(|(i, &d)| (i, i + 1, d))
                .collect();
            for (i, j, d) in extra {
                let key = (i.min(j), i.max(j));
                if i != j && !edges.iter().any(|e| (e.0, e.1) == key) {
                    edges.push((key.0, key.1, d));
                }
            }
            let g = FormationGraph::new(s, edges).unwrap();
            let prev: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a - b).collect();
            (g, prev, q, dim)
        })
    })
}

/// `(α, β)` written out independently of the library.
fn oracle_coefficients(variant: Variant, h: f64) -> (f64, f64) {
    match variant {
        Variant::Paper => (h, h * h / 2.0),
        Variant::Consistent => (h / 2.0, h * h),
    }
}

fn oracle_step(
    g: &FormationGraph,
    prev: &[f64],
    curr: &[f64],
    dim: usize,
    h: f64,
    variant: Variant,
) -> Vec<f64> {
    let (alpha, beta) = oracle_coefficients(variant, h);
    let s = g.agent_count();
    let mut lbar = DMatrix::<f64>::zeros(s * dim, s * dim);
    for e in g.edges() {
        for a in 0..dim {
            let (i, j) = (e.tail * dim + a, e.head * dim + a);
            lbar[(i, i)] += 1.0;
            lbar[(j, j)] += 1.0;
            lbar[(i, j)] -= 1.0;
            lbar[(j, i)] -= 1.0;
        }
    }
    let id = DMatrix::<f64>::identity(s * dim, s * dim);
    let mut gamma = DVector::<f64>::zeros(s * dim);
    for i in 0..s {
        for e in g.edges() {
            let j = match (e.tail == i, e.head == i) {
                (true, _) => e.head,
                (_, true) => e.tail,
                _ => continue,
            };
            let sq: f64 = (0..dim)
                .map(|a| (curr[i * dim + a] - curr[j * dim + a]).powi(2))
                .sum();
            for a in 0..dim {
                gamma[i * dim + a] +=
                    (sq - e.distance * e.distance) * (curr[i * dim + a] - curr[j * dim + a]);
            }
        }
    }
    let qp = DVector::from_column_slice(prev);
    let qc = DVector::from_column_slice(curr);
    let rhs = 2.0 * qc - (&id - alpha * &lbar) * qp - beta * gamma;
    let inv = (&id + alpha * &lbar).try_inverse().unwrap();
    (inv * rhs).as_slice().to_vec()
}

fn library_step(
    g: &FormationGraph,
    prev: &[f64],
    curr: &[f64],
    dim: usize,
    h: f64,
    variant: Variant,
) -> Vec<f64> {
    let pair = DiscretePair {
        q_prev: Stacked::new(prev.to_vec(), dim).unwrap(),
        q_curr: Stacked::new(curr.to_vec(), dim).unwrap(),
        h,
    };
    let m = StepperMatrices::new(g, h, variant).unwrap();
    vi_step(&pair, g, &m).unwrap().q_curr.into_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn vi_step_matches_dense_inverse((g, prev, curr, dim) in graph_and_states(), h in 0.001f64..0.05) {
        for variant in [Variant::Paper, Variant::Consistent] {
            let lib = library_step(&g, &prev, &curr, dim, h, variant);
            let oracle = oracle_step(&g, &prev, &curr, dim, h, variant);
            let scale = oracle.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            prop_assert!(max_diff(&lib, &oracle) <= 1e-10 * scale);
        }
    }

    #[test]
    fn vi_step_conserves_momentum((g, prev, curr, dim) in graph_and_states(), h in 0.001f64..0.05) {
        for variant in [Variant::Paper, Variant::Consistent] {
            let next = library_step(&g, &prev, &curr, dim, h, variant);
            for a in 0..dim {
                let sum = |v: &[f64]| v.iter().skip(a).step_by(dim).sum::<f64>();
                let second = sum(&next) - 2.0 * sum(&curr) + sum(&prev);
                prop_assert!(second.abs() <= 1e-10, "second difference {second}");
            }
        }
    }

    #[test]
    fn vi_step_translation_equivariant((g, prev, curr, dim) in graph_and_states(), c in -5.0f64..5.0) {
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let base = library_step(&g, &prev, &curr, dim, 0.005, Variant::Consistent);
        let moved = library_step(&g, &shift(&prev), &shift(&curr), dim, 0.005, Variant::Consistent);
        prop_assert!(max_diff(&shift(&base), &moved) <= 1e-10);
    }
}

/// Closed-form solution of `q̈ = -L̄ q̇` through the eigenbasis of `L`.
fn consensus_closed_form(
    g: &FormationGraph,
    q0: &[f64],
    v0: &[f64],
    dim: usize,
    t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let eig = g.laplacian().clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let s = g.agent_count();
    let mut q = q0.to_vec();
    let mut v = vec![0.0; q0.len()];
    for a in 0..dim {
        let v0a = DVector::from_iterator(s, (0..s).map(|i| v0[i * dim + a]));
        let modal = u.transpose() * v0a;
        let (vel, disp): (Vec<f64>, Vec<f64>) = eig
            .eigenvalues
            .iter()
            .zip(modal.iter())
            .map(|(&lam, &m)| {
                if lam.abs() < 1e-12 {
                    (m, m * t)
                } else {
                    (m * (-lam * t).exp(), m * (1.0 - (-lam * t).exp()) / lam)
                }
            })
            .unzip();
        let vel = u * DVector::from_vec(vel);
        let disp = u * DVector::from_vec(disp);
        for i in 0..s {
            v[i * dim + a] = vel[i];
            q[i * dim + a] += disp[i];
        }
    }
    (q, v)
}

fn linear_consensus_error(method: PhaseMethod, h: f64) -> f64 {
    let g = FormationGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 2, 1.0)]).unwrap();
    let q0 = [0.0, 1.0, 2.0, -1.0, 0.5, 0.5, -3.0, 2.0];
    let v0 = [1.0, 0.0, -2.0, 0.5, 0.3, 1.0, 0.0, -1.5];
    let t = 1.0;
    let dynamics = Dynamics {
        damping: 1.0,
        potential: 0.0,
    };
    let mut scheme = PhaseScheme::new(method, dynamics, 2, q0.len());
    let (mut q, mut v) = (q0.to_vec(), v0.to_vec());
    for _ in 0..(t / h).round() as usize {
        scheme.step(&g, h, &mut q, &mut v);
    }
    let (qe, ve) = consensus_closed_form(&g, &q0, &v0, 2, t);
    max_diff(&q, &qe).max(max_diff(&v, &ve))
}

#[test]
fn rk4_matches_linear_consensus_closed_form() {
    let err = linear_consensus_error(PhaseMethod::Rk4, 0.002);
    assert!(err < 1e-10, "error {err}");
}

#[test]
fn rk4_richardson_ratio() {
    let ratio = linear_consensus_error(PhaseMethod::Rk4, 0.1)
        / linear_consensus_error(PhaseMethod::Rk4, 0.05);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn euler_richardson_ratio() {
    let ratio = linear_consensus_error(PhaseMethod::Euler, 0.01)
        / linear_consensus_error(PhaseMethod::Euler, 0.005);
    assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
}

fn reference_self_convergence(name: &str) -> f64 {
    let sc = preset(name).unwrap();
    let coarse = reference_solution(&sc, sc.h / 10.0).unwrap();
    let fine = reference_solution(&sc, sc.h / 20.0).unwrap();
    terminal_error(&coarse, &fine)
}

#[test]
fn reference_is_self_consistent_h005() {
    let d = reference_self_convergence(PAPER_TRIANGLE_H005);
    assert!(d < 1e-8, "terminal difference {d}");
}

#[test]
fn reference_is_self_consistent_h00005() {
    let d = reference_self_convergence(PAPER_TRIANGLE_H00005);
    assert!(d < 1e-8, "terminal difference {d}");
}

#[test]
fn reference_of_rigid_translation_is_linear() {
    let sc = Scenario {
        dim: 2,
        agent_count: 3,
        edges: vec![(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)],
        initial_positions: vec![0.0, 0.0, 1.0, 0.0, 0.5, 3f64.sqrt() / 2.0],
        initial_velocities: [0.7, -0.2].repeat(3),
        h: 0.01,
        steps: 200,
        integrator: IntegratorKind::Variational,
        variant: Variant::Consistent,
        record_every: 10,
    };
    let rec = reference_solution(&sc, 0.001).unwrap();
    for row in &rec.rows {
        for (k, (x, x0)) in row.positions.iter().zip(&sc.initial_positions).enumerate() {
            let expected = x0 + row.time * sc.initial_velocities[k];
            assert!((x - expected).abs() < 1e-10);
        }
    }
}

#[test]
fn convergence_slopes_are_scale_invariant() {
    let base = preset(PAPER_TRIANGLE_H005).unwrap();
    let c = 0.5;
    let scaled = Scenario {
        initial_positions: base.initial_positions.iter().map(|x| c * x).collect(),
        edges: base.edges.iter().map(|&(i, j, d)| (i, j, c * d)).collect(),
        ..base.clone()
    };
    for (kind, variant) in [
        (IntegratorKind::Euler, Variant::Paper),
        (IntegratorKind::Variational, Variant::Consistent),
        (IntegratorKind::Variational, Variant::Paper),
    ] {
        let a = convergence_order(kind, variant, &base, &DEFAULT_GRID, DEFAULT_HORIZON).unwrap();
        let b = convergence_order(kind, variant, &scaled, &DEFAULT_GRID, DEFAULT_HORIZON).unwrap();
        assert!(
            (a.slope - b.slope).abs() <= a.half_width.max(b.half_width),
            "{}: {} ± {} vs {} ± {}",
            a.label(),
            a.slope,
            a.half_width,
            b.slope,
            b.half_width
        );
    }
}
