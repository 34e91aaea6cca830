//! Forced variational integrator.
//!
//! One step maps the pair `(q_{k-1}, q_k)` to `(q_k, q_{k+1})` via
//!
//! ```text
//! (I + αL̄) q_{k+1} = 2 q_k - (I - αL̄) q_{k-1} - β Γ(q_k)
//! ```
//!
//! Since `I + αL̄ = (I_s + αL) ⊗ I_n`, the `n·s` system splits into `n`
//! independent `s × s` solves sharing one Cholesky factor (the matrix is
//! symmetric positive definite for every `α ≥ 0`).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{Bootstrap, Variant};
use crate::dynamics::{gamma_into, pair_gamma, Dynamics, StackedPosition, StackedVelocity};
use crate::error::{Error, Result};
use crate::graph::FormationGraph;

/// Precomputed linear-algebra structure of the variational update.
#[derive(Debug, Clone)]
pub struct StepperMatrices {
    variant: Variant,
    h: f64,
    alpha: f64,
    beta: f64,
    system: DMatrix<f64>,
    mat_b: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    /// Row-major `(I_s + αL)⁻¹`, assembled from the factor.
    inverse: Vec<f64>,
}

pub fn precompute_stepper(g: &FormationGraph, h: f64, variant: Variant) -> Result<StepperMatrices> {
    StepperMatrices::new(g, h, variant)
}

impl StepperMatrices {
    pub fn new(g: &FormationGraph, h: f64, variant: Variant) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::validation(
                "h",
                format!("step must be positive, got {h}"),
            ));
        }
        let (alpha, beta) = variant.coefficients(h);
        let s = g.agent_count();
        let identity = DMatrix::<f64>::identity(s, s);
        let system = &identity + g.laplacian() * alpha;
        let mat_b = &identity - g.laplacian() * alpha;
        let factor =
            Cholesky::new(system.clone()).expect("I + αL is symmetric positive definite for α ≥ 0");
        // Well conditioned: the spectrum lies in [1, 1 + α λ_max(L)].
        let inverse = factor.inverse().transpose().as_slice().to_vec();
        Ok(Self {
            variant,
            h,
            alpha,
            beta,
            system,
            mat_b,
            factor,
            inverse,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `I_s + αL`.
    pub fn system_matrix(&self) -> &DMatrix<f64> {
        &self.system
    }

    /// `I_s - αL`.
    pub fn mat_b(&self) -> &DMatrix<f64> {
        &self.mat_b
    }

    /// Solves `(I_s + αL) x = b` for one `s`-vector.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let s = self.system.nrows();
        if b.len() != s {
            return Err(Error::shape("right-hand side", s, b.len()));
        }
        let mut x = DVector::from_column_slice(b);
        self.factor.solve_mut(&mut x);
        Ok(x.as_slice().to_vec())
    }

    /// `x = base + ((I_s + αL) ⊗ I_n)⁻¹ rhs` on agent-major slices.
    fn solve_stacked(&self, rhs: &[f64], base: &[f64], x: &mut [f64], dim: usize) {
        let s = self.system.nrows();
        x.copy_from_slice(base);
        for (i, row) in self.inverse.chunks_exact(s).enumerate() {
            let xi = &mut x[i * dim..(i + 1) * dim];
            for (j, m) in row.iter().enumerate() {
                for (x, r) in xi.iter_mut().zip(&rhs[j * dim..(j + 1) * dim]) {
                    *x += m * r;
                }
            }
        }
    }
}

/// State of the discrete flow: `(q_{k-1}, q_k)` at fixed step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePair {
    pub q_prev: StackedPosition,
    pub q_curr: StackedPosition,
    pub h: f64,
}

/// `(q_0, q_0 + h v_0)`.
pub fn bootstrap(q0: &StackedPosition, v0: &StackedVelocity, h: f64) -> Result<DiscretePair> {
    q0.check_same(v0, "initial velocities")?;
    let q1 = q0
        .as_slice()
        .iter()
        .zip(v0.as_slice())
        .map(|(q, v)| q + h * v)
        .collect();
    Ok(DiscretePair {
        q_prev: q0.clone(),
        q_curr: StackedPosition::new(q1, q0.dim())?,
        h,
    })
}

/// `(q_0, q_0 + h v_0 + ½ h² a_0)` where `a_0` comes from `dynamics`.
pub fn bootstrap_second_order(
    q0: &StackedPosition,
    v0: &StackedVelocity,
    h: f64,
    g: &FormationGraph,
    dynamics: Dynamics,
) -> Result<DiscretePair> {
    let a0 = dynamics.accelerations(q0, v0, g)?;
    let mut pair = bootstrap(q0, v0, h)?;
    for (q, a) in pair.q_curr.as_mut_slice().iter_mut().zip(&a0) {
        *q += 0.5 * h * h * a;
    }
    Ok(pair)
}

pub(crate) fn start_pair(
    q0: &StackedPosition,
    v0: &StackedVelocity,
    h: f64,
    g: &FormationGraph,
    variant: Variant,
    mode: Bootstrap,
) -> Result<DiscretePair> {
    match mode {
        Bootstrap::FirstOrder => bootstrap(q0, v0, h),
        Bootstrap::SecondOrder => bootstrap_second_order(q0, v0, h, g, variant.modified_dynamics()),
    }
}

/// Allocation-free stepper bound to one graph and dimension.
#[derive(Debug, Clone)]
pub struct VariationalScheme<'g> {
    graph: &'g FormationGraph,
    dim: usize,
    matrices: StepperMatrices,
    rhs: Vec<f64>,
}

impl<'g> VariationalScheme<'g> {
    pub fn new(graph: &'g FormationGraph, dim: usize, matrices: StepperMatrices) -> Self {
        Self {
            graph,
            dim,
            matrices,
            rhs: vec![0.0; graph.agent_count() * dim],
        }
    }

    pub fn matrices(&self) -> &StepperMatrices {
        &self.matrices
    }

    /// Writes `q_{k+1}` into `q_next`.
    ///
    /// Uses `I - αL̄ = 2I - (I + αL̄)`, so that
    /// `q_{k+1} = q_{k-1} + (I + αL̄)⁻¹ (2(q_k - q_{k-1}) - βΓ(q_k))`
    /// and the edge pass only needs `Γ`.
    pub fn step(&mut self, q_prev: &[f64], q_curr: &[f64], q_next: &mut [f64]) {
        let dim = self.dim;
        let beta = self.matrices.beta;
        let rhs = &mut self.rhs;
        for ((r, c), p) in rhs.iter_mut().zip(q_curr).zip(q_prev) {
            *r = 2.0 * (c - p);
        }
        for e in self.graph.edges() {
            let (t, h) = (e.tail * dim, e.head * dim);
            let gamma = beta * pair_gamma(&q_curr[t..t + dim], &q_curr[h..h + dim], e.distance);
            for a in 0..dim {
                let f = gamma * (q_curr[t + a] - q_curr[h + a]);
                rhs[t + a] -= f;
                rhs[h + a] += f;
            }
        }
        self.matrices.solve_stacked(rhs, q_prev, q_next, dim);
    }
}

fn check_pair(pair: &DiscretePair, g: &FormationGraph, s_m: &StepperMatrices) -> Result<()> {
    pair.q_prev.check_graph(g, "q_prev")?;
    pair.q_prev.check_same(&pair.q_curr, "q_curr")?;
    if s_m.system.nrows() != g.agent_count() {
        return Err(Error::shape(
            "stepper matrices",
            g.agent_count(),
            s_m.system.nrows(),
        ));
    }
    Ok(())
}

/// One application of the discrete flow `(q_{k-1}, q_k) ↦ (q_k, q_{k+1})`.
pub fn vi_step(
    pair: &DiscretePair,
    g: &FormationGraph,
    s_m: &StepperMatrices,
) -> Result<DiscretePair> {
    check_pair(pair, g, s_m)?;
    let dim = pair.q_curr.dim();
    let mut scheme = VariationalScheme::new(g, dim, s_m.clone());
    let mut next = vec![0.0; pair.q_curr.as_slice().len()];
    scheme.step(pair.q_prev.as_slice(), pair.q_curr.as_slice(), &mut next);
    Ok(DiscretePair {
        q_prev: pair.q_curr.clone(),
        q_curr: StackedPosition::new(next, dim)?,
        h: pair.h,
    })
}

fn check_triple(
    q_prev: &StackedPosition,
    q_curr: &StackedPosition,
    q_next: &StackedPosition,
    g: &FormationGraph,
) -> Result<()> {
    q_prev.check_graph(g, "q_prev")?;
    q_prev.check_same(q_curr, "q_curr")?;
    q_prev.check_same(q_next, "q_next")
}

/// Left-hand side of the forced discrete Euler–Lagrange equations assembled
/// term by term from the trapezoidal building blocks:
///
/// ```text
/// D₁L_d(q_k, q_{k+1}) + D₂L_d(q_{k-1}, q_k)
///   + Σ_{j ∈ N_i} [ D₁V^d_ij(q_k) + F⁺_ij(q_{k-1}, q_k) + F⁻_ij(q_k, q_{k+1}) ]
/// ```
///
/// with `L_d = ‖q_{k+1} - q_k‖² / 2h`, `V^d_ij = ¼(‖q^i_k - q^j_k‖² - d²)²`
/// and `F^±_ij = (l_ij / h)(Δq^j - Δq^i)` over the corresponding step.
pub fn discrete_el_residual(
    q_prev: &StackedPosition,
    q_curr: &StackedPosition,
    q_next: &StackedPosition,
    g: &FormationGraph,
    h: f64,
) -> Result<Vec<f64>> {
    check_triple(q_prev, q_curr, q_next, g)?;
    let dim = q_curr.dim();
    let (p, c, n) = (q_prev.as_slice(), q_curr.as_slice(), q_next.as_slice());
    let mut out = vec![0.0; c.len()];
    for i in 0..g.agent_count() {
        for a in 0..dim {
            let ia = i * dim + a;
            let d1_ld = -(n[ia] - c[ia]) / h;
            let d2_ld = (c[ia] - p[ia]) / h;
            out[ia] = d1_ld + d2_ld;
        }
        for e in g.edges().iter().filter(|e| e.tail == i || e.head == i) {
            let j = if e.tail == i { e.head } else { e.tail };
            let l_ij = g.laplacian()[(i, j)];
            let gamma = pair_gamma(q_curr.agent(i), q_curr.agent(j), e.distance);
            for a in 0..dim {
                let (ia, ja) = (i * dim + a, j * dim + a);
                let d1_v = gamma * (c[ia] - c[ja]);
                let f_plus = l_ij / h * ((c[ja] - p[ja]) - (c[ia] - p[ia]));
                let f_minus = l_ij / h * ((n[ja] - c[ja]) - (n[ia] - c[ia]));
                out[ia] += d1_v + f_plus + f_minus;
            }
        }
    }
    Ok(out)
}

/// Residual of the variational update itself,
/// `(I + αL̄) q_{k+1} - 2 q_k + (I - αL̄) q_{k-1} + β Γ(q_k)`, evaluated with
/// dense matrices.
pub fn scheme_residual(
    q_prev: &StackedPosition,
    q_curr: &StackedPosition,
    q_next: &StackedPosition,
    g: &FormationGraph,
    h: f64,
    variant: Variant,
) -> Result<Vec<f64>> {
    check_triple(q_prev, q_curr, q_next, g)?;
    let dim = q_curr.dim();
    let (alpha, beta) = variant.coefficients(h);
    let lap = g.inflated_laplacian(dim);
    let p = DVector::from_column_slice(q_prev.as_slice());
    let c = DVector::from_column_slice(q_curr.as_slice());
    let n = DVector::from_column_slice(q_next.as_slice());
    let mut gamma = vec![0.0; c.len()];
    gamma_into(g, dim, c.as_slice(), 1.0, &mut gamma);
    let r = &n + &lap * &n * alpha - &c * 2.0 + &p - &lap * &p * alpha
        + DVector::from_vec(gamma) * beta;
    Ok(r.as_slice().to_vec())
}
