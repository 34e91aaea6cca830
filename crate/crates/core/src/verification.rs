//! Accuracy oracles and audits: fine-step RK4 reference trajectories,
//! log–log convergence-order fits, discrete Euler–Lagrange residual audits and
//! trajectory comparisons.

use std::fmt;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dynamics::{Dynamics, Stacked};
use crate::error::{Error, Result};
use crate::integrators::run::{record_trajectory, run_with};
use crate::integrators::{
    discrete_el_residual, scheme_residual, Bootstrap, IntegratorKind, PhaseMethod, PhasePropagator,
    Propagator, RunOptions, StepperMatrices, Variant, VariationalPropagator,
};
use crate::scenario::{Scenario, TrajectoryRecord};

/// Reference step is `h / REFERENCE_RATIO` unless overridden.
pub const REFERENCE_RATIO: usize = 100;

/// Default step-size grid for convergence studies.
pub const DEFAULT_GRID: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];

/// Default common horizon for convergence studies.
pub const DEFAULT_HORIZON: f64 = 0.1;

/// RK4 solution of the formation model with step `h_ref`, sampled on the
/// scenario's grid.
pub fn reference_solution(scenario: &Scenario, h_ref: f64) -> Result<TrajectoryRecord> {
    reference_solution_with(scenario, h_ref, Dynamics::FORMATION)
}

/// As [`reference_solution`] for arbitrary damping/potential gains.
pub fn reference_solution_with(
    scenario: &Scenario,
    h_ref: f64,
    dynamics: Dynamics,
) -> Result<TrajectoryRecord> {
    let h = scenario.h;
    if !(h_ref > 0.0) || h_ref > h / 10.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "reference step {h_ref} must be positive and at most h/10 = {}",
            h / 10.0
        )));
    }
    let substeps = (h / h_ref).round();
    if (substeps * h_ref - h).abs() > 1e-12 {
        return Err(Error::NonDivisibleStep { h, h_ref });
    }
    let graph = scenario.validate()?;
    let (q0, v0) = scenario.initial_state()?;
    let mut prop = PhasePropagator::new(
        &graph,
        PhaseMethod::Rk4,
        dynamics,
        &q0,
        &v0,
        h,
        substeps as usize,
    );
    Ok(record_trajectory(scenario, &graph, &mut prop))
}

/// Dynamics whose solution an integrator/variant pair converges to.
pub fn target_dynamics(kind: IntegratorKind, variant: Variant) -> Dynamics {
    match kind {
        IntegratorKind::Variational => variant.modified_dynamics(),
        IntegratorKind::Euler | IntegratorKind::Rk4 => Dynamics::FORMATION,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub integrator: IntegratorKind,
    pub variant: Variant,
    pub horizon: f64,
    /// Strictly decreasing.
    pub step_sizes: Vec<f64>,
    /// `‖q_N - q_ref(T)‖₂` per step size.
    pub errors: Vec<f64>,
    pub slope: f64,
    /// 95% Student-t half-width of the slope.
    pub half_width: f64,
}

impl ConvergenceReport {
    pub fn label(&self) -> String {
        match self.integrator {
            IntegratorKind::Variational => format!("variational({})", self.variant.name()),
            other => other.name().to_string(),
        }
    }

    /// `integrator,h,error` rows plus a trailing slope row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("integrator,h,error\n");
        for (h, e) in self.step_sizes.iter().zip(&self.errors) {
            out.push_str(&format!("{},{h:?},{e:?}\n", self.label()));
        }
        out
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} at T = {}", self.label(), self.horizon)?;
        writeln!(f, "  {:>12}  {:>14}", "h", "error")?;
        for (h, e) in self.step_sizes.iter().zip(&self.errors) {
            writeln!(f, "  {h:>12.6}  {e:>14.6e}")?;
        }
        write!(f, "  slope {:.3} ± {:.3}", self.slope, self.half_width)
    }
}

/// Least-squares slope of `ln e` against `ln h` and its 95% half-width.
pub fn fit_loglog(step_sizes: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if step_sizes.len() != errors.len() || step_sizes.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least three (h, error) pairs".into(),
        ));
    }
    if let Some(bad) = errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::DegenerateConvergence(format!(
            "error {bad} cannot be placed on a log scale"
        )));
    }
    let x: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = m - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok((slope, t * se))
}

/// Global-error convergence study at common horizon `horizon`.
///
/// Each step size runs independently (in parallel); the variational
/// integrator uses the second-order start and is measured against the RK4
/// solution of its own modified dynamics.
pub fn convergence_order(
    kind: IntegratorKind,
    variant: Variant,
    scenario: &Scenario,
    steps: &[f64],
    horizon: f64,
) -> Result<ConvergenceReport> {
    if steps.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "convergence study needs at least 3 step sizes, got {}",
            steps.len()
        )));
    }
    let mut grid = steps.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    if grid.windows(2).any(|w| w[0] <= w[1]) || grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument(
            "step sizes must be positive and distinct".into(),
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must be positive"
        )));
    }
    scenario.validate()?;

    let errors = grid
        .par_iter()
        .map(|&h| {
            let n = (horizon / h).round();
            if n < 1.0 || (n * h - horizon).abs() > 1e-9 * horizon {
                return Err(Error::InvalidArgument(format!(
                    "horizon {horizon} is not a whole number of steps of {h}"
                )));
            }
            let sc = Scenario {
                h,
                steps: n as usize,
                record_every: n as usize,
                integrator: kind,
                variant,
                ..scenario.clone()
            };
            let options = RunOptions {
                bootstrap: Bootstrap::SecondOrder,
                ..RunOptions::default()
            };
            let approx = run_with(&sc, &options)?;
            let reference = reference_solution_with(
                &sc,
                h / REFERENCE_RATIO as f64,
                target_dynamics(kind, variant),
            )?;
            Ok(terminal_error(&approx, &reference))
        })
        .collect::<Result<Vec<f64>>>()?;

    let (slope, half_width) = fit_loglog(&grid, &errors)?;
    Ok(ConvergenceReport {
        integrator: kind,
        variant,
        horizon,
        step_sizes: grid,
        errors,
        slope,
        half_width,
    })
}

/// Per-step maxima of the two residuals along a variational run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualAudit {
    pub variant: Variant,
    /// `max_i |discrete_el_residual|` at steps `k = 1, …, N`.
    pub printed: Vec<f64>,
    /// `max_i |scheme_residual|` for the same triples.
    pub scheme: Vec<f64>,
}

impl ResidualAudit {
    pub fn max_printed(&self) -> f64 {
        max_abs(&self.printed)
    }

    pub fn max_scheme(&self) -> f64 {
        max_abs(&self.scheme)
    }
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, v| {
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v.abs())
        }
    })
}

/// Runs the variational scheme (first-order start) for `scenario.steps` steps
/// and evaluates both residuals on every consecutive triple.
pub fn residual_audit(scenario: &Scenario, variant: Variant) -> Result<ResidualAudit> {
    let graph = scenario.validate()?;
    let (q0, v0) = scenario.initial_state()?;
    let h = scenario.h;
    let dim = scenario.dim;
    let matrices = StepperMatrices::new(&graph, h, variant)?;
    let q1: Vec<f64> = q0
        .as_slice()
        .iter()
        .zip(v0.as_slice())
        .map(|(q, v)| q + h * v)
        .collect();
    let mut prop = VariationalPropagator::new(&graph, matrices, &q0, &Stacked::new(q1, dim)?);
    let mut printed = Vec::with_capacity(scenario.steps);
    let mut scheme = Vec::with_capacity(scenario.steps);
    for _ in 0..scenario.steps {
        let q_prev = Stacked::new(prop.current().to_vec(), dim)?;
        prop.advance();
        let q_curr = Stacked::new(prop.current().to_vec(), dim)?;
        let q_next = Stacked::new(prop.ahead().to_vec(), dim)?;
        printed.push(max_abs(&discrete_el_residual(
            &q_prev, &q_curr, &q_next, &graph, h,
        )?));
        scheme.push(max_abs(&scheme_residual(
            &q_prev, &q_curr, &q_next, &graph, h, variant,
        )?));
    }
    Ok(ResidualAudit {
        variant,
        printed,
        scheme,
    })
}

/// `‖q_N^a - q_N^b‖₂` on the final step; infinite if either is non-finite.
pub fn terminal_error(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    let d: f64 = a
        .final_step
        .positions
        .iter()
        .zip(&b.final_step.positions)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    if d.is_finite() {
        d
    } else {
        f64::INFINITY
    }
}

fn check_aligned(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<()> {
    let aligned = a.rows.len() == b.rows.len()
        && a.rows
            .iter()
            .zip(&b.rows)
            .all(|(x, y)| (x.time - y.time).abs() <= 1e-9 * x.time.abs().max(1.0));
    if aligned {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "trajectories are not recorded on the same time grid".into(),
        ))
    }
}

/// Largest per-agent Euclidean distance between two records over all
/// recorded times.
pub fn max_position_discrepancy(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<f64> {
    check_aligned(a, b)?;
    let dim = a.scenario.dim;
    let mut worst = 0.0f64;
    for (x, y) in a.rows.iter().zip(&b.rows) {
        for (pa, pb) in x.positions.chunks(dim).zip(y.positions.chunks(dim)) {
            let d = pa
                .iter()
                .zip(pb)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            if !d.is_finite() {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Largest `|E^d_a(t) - E^d_b(t)|` of the total discrete energy.
pub fn max_energy_discrepancy(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<f64> {
    check_aligned(a, b)?;
    let mut worst = 0.0f64;
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let d = (x.diagnostics.total_discrete_energy - y.diagnostics.total_discrete_energy).abs();
        if !d.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, PAPER_TRIANGLE_H005};

    #[test]
    fn fit_recovers_power_law() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let es: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powi(2)).collect();
        let (slope, hw) = fit_loglog(&hs, &es).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(hw < 1e-9);
        assert!(matches!(
            fit_loglog(&hs, &[1.0, 0.0, 1.0, 1.0]),
            Err(Error::DegenerateConvergence(_))
        ));
        assert!(fit_loglog(&hs[..2], &es[..2]).is_err());
    }

    #[test]
    fn reference_step_checks() {
        let sc = preset(PAPER_TRIANGLE_H005).unwrap();
        assert!(matches!(
            reference_solution(&sc, 0.0003),
            Err(Error::NonDivisibleStep { .. })
        ));
        assert!(reference_solution(&sc, 0.001).is_err());
    }

    #[test]
    fn study_needs_three_sizes() {
        let sc = preset(PAPER_TRIANGLE_H005).unwrap();
        let r = convergence_order(
            IntegratorKind::Euler,
            Variant::Paper,
            &sc,
            &[0.01, 0.005],
            0.1,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
        let r = convergence_order(
            IntegratorKind::Euler,
            Variant::Paper,
            &sc,
            &[0.01, 0.01, 0.005],
            0.1,
        );
        assert!(r.is_err());
    }
}
