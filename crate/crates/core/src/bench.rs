//! Per-step cost of the raw integrator kernels, without recording.
//!
//! Each repetition times the three kernels back to back so that they share
//! whatever load the machine carries at that moment; the fastest repetition
//! of each is kept.

use std::hint::black_box;
use std::time::Instant;

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::integrators::{PhaseMethod, PhaseScheme, StepperMatrices, VariationalScheme};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTiming {
    pub name: &'static str,
    /// Fastest repetition, nanoseconds per step.
    pub best_ns: f64,
    /// Slowest repetition, nanoseconds per step.
    pub worst_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub steps: usize,
    pub repeats: usize,
    /// Factorization of `I + αL`, seconds.
    pub setup_secs: f64,
    /// Variational, Euler, RK4.
    pub kernels: [KernelTiming; 3],
}

impl BenchReport {
    pub fn variational_over_euler(&self) -> f64 {
        self.kernels[0].best_ns / self.kernels[1].best_ns
    }

    pub fn variational_over_rk4(&self) -> f64 {
        self.kernels[0].best_ns / self.kernels[2].best_ns
    }
}

fn timed(body: impl FnOnce()) -> f64 {
    let start = Instant::now();
    body();
    start.elapsed().as_secs_f64()
}

/// Times `steps` steps of each kernel from the scenario's initial state.
pub fn time_kernels(scenario: &Scenario, steps: usize, repeats: usize) -> Result<BenchReport> {
    if steps == 0 || repeats == 0 {
        return Err(Error::InvalidArgument(
            "bench needs at least one step and one repetition".into(),
        ));
    }
    let g = scenario.validate()?;
    let (h, dim) = (scenario.h, scenario.dim);
    let len = scenario.initial_positions.len();

    let start = Instant::now();
    let matrices = StepperMatrices::new(&g, h, scenario.variant)?;
    let setup_secs = start.elapsed().as_secs_f64();
    let mut vi = VariationalScheme::new(&g, dim, matrices);
    let mut euler = PhaseScheme::new(PhaseMethod::Euler, Dynamics::FORMATION, dim, len);
    let mut rk4 = PhaseScheme::new(PhaseMethod::Rk4, Dynamics::FORMATION, dim, len);

    let mut secs = [[f64::MAX, 0.0]; 3];
    let mut keep = |k: usize, t: f64| {
        secs[k][0] = f64::min(secs[k][0], t);
        secs[k][1] = f64::max(secs[k][1], t);
    };
    for _ in 0..repeats {
        keep(
            0,
            timed(|| {
                let mut prev = scenario.initial_positions.clone();
                let mut curr: Vec<f64> = prev
                    .iter()
                    .zip(&scenario.initial_velocities)
                    .map(|(q, v)| q + h * v)
                    .collect();
                let mut next = vec![0.0; len];
                for _ in 0..steps {
                    vi.step(&prev, &curr, &mut next);
                    std::mem::swap(&mut prev, &mut curr);
                    std::mem::swap(&mut curr, &mut next);
                }
                black_box(&curr);
            }),
        );
        for (k, scheme) in [(1, &mut euler), (2, &mut rk4)] {
            keep(
                k,
                timed(|| {
                    let mut q = scenario.initial_positions.clone();
                    let mut v = scenario.initial_velocities.clone();
                    for _ in 0..steps {
                        scheme.step(&g, h, &mut q, &mut v);
                    }
                    black_box((&q, &v));
                }),
            );
        }
    }

    let per_step = |k: usize, name| KernelTiming {
        name,
        best_ns: secs[k][0] / steps as f64 * 1e9,
        worst_ns: secs[k][1] / steps as f64 * 1e9,
    };
    Ok(BenchReport {
        steps,
        repeats,
        setup_secs,
        kernels: [
            per_step(0, "variational"),
            per_step(1, "euler"),
            per_step(2, "rk4"),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, PAPER_TRIANGLE_H005};

    #[test]
    fn report_shape() {
        let sc = preset(PAPER_TRIANGLE_H005).unwrap();
        let r = time_kernels(&sc, 100, 2).unwrap();
        assert_eq!(
            r.kernels.each_ref().map(|k| k.name),
            ["variational", "euler", "rk4"]
        );
        assert!(r
            .kernels
            .iter()
            .all(|k| k.best_ns > 0.0 && k.best_ns <= k.worst_ns));
        assert!(time_kernels(&sc, 0, 1).is_err());
    }
}
