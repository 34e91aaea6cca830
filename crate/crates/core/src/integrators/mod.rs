//! Time integrators for the formation model.
//!
//! The production path is the two-step variational scheme in
//! [`variational`]; explicit Euler and classical RK4 in [`phase`] act as the
//! baseline and the accuracy oracle.

use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;

pub mod phase;
pub mod run;
pub mod variational;

pub use phase::{euler_step, rk4_step, PhaseMethod, PhaseScheme, PhaseState};
pub use run::{run, run_with, PhasePropagator, Propagator, RunOptions, VariationalPropagator};
pub use variational::{
    bootstrap, bootstrap_second_order, discrete_el_residual, precompute_stepper, scheme_residual,
    vi_step, DiscretePair, StepperMatrices, VariationalScheme,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorKind {
    Variational,
    Euler,
    Rk4,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 3] = [Self::Variational, Self::Euler, Self::Rk4];

    pub fn name(self) -> &'static str {
        match self {
            Self::Variational => "variational",
            Self::Euler => "euler",
            Self::Rk4 => "rk4",
        }
    }
}

/// Coefficient choice for the variational update
/// `(I + αL̄) q_{k+1} = 2 q_k - (I - αL̄) q_{k-1} - β Γ(q_k)`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `α = h`, `β = h²/2`. Second-order accurate for `q̈ = -2L̄q̇ - ½∇V`.
    #[default]
    Paper,
    /// `α = h/2`, `β = h²`: central differences of the formation model.
    Consistent,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Paper => "paper",
            Self::Consistent => "consistent",
        }
    }

    /// `(α, β)` for step size `h`.
    pub fn coefficients(self, h: f64) -> (f64, f64) {
        match self {
            Self::Paper => (h, 0.5 * h * h),
            Self::Consistent => (0.5 * h, h * h),
        }
    }

    /// The continuous system this variant is a second-order discretization of.
    ///
    /// Taylor-expanding the update gives `h² q̈ + 2α h L̄ q̇ + β Γ = O(h⁴)`,
    /// so the damping gain is `2α/h` and the potential gain `β/h²`.
    pub fn modified_dynamics(self) -> Dynamics {
        match self {
            Self::Paper => Dynamics {
                damping: 2.0,
                potential: 0.5,
            },
            Self::Consistent => Dynamics::FORMATION,
        }
    }
}

/// How the variational scheme obtains `q_1` from `(q_0, v_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bootstrap {
    /// `q_1 = q_0 + h v_0`.
    #[default]
    FirstOrder,
    /// `q_1 = q_0 + h v_0 + ½ h² a_0` with `a_0` from the variant's modified
    /// dynamics; needed to observe second-order global convergence.
    SecondOrder,
}
