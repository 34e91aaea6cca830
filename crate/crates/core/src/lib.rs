//! Forced variational integration of distance-based formation control with
//! velocity consensus.
//!
//! Agents `q_i ∈ R^n` follow
//!
//! ```text
//! q̈ = -L̄ q̇ - ∇V(q),   V = Σ_{(i,j)∈E} ¼ (‖q_i - q_j‖² - d_ij²)²
//! ```
//!
//! where `L̄ = L ⊗ I_n` is the inflated graph Laplacian. The variational
//! integrator advances `(q_{k-1}, q_k) ↦ q_{k+1}` with one prefactored linear
//! solve per step; explicit Euler and RK4 are provided for comparison.

pub mod bench;
pub mod cli;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod graph;
pub mod integrators;
pub mod plot;
pub mod scenario;
pub mod verification;

pub use error::{Error, Result};
