//! Shape reconstruction by distributed shape-gradient descent.
//!
//! Each iteration solves the complex state and its adjoint, assembles the
//! per-vertex gradient of `J + ρ·|Ω₀|`, computes a Sobolev descent field and
//! moves the interior vertices by backtracking.

mod driver;
mod gradient;
mod init;
mod output;
mod riesz;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use driver::{line_search, reconstruct, IterationRecord, LineSearchOutcome, Reconstruction, Termination};
pub use gradient::{
    balance_rho, objective, shape_derivative, shape_gradient, volume_gradient, ObjectiveReport, ShapeGradient,
};
pub use init::{init_guess_from_profile, InitialGuess};
pub use output::{write_history, write_reconstruction, Summary};
pub use riesz::{riesz_descent_field, riesz_energy, riesz_matrix};

/// How the volume weight `ρ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum RhoMode {
    Fixed(f64),
    /// Recompute `ρ = (β − 1) J / |Ω₀|` once per iteration.
    Balancing(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Weight of the `H¹` part of the Riesz form, in `(0, 1]`.
    pub c_b: f64,
    /// Step scale of the first trial step.
    pub s: f64,
    pub k_max: usize,
    pub rho_mode: RhoMode,
    pub t_min: f64,
    /// Remesh after this many accepted steps; `0` disables periodic remeshing.
    pub remesh_every: usize,
    /// Remesh early when the minimum cell quality drops below this value.
    pub remesh_quality: f64,
    /// Stop when the combined cost decreases by less than this relative amount
    /// over `stagnation_window` iterations.
    pub stagnation_tol: f64,
    pub stagnation_window: usize,
    /// Minimum distance between the inclusion and `∂Ω`.
    pub clearance: f64,
    pub noise_seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            c_b: 0.5,
            s: 1e6,
            k_max: 200,
            rho_mode: RhoMode::Fixed(0.0),
            t_min: 1e-8,
            remesh_every: 10,
            remesh_quality: crate::mesh::REMESH_QUALITY_THRESHOLD,
            stagnation_tol: 1e-6,
            stagnation_window: 5,
            clearance: crate::mesh::DEFAULT_CLEARANCE,
            noise_seed: 0,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_b > 0.0 && self.c_b <= 1.0) {
            return Err(Error::invalid(format!("c_b must lie in (0, 1], got {}", self.c_b)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("step scale must be positive, got {}", self.s)));
        }
        if !(self.t_min > 0.0) {
            return Err(Error::invalid("t_min must be positive"));
        }
        if self.stagnation_window == 0 {
            return Err(Error::invalid("stagnation window must be at least 1"));
        }
        match self.rho_mode {
            RhoMode::Fixed(r) if !(r >= 0.0 && r.is_finite()) => {
                Err(Error::invalid(format!("rho must be non-negative, got {r}")))
            }
            RhoMode::Balancing(b) if !(b > 1.0 && b.is_finite()) => {
                Err(Error::invalid(format!("beta must exceed 1, got {b}")))
            }
            _ => Ok(()),
        }
    }
}
