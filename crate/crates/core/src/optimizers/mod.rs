//! The three KLD-based waveform design algorithms with their line searches,
//! penalty/barrier schedules and stopping rules.

mod kcop;
mod kiop;
mod krop;

pub use kcop::{run_kcop, KcopResult};
pub use kiop::{admm_z_subproblem, run_kiop, KiopResult, ZSubproblemOutcome};
pub use krop::{run_krop, KropResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radar::RadarError;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),
    #[error("barrier objective diverged (non-finite)")]
    BarrierDivergence,
    #[error(transparent)]
    Radar(#[from] RadarError),
}

/// Step floor below which a backtracking search gives up.
pub const ALPHA_MIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerParams {
    pub max_iter: usize,
    pub eps: f64,
    pub alpha0: f64,
    pub rho0: f64,
    /// Penalty growth factor (> 1).
    pub gamma: f64,
    /// Backtracking shrink factor in (0, 1).
    pub beta: f64,
    /// Armijo sufficient-increase constant in (0, 1).
    pub c: f64,
    /// Initial barrier parameter.
    pub mu0: f64,
    /// Barrier shrink factor in (0, 1).
    pub gamma_barrier: f64,
    /// ADMM coupling penalty.
    pub rho_admm: f64,
    /// Inner projected-gradient cap for the ADMM auxiliary subproblem.
    pub inner_max_iter: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            max_iter: 1000,
            eps: 1e-6,
            alpha0: 0.1,
            rho0: 1.0,
            gamma: 1.5,
            beta: 0.5,
            c: 1e-4,
            mu0: 1.0,
            gamma_barrier: 0.1,
            rho_admm: 1.0,
            inner_max_iter: 25,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.gamma <= 1.0 {
            return Err("gamma must exceed 1".into());
        }
        if !(0.0 < self.beta && self.beta < 1.0) {
            return Err("beta must lie in (0, 1)".into());
        }
        if !(0.0 < self.c && self.c < 1.0) {
            return Err("c must lie in (0, 1)".into());
        }
        if !(0.0 < self.gamma_barrier && self.gamma_barrier < 1.0) {
            return Err("gamma_barrier must lie in (0, 1)".into());
        }
        if self.rho_admm <= 0.0 {
            return Err("rho_admm must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Converged,
    MaxIter,
    LineSearchFailed,
    ResidualStagnation,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub penalty: f64,
    pub step: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_identity_residual: Option<f64>,
}

/// Per-run record: iterations, exit reason and the constraint margins at the
/// returned point. Content is bit-reproducible for identical inputs.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerTrace {
    pub technique: String,
    pub iterations: Vec<IterationRecord>,
    pub exit: ExitReason,
    pub final_kld_r: Vec<f64>,
    pub final_kld_c: Vec<f64>,
    /// KLD margins (value - bound), radar targets then UEs.
    pub constraint_margins: Vec<f64>,
}

impl OptimizerTrace {
    pub(crate) fn margins(kld_r: &[f64], a_t: &[f64], kld_c: &[f64], b_k: &[f64]) -> Vec<f64> {
        kld_r
            .iter()
            .zip(a_t)
            .map(|(v, a)| v - a)
            .chain(kld_c.iter().zip(b_k).map(|(v, b)| v - b))
            .collect()
    }
}
