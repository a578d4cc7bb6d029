use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical settings shared by the PDE solvers, the sweep and the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm change of the control below which the sweep is converged.
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    /// Weight of the new control in the blend `d c_new + (1 - d) c_old`.
    pub damping: f64,
    /// Time-stepping weight: 1 is implicit Euler, 1/2 Crank-Nicolson.
    pub theta: f64,
    /// Standard deviation of the mollified initial delta, in mesh cells.
    pub delta_width_cells: f64,
    /// Allowed per-step mass drift for reflecting boundaries.
    pub mass_tol: f64,
    /// Relative tolerance on the control first-order condition.
    pub stationarity_tol: f64,
    /// Tolerance on the normalized first variations of the Lagrangian.
    pub variation_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sweep_tol: 1e-6,
            max_sweeps: 100,
            damping: 0.5,
            theta: 1.0,
            delta_width_cells: 2.0,
            mass_tol: 1e-8,
            stationarity_tol: 1e-5,
            variation_tol: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sweep_tol", self.sweep_tol),
            ("mass_tol", self.mass_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("variation_tol", self.variation_tol),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_sweeps < 1 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in [1/2, 1], got {}", self.theta)));
        }
        if !(self.delta_width_cells.is_finite() && self.delta_width_cells >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta_width_cells must be non-negative, got {}",
                self.delta_width_cells
            )));
        }
        Ok(())
    }
}
