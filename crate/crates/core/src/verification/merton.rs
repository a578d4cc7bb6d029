use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::forward::{l1_distance, solve_kfe};
use crate::grid::{GridFunction, SpaceTimeGrid};
use crate::problem::{validate_merton, ControlProblem};
use crate::sweep::SweepResult;

/// Closed-form Merton solution for power utility and zero interest rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MertonClosedForm {
    pub mu: f64,
    pub sigma: f64,
    pub q: f64,
    pub horizon: f64,
    pub x0: f64,
    /// Optimal fraction `mu / ((1 - q) sigma^2)`.
    pub c_star: f64,
    /// Volatility of optimal wealth, `mu / ((1 - q) sigma)`.
    pub big_sigma: f64,
    /// Growth rate of optimal wealth, `mu^2 / ((1 - q) sigma^2)`.
    pub m: f64,
    /// Optimal expected utility.
    pub j_star: f64,
}

pub fn merton_closed_form(mu: f64, sigma: f64, q: f64, horizon: f64, x0: f64) -> Result<MertonClosedForm> {
    validate_merton(mu, sigma, q, x0)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidProblem(format!("horizon must be positive, got {horizon}")));
    }
    let c_star = mu / ((1.0 - q) * sigma * sigma);
    let big_sigma = mu / ((1.0 - q) * sigma);
    let m = mu * mu / ((1.0 - q) * sigma * sigma);
    let j_star = x0.powf(q) / q * (q * mu * mu * horizon / (2.0 * (1.0 - q) * sigma * sigma)).exp();
    Ok(MertonClosedForm { mu, sigma, q, horizon, x0, c_star, big_sigma, m, j_star })
}

impl MertonClosedForm {
    /// Time factor of the multiplier, `h(T) = 1`.
    pub fn h(&self, t: f64) -> f64 {
        let (mu, sigma, q) = (self.mu, self.sigma, self.q);
        (q * mu * mu / (2.0 * (1.0 - q) * sigma * sigma) * (self.horizon - t)).exp()
    }

    /// `lambda(t, y) = h(t) y^q / q`.
    pub fn multiplier(&self, t: f64, y: f64) -> f64 {
        self.h(t) * y.powf(self.q) / self.q
    }

    /// Lognormal density of optimal wealth at time `t > 0`.
    pub fn density(&self, t: f64, y: f64) -> f64 {
        self.density_with_log_variance(t, y, 0.0)
    }

    /// Optimal wealth density when the log of initial wealth is itself
    /// Gaussian with variance `initial_log_variance` around `ln x0`.
    pub fn density_with_log_variance(&self, t: f64, y: f64, initial_log_variance: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let s2 = self.big_sigma * self.big_sigma;
        let var = s2 * t + initial_log_variance;
        let centre = self.x0.ln() + (self.m - 0.5 * s2) * t;
        let z = y.ln() - centre;
        (-0.5 * z * z / var).exp() / (y * (2.0 * PI * var).sqrt())
    }

    pub fn from_problem_parameters(params: &crate::problem::Parameters) -> Result<Self> {
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::InvalidProblem(format!("missing parameter `{k}`")))
        };
        let horizon = params
            .get("horizon")
            .or_else(|| params.get("T"))
            .copied()
            .ok_or_else(|| Error::InvalidProblem("missing parameter `horizon`".into()))?;
        merton_closed_form(get("mu")?, get("sigma")?, get("q")?, horizon, get("x0")?)
    }
}

/// Log-variance of the mollified initial delta on a log mesh.
pub fn mollifier_log_variance(grid: &SpaceTimeGrid, config: &SolverConfig) -> f64 {
    let s = config.delta_width_cells * grid.dxi();
    s * s
}

/// Errors of a numerical solution against the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MertonComparison {
    /// Max `|c - c*|` over the central half of the mesh and all times.
    pub c_star_error: f64,
    /// Max relative error of `lambda` over the central half and all times.
    pub lambda_error: f64,
    /// L1 error of the terminal density under the constant control `c*`.
    pub density_l1_error: f64,
    /// Relative error of the objective.
    pub objective_error: f64,
}

impl MertonClosedForm {
    pub fn control_error(&self, grid: &SpaceTimeGrid, control: &GridFunction) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..grid.n_t() {
            for i in grid.central_half() {
                worst = worst.max((control.get(n, i) - self.c_star).abs());
            }
        }
        worst
    }

    pub fn multiplier_error(&self, grid: &SpaceTimeGrid, multiplier: &GridFunction) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, &t) in grid.times().iter().enumerate() {
            for i in grid.central_half() {
                let exact = self.multiplier(t, grid.nodes()[i]);
                worst = worst.max((multiplier.get(n, i) / exact - 1.0).abs());
            }
        }
        worst
    }

    /// Forward-solves under `c ≡ c*` and returns the terminal L1 error
    /// against the lognormal density (mollifier variance included).
    pub fn density_error(&self, problem: &ControlProblem, grid: &SpaceTimeGrid, config: &SolverConfig) -> Result<f64> {
        let control = GridFunction::constant(grid, self.c_star);
        let forward = solve_kfe(problem, grid, &control, config)?;
        let last = grid.n_t() - 1;
        let s2 = if grid.log_space() { mollifier_log_variance(grid, config) } else { 0.0 };
        let exact: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&y| self.density_with_log_variance(grid.horizon(), y, s2))
            .collect();
        Ok(l1_distance(grid, forward.density.slice(last), &exact))
    }

    pub fn compare(
        &self,
        problem: &ControlProblem,
        grid: &SpaceTimeGrid,
        config: &SolverConfig,
        result: &SweepResult,
    ) -> Result<MertonComparison> {
        Ok(MertonComparison {
            c_star_error: self.control_error(grid, &result.control),
            lambda_error: self.multiplier_error(grid, &result.multiplier),
            density_l1_error: self.density_error(problem, grid, config)?,
            objective_error: (result.objective / self.j_star - 1.0).abs(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameters() {
        let cf = merton_closed_form(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        assert!((cf.c_star - 5.0).abs() < 1e-12);
        assert!((cf.j_star - 2.0 * 0.125f64.exp()).abs() < 1e-12);
        assert!((cf.j_star - 2.26630).abs() < 5e-6);
        assert!((cf.big_sigma - 1.0).abs() < 1e-12);
        assert!((cf.m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_exponent() {
        let cf = merton_closed_form(0.05, 0.3, -1.0, 1.0, 1.0).unwrap();
        assert!((cf.c_star - 0.05 / (2.0 * 0.09)).abs() < 1e-12);
        assert!((cf.c_star - 0.27778).abs() < 1e-5);
    }

    #[test]
    fn terminal_factor_is_one() {
        for (mu, sigma, q, t) in [(0.1, 0.2, 0.5, 1.0), (0.05, 0.3, -1.0, 3.0), (-0.02, 0.1, 0.9, 0.25)] {
            let cf = merton_closed_form(mu, sigma, q, t, 2.0).unwrap();
            assert_eq!(cf.h(t), 1.0);
        }
    }

    #[test]
    fn h_solves_its_ode() {
        let cf = merton_closed_form(0.08, 0.25, -2.0, 2.0, 1.0).unwrap();
        let rate = cf.q * cf.mu * cf.mu / (2.0 * (cf.q - 1.0) * cf.sigma * cf.sigma);
        for t in [0.0, 0.7, 1.9] {
            let e = 1e-5;
            let deriv = (cf.h(t + e) - cf.h(t - e)) / (2.0 * e);
            assert!((deriv - rate * cf.h(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn density_integrates_to_one_and_reproduces_objective() {
        let cf = merton_closed_form(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        // midpoint rule in log wealth
        let (lo, hi, n) = (-12.0_f64, 12.0_f64, 20_000);
        let h = (hi - lo) / n as f64;
        let (mut mass, mut utility) = (0.0, 0.0);
        for k in 0..n {
            let z = lo + (k as f64 + 0.5) * h;
            let y = z.exp();
            let p = cf.density(1.0, y) * y * h;
            mass += p;
            utility += p * y.powf(cf.q) / cf.q;
        }
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((utility - cf.j_star).abs() < 1e-9);
    }

    #[test]
    fn closed_form_satisfies_hamiltonian_condition() {
        // c* = -mu y lambda_y / (sigma^2 y^2 lambda_yy) for lambda = h y^q / q
        let cf = merton_closed_form(0.07, 0.3, -0.5, 1.0, 1.0).unwrap();
        for y in [0.5_f64, 1.0, 3.0] {
            let ly = cf.h(0.2) * y.powf(cf.q - 1.0);
            let lyy = cf.h(0.2) * (cf.q - 1.0) * y.powf(cf.q - 2.0);
            let c = -cf.mu * y * ly / (cf.sigma * cf.sigma * y * y * lyy);
            assert!((c - cf.c_star).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid() {
        assert!(merton_closed_form(0.1, 0.2, 1.0, 1.0, 1.0).is_err());
        assert!(merton_closed_form(0.1, 0.2, 0.0, 1.0, 1.0).is_err());
        assert!(merton_closed_form(0.1, 0.2, 0.5, -1.0, 1.0).is_err());
    }
}
