//! Backward solver for the multiplier `lambda`:
//! `0 = f_c + (d/dt + A_c) lambda`, `lambda(T, .) = g`.
//!
//! The step from `t_{k+1}` to `t_k` uses the generator and running reward
//! at the control slice `c^k` and is the exact transpose of the forward step
//! over the same interval. It is split into an implicit stage
//!
//! ```text
//! (I - theta dt A_k) ell^k = lambda^{k+1} + theta dt f^k
//! lambda^k = ell^k + (1 - theta) dt (A_k ell^k + f^k)
//! ```
//!
//! `ell^k` is the multiplier paired with the forward step in the discrete
//! Lagrangian; for `theta = 1` it coincides with `lambda^k`.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::generator::assemble_generator;
use crate::grid::{GridFunction, SpaceTimeGrid};
use crate::problem::ControlProblem;

/// One backward step; returns `(ell^k, lambda^k)`.
pub(crate) fn backward_step(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    k: usize,
    control: &[f64],
    next: &[f64],
    theta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = grid.times()[k];
    let dt = grid.dt();
    let generator = assemble_generator(problem, grid, t, control);
    let reward: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(control)
        .map(|(&x, &c)| problem.running_reward(t, x, c))
        .collect();
    let rhs: Vec<f64> = next.iter().zip(&reward).map(|(l, f)| l + theta * dt * f).collect();
    let stage = generator
        .solve_identity_minus(theta * dt, &rhs)
        .map_err(|e| Error::SingularSystem { time_index: k, row: e.0 })?;
    if theta >= 1.0 {
        return Ok((stage.clone(), stage));
    }
    let applied = generator.apply(&stage);
    let value = stage
        .iter()
        .zip(&applied)
        .zip(&reward)
        .map(|((s, a), f)| s + (1.0 - theta) * dt * (a + f))
        .collect();
    Ok((stage, value))
}

/// Terminal slice `g` sampled on the nodes.
pub(crate) fn terminal_slice(problem: &ControlProblem, grid: &SpaceTimeGrid) -> Vec<f64> {
    grid.nodes().iter().map(|&x| problem.terminal_reward(x)).collect()
}

/// `lambda` together with the per-step multipliers `ell`.
///
/// Row `k < n_t - 1` of `stages` holds `ell^k`; the last row repeats `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    pub multiplier: GridFunction,
    pub stages: GridFunction,
}

/// Solves the backward equation for `lambda` under a frozen control.
pub fn solve_adjoint(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &GridFunction,
    config: &SolverConfig,
) -> Result<GridFunction> {
    Ok(solve_adjoint_with_stages(problem, grid, control, config)?.multiplier)
}

/// As [`solve_adjoint`], also returning the implicit-stage multipliers.
pub fn solve_adjoint_with_stages(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &GridFunction,
    config: &SolverConfig,
) -> Result<AdjointSolution> {
    config.validate()?;
    control.check_shape(grid)?;
    control.check_within(problem.bounds())?;

    let last = grid.n_t() - 1;
    let mut multiplier = GridFunction::zeros(grid);
    let mut stages = GridFunction::zeros(grid);
    let terminal = terminal_slice(problem, grid);
    multiplier.slice_mut(last).copy_from_slice(&terminal);
    stages.slice_mut(last).copy_from_slice(&terminal);

    for k in (0..last).rev() {
        let (stage, value) =
            backward_step(problem, grid, k, control.slice(k), multiplier.slice(k + 1), config.theta)?;
        stages.slice_mut(k).copy_from_slice(&stage);
        multiplier.slice_mut(k).copy_from_slice(&value);
    }
    Ok(AdjointSolution { multiplier, stages })
}
