//! Forward-backward sweep for the optimality system.
//!
//! Each sweep walks backward from `lambda(T) = g`. At every time level it
//! takes one implicit backward step with the current control slice, then
//! replaces that slice by the damped Hamiltonian maximizer computed from the
//! step multiplier. The first sweep is undamped since the initial guess
//! carries no information. A frozen-control backward solve and a forward
//! solve then produce a consistent `(p, c, lambda)` triple for the record.

use serde::{Deserialize, Serialize};

use crate::backward::{backward_step, solve_adjoint_with_stages, terminal_slice};
use crate::config::SolverConfig;
use crate::control::{hamiltonian_sample, stationarity_residual, update_control_slice};
use crate::error::Result;
use crate::forward::{density_to_mass, solve_kfe};
use crate::grid::{GridFunction, SpaceTimeGrid};
use crate::problem::ControlProblem;

/// Diagnostics of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Sup-norm change of the control during the sweep.
    pub control_change: f64,
    pub objective: f64,
    /// Largest relative first-order residual over interior nodes.
    pub stationarity_residual: f64,
}

/// Converged (or last) iterate of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub control: GridFunction,
    pub multiplier: GridFunction,
    pub density: GridFunction,
    pub objective: f64,
    pub iterations: usize,
    pub history: Vec<SweepRecord>,
    pub converged: bool,
    /// Nodes where stationarity was enforced although the density is
    /// negligible (below 1e-12 of its slice maximum).
    pub tail_nodes: usize,
    pub warnings: Vec<String>,
}

/// One backward pass with interleaved control updates, in place.
///
/// Returns the sup-norm change of the control.
pub fn backward_update_pass(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &mut GridFunction,
    damping: f64,
    theta: f64,
) -> Result<f64> {
    let last = grid.n_t() - 1;
    let mut change: f64 = 0.0;
    let mut blend = |slice: &mut [f64], proposal: Vec<f64>| {
        for (c, new) in slice.iter_mut().zip(proposal) {
            let updated = damping * new + (1.0 - damping) * *c;
            change = change.max((updated - *c).abs());
            *c = updated;
        }
    };

    let mut next = terminal_slice(problem, grid);
    let proposal = update_control_slice(problem, grid, grid.times()[last], &next)?;
    blend(control.slice_mut(last), proposal);

    for k in (0..last).rev() {
        let t = grid.times()[k];
        let (stage, _) = backward_step(problem, grid, k, control.slice(k), &next, theta)?;
        let proposal = update_control_slice(problem, grid, t, &stage)?;
        blend(control.slice_mut(k), proposal);
        let (_, value) = backward_step(problem, grid, k, control.slice(k), &next, theta)?;
        next = value;
    }
    Ok(change)
}

/// Objective by quadrature: running reward with the time weights of the
/// forward scheme plus the terminal reward against the final density.
pub fn evaluate_objective(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    density: &GridFunction,
    control: &GridFunction,
    config: &SolverConfig,
) -> f64 {
    let theta = config.theta;
    let dt = grid.dt();
    let last = grid.n_t() - 1;
    let nodes = grid.nodes();
    let mut running = 0.0;
    for n in 0..last {
        let t = grid.times()[n];
        let now = density_to_mass(grid, density.slice(n));
        let later = density_to_mass(grid, density.slice(n + 1));
        for i in 0..grid.n_x() {
            let f = problem.running_reward(t, nodes[i], control.get(n, i));
            if f != 0.0 {
                running += dt * f * (theta * later[i] + (1.0 - theta) * now[i]);
            }
        }
    }
    let terminal: Vec<f64> = density
        .slice(last)
        .iter()
        .zip(nodes)
        .map(|(p, &x)| p * problem.terminal_reward(x))
        .collect();
    running + grid.integrate(&terminal)
}

/// Largest stationarity residual of `control` against the step multipliers.
pub fn max_stationarity_residual(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &GridFunction,
    stages: &GridFunction,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (n, &t) in grid.times().iter().enumerate() {
        let slice = stages.slice(n);
        for i in 0..grid.n_x() {
            let sample = hamiltonian_sample(grid, t, slice, i);
            if let Some(r) = stationarity_residual(problem, &sample, control.get(n, i)) {
                worst = worst.max(r);
            }
        }
    }
    worst
}

/// Runs sweeps until the control settles or `max_sweeps` is reached.
///
/// `c_init` defaults to the midpoint of the control bounds. Running out of
/// sweeps is not an error: the last iterate comes back with
/// `converged = false`.
pub fn forward_backward_sweep(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    config: &SolverConfig,
    c_init: Option<&GridFunction>,
) -> Result<SweepResult> {
    config.validate()?;
    let mut control = match c_init {
        Some(c) => {
            c.check_shape(grid)?;
            c.check_within(problem.bounds())?;
            c.clone()
        }
        None => GridFunction::constant(grid, problem.bounds().midpoint()),
    };

    let mut history = Vec::new();
    let mut converged = false;
    let mut state = None;
    for sweep in 0..config.max_sweeps {
        let damping = if sweep == 0 { 1.0 } else { config.damping };
        let change = backward_update_pass(problem, grid, &mut control, damping, config.theta)?;

        let adjoint = solve_adjoint_with_stages(problem, grid, &control, config)?;
        let forward = solve_kfe(problem, grid, &control, config)?;
        let objective = evaluate_objective(problem, grid, &forward.density, &control, config);
        let residual = max_stationarity_residual(problem, grid, &control, &adjoint.stages);
        history.push(SweepRecord { control_change: change, objective, stationarity_residual: residual });
        state = Some((adjoint, forward, objective));

        if change <= config.sweep_tol && residual <= config.stationarity_tol {
            converged = true;
            break;
        }
    }

    let (adjoint, forward, objective) = state.expect("max_sweeps >= 1");
    let tail_nodes = count_tail_nodes(grid, &forward.density);
    let mut warnings = forward.warnings;
    if !converged {
        warnings.push(format!("sweep did not converge within {} sweeps", config.max_sweeps));
    }
    Ok(SweepResult {
        control,
        multiplier: adjoint.multiplier,
        density: forward.density,
        objective,
        iterations: history.len(),
        history,
        converged,
        tail_nodes,
        warnings,
    })
}

fn count_tail_nodes(grid: &SpaceTimeGrid, density: &GridFunction) -> usize {
    (0..grid.n_t())
        .map(|n| {
            let slice = density.slice(n);
            let peak = slice.iter().fold(0.0_f64, |m, v| m.max(*v));
            slice.iter().filter(|&&p| p <= 1e-12 * peak).count()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, GridSpec};
    use crate::problem::{make_merton_problem, ControlBounds};

    fn merton_grid(n: usize, x_min: f64, x_max: f64) -> SpaceTimeGrid {
        SpaceTimeGrid::new(
            1.0,
            GridSpec { n_t: n, n_x: n, x_min, x_max, log_space: true, boundary: Boundary::Reflecting },
        )
        .unwrap()
    }

    #[test]
    fn flat_objective_lands_on_tie_break() {
        let p = ControlProblem::new(
            "flat",
            |_, x, c| 0.1 * c * x,
            |_, x, c| 0.2 * c * x,
            |_, _, _| 0.0,
            |_| 4.0,
            1.0,
            1.0,
            ControlBounds { lo: 0.0, hi: 10.0 },
        )
        .unwrap();
        let g = merton_grid(30, 0.2, 5.0);
        let r = forward_backward_sweep(&p, &g, &SolverConfig::default(), None).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2, "{}", r.iterations);
        assert!(r.control.values().iter().all(|&c| c == 0.0));
        assert!((r.objective - 4.0).abs() < 1e-8);
        assert_eq!(r.history.len(), r.iterations);
    }

    #[test]
    fn objective_of_unit_running_reward_is_horizon() {
        let p = ControlProblem::new(
            "clock",
            |_, _, c| c,
            |_, _, _| 1.0,
            |_, _, _| 1.0,
            |_| 0.0,
            2.5,
            0.0,
            ControlBounds { lo: -1.0, hi: 1.0 },
        )
        .unwrap();
        let g = SpaceTimeGrid::new(
            2.5,
            GridSpec { n_t: 26, n_x: 41, x_min: -3.0, x_max: 3.0, log_space: false, boundary: Boundary::Reflecting },
        )
        .unwrap();
        let c = GridFunction::from_fn(&g, |t, x| (t + x).sin());
        for theta in [1.0, 0.5] {
            let cfg = SolverConfig { theta, ..SolverConfig::default() };
            let fwd = solve_kfe(&p, &g, &c, &cfg).unwrap();
            assert!((evaluate_objective(&p, &g, &fwd.density, &c, &cfg) - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn terminal_only_objective_is_mass() {
        let p = make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        let p = ControlProblem::new("unit", move |t, x, c| p.drift(t, x, c), |_, x, c| 0.2 * c * x, |_, _, _| 0.0, |_| 1.0, 1.0, 1.0, ControlBounds { lo: 0.0, hi: 10.0 }).unwrap();
        let g = merton_grid(40, 0.2, 5.0);
        let c = GridFunction::constant(&g, 5.0);
        let cfg = SolverConfig::default();
        let fwd = solve_kfe(&p, &g, &c, &cfg).unwrap();
        assert!((evaluate_objective(&p, &g, &fwd.density, &c, &cfg) - 1.0).abs() < cfg.mass_tol);
    }

    #[test]
    fn merton_sweep_finds_closed_form_fraction() {
        let p = make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        // wide enough that the reflecting ends do not reach the central half
        let g = merton_grid(161, 1e-5, 1e5);
        let c0 = GridFunction::zeros(&g);
        let r = forward_backward_sweep(&p, &g, &SolverConfig::default(), Some(&c0)).unwrap();
        assert!(r.converged, "{:?}", r.history.last());
        let last = r.history.last().unwrap();
        assert!(last.control_change <= 1e-6);
        for n in 0..g.n_t() {
            for i in g.central_half() {
                assert!((r.control.get(n, i) - 5.0).abs() < 0.05, "({n}, {i}): {}", r.control.get(n, i));
            }
        }
        // the mollified start has log-variance s2, which scales E[X^q] by exp(q^2 s2 / 2)
        let s2 = crate::verification::merton::mollifier_log_variance(&g, &SolverConfig::default());
        let j_star = 2.0 * 0.125f64.exp() * (0.125 * s2).exp();
        assert!((r.objective / j_star - 1.0).abs() < 0.01, "{}", r.objective);
    }

    #[test]
    fn fixed_point_and_determinism() {
        let p = make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        let g = merton_grid(61, 1e-2, 1e2);
        let cfg = SolverConfig::default();
        let a = forward_backward_sweep(&p, &g, &cfg, None).unwrap();
        let b = forward_backward_sweep(&p, &g, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        let mut again = a.control.clone();
        let change = backward_update_pass(&p, &g, &mut again, cfg.damping, cfg.theta).unwrap();
        assert!(change <= cfg.sweep_tol, "{change}");
    }
}
