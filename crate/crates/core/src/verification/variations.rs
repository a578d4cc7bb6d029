//! Finite-difference check of the first variations of the discrete Lagrangian.
//!
//! In nodal masses `m^n = w p^n` the discrete Lagrangian is
//!
//! ```text
//! L = sum_n dt f^n . (theta m^{n+1} + (1 - theta) m^n) + g . m^N
//!   + sum_n ell^n . [ (I + (1 - theta) dt A_n^T) m^n - (I - theta dt A_n^T) m^{n+1} ]
//!   + mu . (m^0 - delta)
//! ```
//!
//! with `A_n` and `f^n` built from the control slice `c^n`. Its critical
//! points are exactly the fixed points of the forward and backward solvers
//! plus the discrete stationarity of `f + A_c ell` in `c`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::backward::{backward_step, terminal_slice};
use crate::config::SolverConfig;
use crate::error::Result;
use crate::forward::{density_to_mass, initial_delta, initial_mass, l1_distance};
use crate::generator::assemble_generator;
use crate::grid::{GridFunction, SpaceTimeGrid};
use crate::problem::ControlProblem;
use crate::sweep::SweepResult;
use crate::tridiag::TridiagonalOperator;

/// Step multipliers `ell^k` paired with each forward step, recomputed from
/// `lambda`. The last row holds `g`.
pub fn step_multipliers(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &GridFunction,
    lambda: &GridFunction,
    theta: f64,
) -> Result<GridFunction> {
    control.check_shape(grid)?;
    lambda.check_shape(grid)?;
    let last = grid.n_t() - 1;
    let mut stages = GridFunction::zeros(grid);
    stages.slice_mut(last).copy_from_slice(&terminal_slice(problem, grid));
    for k in 0..last {
        let (stage, _) = backward_step(problem, grid, k, control.slice(k), lambda.slice(k + 1), theta)?;
        stages.slice_mut(k).copy_from_slice(&stage);
    }
    Ok(stages)
}

/// The discrete Lagrangian of one problem on one grid.
pub struct DiscreteLagrangian<'a> {
    problem: &'a ControlProblem,
    grid: &'a SpaceTimeGrid,
    theta: f64,
    delta: Vec<f64>,
}

impl<'a> DiscreteLagrangian<'a> {
    pub fn new(problem: &'a ControlProblem, grid: &'a SpaceTimeGrid, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let delta = initial_mass(grid, problem.initial_state(), config.delta_width_cells)?;
        Ok(Self { problem, grid, theta: config.theta, delta })
    }

    fn masses(&self, p: &GridFunction) -> Vec<Vec<f64>> {
        (0..self.grid.n_t()).map(|n| density_to_mass(self.grid, p.slice(n))).collect()
    }

    fn step(&self, n: usize, c: &GridFunction) -> (TridiagonalOperator, Vec<f64>) {
        let t = self.grid.times()[n];
        let op = assemble_generator(self.problem, self.grid, t, c.slice(n));
        let f = self
            .grid
            .nodes()
            .iter()
            .zip(c.slice(n))
            .map(|(&x, &cv)| self.problem.running_reward(t, x, cv))
            .collect();
        (op, f)
    }

    /// `L` in its constrained form. `p` is a density, `mu` pairs with masses.
    pub fn constrained_form(&self, p: &GridFunction, c: &GridFunction, ell: &GridFunction, mu: &[f64]) -> f64 {
        let (theta, dt) = (self.theta, self.grid.dt());
        let m = self.masses(p);
        let last = self.grid.n_t() - 1;
        let mut total = 0.0;
        for n in 0..last {
            let (op, f) = self.step(n, c);
            let adj = op.transpose();
            let now = adj.apply_identity_plus((1.0 - theta) * dt, &m[n]);
            let later = adj.apply_identity_plus(-theta * dt, &m[n + 1]);
            for i in 0..self.grid.n_x() {
                total += dt * f[i] * (theta * m[n + 1][i] + (1.0 - theta) * m[n][i]);
                total += ell.get(n, i) * (now[i] - later[i]);
            }
        }
        total += dot(&terminal_slice(self.problem, self.grid), &m[last]);
        let residual: Vec<f64> = m[0].iter().zip(&self.delta).map(|(a, b)| a - b).collect();
        total + dot(mu, &residual)
    }

    /// `L` after moving every operator onto the multipliers:
    /// `sum_k m^k . G^k - mu . delta`.
    pub fn integrated_form(&self, p: &GridFunction, c: &GridFunction, ell: &GridFunction, mu: &[f64]) -> f64 {
        let (theta, dt) = (self.theta, self.grid.dt());
        let m = self.masses(p);
        let last = self.grid.n_t() - 1;
        let n_x = self.grid.n_x();
        let mut weights: Vec<Vec<f64>> = vec![vec![0.0; n_x]; last + 1];
        for n in 0..last {
            let (op, f) = self.step(n, c);
            let l = ell.slice(n);
            let forward = op.apply_identity_plus((1.0 - theta) * dt, l);
            let backward = op.apply_identity_plus(-theta * dt, l);
            for i in 0..n_x {
                weights[n][i] += (1.0 - theta) * dt * f[i] + forward[i];
                weights[n + 1][i] += theta * dt * f[i] - backward[i];
            }
        }
        for (w, g) in weights[last].iter_mut().zip(terminal_slice(self.problem, self.grid)) {
            *w += g;
        }
        for (w, u) in weights[0].iter_mut().zip(mu) {
            *w += u;
        }
        let paired: f64 = m.iter().zip(&weights).map(|(a, b)| dot(a, b)).sum();
        paired - dot(mu, &self.delta)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest normalized first-variation residual in each slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub p_direction: f64,
    pub c_direction: f64,
    pub lambda_direction: f64,
    pub mu_direction: f64,
    /// `L` at the candidate, the normalizer.
    pub lagrangian: f64,
    /// L1 distance between `p(0)` and the mollified delta.
    pub initial_l1: f64,
    pub n_random: usize,
}

impl VariationReport {
    /// Residuals in the order p, c, lambda, mu.
    pub fn as_array(&self) -> [f64; 4] {
        [self.p_direction, self.c_direction, self.lambda_direction, self.mu_direction]
    }

    pub fn max_residual(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

const FD_STEP: f64 = 1e-4;

/// Random smooth field, sup norm 1: a combination of products of three time
/// modes and three cosine modes in the node index. With `pinned_start` the
/// time modes vanish at `t = 0`.
fn smooth_field(grid: &SpaceTimeGrid, rng: &mut ChaCha8Rng, pinned_start: bool) -> GridFunction {
    let coef: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let horizon = grid.horizon();
    let last = (grid.n_x() - 1) as f64;
    let mut field = GridFunction::zeros(grid);
    for (n, &t) in grid.times().iter().enumerate() {
        let s = t / horizon;
        let time_mode = |j: usize| {
            if pinned_start {
                ((2 * j + 1) as f64 * 0.5 * PI * s).sin()
            } else {
                (j as f64 * PI * s).cos()
            }
        };
        for i in 0..grid.n_x() {
            let r = i as f64 / last;
            let mut v = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    v += coef[3 * j + k] * time_mode(j) * (k as f64 * PI * r).cos();
                }
            }
            field.set(n, i, v);
        }
    }
    let sup = field.sup_norm();
    if sup > 0.0 {
        field.values_mut().iter_mut().for_each(|v| *v /= sup);
    }
    field
}

fn shifted(base: &GridFunction, dir: &GridFunction, eps: f64) -> GridFunction {
    let mut out = base.clone();
    out.values_mut().iter_mut().zip(dir.values()).for_each(|(a, d)| *a += eps * d);
    out
}

/// Central difference of `L` along each random direction, normalized by
/// `|L|`, maximized over `n_random` seeded draws.
///
/// Perturbations of `p` vanish at `t = 0`. Control perturbations are
/// zeroed where the control sits on a bound, since only one-sided
/// variations are admissible there. `mu` is taken to be zero: it is fixed
/// by the `p` condition at `t = 0`, which is excluded here.
pub fn check_first_variations(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    candidate: &SweepResult,
    config: &SolverConfig,
    n_random: usize,
    seed: u64,
) -> Result<VariationReport> {
    let lagr = DiscreteLagrangian::new(problem, grid, config)?;
    let p = &candidate.density;
    let c = &candidate.control;
    p.check_shape(grid)?;
    c.check_shape(grid)?;
    let ell = step_multipliers(problem, grid, c, &candidate.multiplier, config.theta)?;
    let mu = vec![0.0; grid.n_x()];
    let base = lagr.constrained_form(p, c, &ell, &mu);
    let scale = base.abs().max(f64::MIN_POSITIVE);

    let bounds = problem.bounds();
    let edge = 1e-9 * bounds.width();
    let free: Vec<bool> = c.values().iter().map(|&v| v > bounds.lo + edge && v < bounds.hi - edge).collect();
    let p_scale = p.sup_norm().max(f64::MIN_POSITIVE);
    let l_scale = candidate.multiplier.sup_norm().max(f64::MIN_POSITIVE);

    let fd = |plus: f64, minus: f64| ((plus - minus) / (2.0 * FD_STEP)).abs() / scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VariationReport {
        p_direction: 0.0,
        c_direction: 0.0,
        lambda_direction: 0.0,
        mu_direction: 0.0,
        lagrangian: base,
        initial_l1: l1_distance(grid, p.slice(0), &initial_delta(grid, problem.initial_state(), config.delta_width_cells)?),
        n_random,
    };
    for _ in 0..n_random {
        let mut q = smooth_field(grid, &mut rng, true);
        q.values_mut().iter_mut().for_each(|v| *v *= p_scale);
        let r = fd(
            lagr.constrained_form(&shifted(p, &q, FD_STEP), c, &ell, &mu),
            lagr.constrained_form(&shifted(p, &q, -FD_STEP), c, &ell, &mu),
        );
        report.p_direction = report.p_direction.max(r);

        let mut gamma = smooth_field(grid, &mut rng, false);
        gamma.values_mut().iter_mut().zip(&free).for_each(|(v, &f)| if !f { *v = 0.0 });
        let r = fd(
            lagr.constrained_form(p, &shifted(c, &gamma, FD_STEP), &ell, &mu),
            lagr.constrained_form(p, &shifted(c, &gamma, -FD_STEP), &ell, &mu),
        );
        report.c_direction = report.c_direction.max(r);

        let mut nu = smooth_field(grid, &mut rng, false);
        nu.values_mut().iter_mut().for_each(|v| *v *= l_scale);
        let r = fd(
            lagr.constrained_form(p, c, &shifted(&ell, &nu, FD_STEP), &mu),
            lagr.constrained_form(p, c, &shifted(&ell, &nu, -FD_STEP), &mu),
        );
        report.lambda_direction = report.lambda_direction.max(r);

        let pi = smooth_field(grid, &mut rng, false);
        let row: Vec<f64> = pi.slice(0).iter().map(|v| v * l_scale).collect();
        let plus: Vec<f64> = row.iter().map(|v| FD_STEP * v).collect();
        let minus: Vec<f64> = row.iter().map(|v| -FD_STEP * v).collect();
        let r = fd(lagr.constrained_form(p, c, &ell, &plus), lagr.constrained_form(p, c, &ell, &minus));
        report.mu_direction = report.mu_direction.max(r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, GridSpec};
    use crate::problem::{make_merton_problem, ControlBounds};
    use crate::sweep::forward_backward_sweep;

    fn toy() -> (ControlProblem, SpaceTimeGrid) {
        let p = ControlProblem::new(
            "toy",
            |t, x, c| c * (1.0 + 0.3 * x.sin()) - 0.2 * t,
            |_, x, c| 0.4 + 0.3 * c * c + 0.1 * x.cos(),
            |t, x, c| -(c - x).powi(2) + t,
            |x| (x * 0.7).cos(),
            1.0,
            0.1,
            ControlBounds { lo: -1.0, hi: 1.0 },
        )
        .unwrap();
        let g = SpaceTimeGrid::new(
            1.0,
            GridSpec { n_t: 25, n_x: 31, x_min: -2.0, x_max: 2.0, log_space: false, boundary: Boundary::Reflecting },
        )
        .unwrap();
        (p, g)
    }

    #[test]
    fn both_forms_agree() {
        let (p, g) = toy();
        for theta in [1.0, 0.5] {
            let cfg = SolverConfig { theta, ..SolverConfig::default() };
            let lagr = DiscreteLagrangian::new(&p, &g, &cfg).unwrap();
            let dens = GridFunction::from_fn(&g, |t, x| 1.0 + 0.5 * (t * 3.0 + x).sin());
            let c = GridFunction::from_fn(&g, |t, x| 0.8 * (x - t).cos());
            let ell = GridFunction::from_fn(&g, |t, x| x * x - t);
            let mu: Vec<f64> = g.nodes().iter().map(|x| 0.3 * x).collect();
            let a = lagr.constrained_form(&dens, &c, &ell, &mu);
            let b = lagr.integrated_form(&dens, &c, &ell, &mu);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "theta {theta}: {a} vs {b}");
        }
    }

    #[test]
    fn lagrangian_equals_objective_on_feasible_points() {
        let (p, g) = toy();
        let cfg = SolverConfig { theta: 0.5, ..SolverConfig::default() };
        let c = GridFunction::from_fn(&g, |t, x| 0.5 * (x + t).sin());
        let fwd = crate::forward::solve_kfe(&p, &g, &c, &cfg).unwrap();
        let lagr = DiscreteLagrangian::new(&p, &g, &cfg).unwrap();
        let ell = GridFunction::from_fn(&g, |t, x| (x * t).cos());
        let l = lagr.constrained_form(&fwd.density, &c, &ell, &vec![1.0; g.n_x()]);
        let j = crate::sweep::evaluate_objective(&p, &g, &fwd.density, &c, &cfg);
        assert!((l - j).abs() < 1e-12, "{l} vs {j}");
    }

    #[test]
    fn sweep_is_a_critical_point() {
        let (p, g) = toy();
        for theta in [1.0, 0.5] {
            let cfg = SolverConfig { theta, sweep_tol: 1e-10, max_sweeps: 300, ..SolverConfig::default() };
            let r = forward_backward_sweep(&p, &g, &cfg, None).unwrap();
            let rep = check_first_variations(&p, &g, &r, &cfg, 5, 1).unwrap();
            assert!(rep.max_residual() < 1e-6, "theta {theta}: {rep:?}");
            assert!(rep.initial_l1 < 1e-12);
        }
    }

    #[test]
    fn shifted_control_is_detected() {
        let p = make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        let g = SpaceTimeGrid::new(
            1.0,
            GridSpec { n_t: 41, n_x: 61, x_min: 1e-2, x_max: 1e2, log_space: true, boundary: Boundary::Reflecting },
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let mut r = forward_backward_sweep(&p, &g, &cfg, Some(&GridFunction::zeros(&g))).unwrap();
        let good = check_first_variations(&p, &g, &r, &cfg, 4, 9).unwrap();
        r.control.values_mut().iter_mut().for_each(|c| *c += 1.0);
        let bad = check_first_variations(&p, &g, &r, &cfg, 4, 9).unwrap();
        assert!(good.c_direction < 1e-4, "{good:?}");
        assert!(bad.c_direction > 10.0 * good.c_direction, "{bad:?} vs {good:?}");
    }

    #[test]
    fn zero_step_gives_zero_derivative() {
        let (p, g) = toy();
        let cfg = SolverConfig::default();
        let lagr = DiscreteLagrangian::new(&p, &g, &cfg).unwrap();
        let dens = GridFunction::constant(&g, 0.25);
        let c = GridFunction::constant(&g, 0.1);
        let ell = GridFunction::constant(&g, 2.0);
        let mu = vec![0.0; g.n_x()];
        let zero = GridFunction::zeros(&g);
        let base = lagr.constrained_form(&dens, &c, &ell, &mu);
        assert_eq!(lagr.constrained_form(&shifted(&dens, &zero, FD_STEP), &c, &ell, &mu), base);
        assert_eq!(lagr.constrained_form(&dens, &shifted(&c, &zero, FD_STEP), &ell, &mu), base);
        assert_eq!(lagr.constrained_form(&dens, &c, &shifted(&ell, &zero, FD_STEP), &mu), base);
    }
}
