//! Euler-Maruyama estimate of the objective under a gridded Markov control.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpaceTimeGrid};
use crate::problem::ControlProblem;

/// Sample mean of the simulated reward and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths used in the estimate (exploded paths excluded).
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Paths whose state or reward became non-finite.
    pub exploded: usize,
}

/// Bilinear interpolation of the control in `(t, xi)`, clamped to the mesh.
pub fn interpolate_control(grid: &SpaceTimeGrid, control: &GridFunction, t: f64, x: f64) -> f64 {
    let (tn, wt) = bracket(grid.times(), t);
    let xi = if grid.log_space() && x <= 0.0 { f64::NEG_INFINITY } else { grid.to_coord(x) };
    let (xn, wx) = bracket(grid.coords(), xi);
    let row = |n: usize| (1.0 - wx) * control.get(n, xn) + wx * control.get(n, (xn + 1).min(grid.n_x() - 1));
    (1.0 - wt) * row(tn) + wt * row((tn + 1).min(grid.n_t() - 1))
}

/// Lower index and fractional weight of `v` in the increasing `axis`.
fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
    let n = axis.len();
    if !(v > axis[0]) {
        return (0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 1, 0.0);
    }
    let k = axis.partition_point(|&a| a <= v) - 1;
    (k, (v - axis[k]) / (axis[k + 1] - axis[k]))
}

/// Simulates `n_paths` Euler-Maruyama paths of the controlled state with
/// `n_steps` steps and averages running plus terminal reward.
///
/// Path `k` draws its normals from a ChaCha8 stream keyed by `(seed, k)`, so
/// the estimate does not depend on how paths are spread across threads.
pub fn monte_carlo_objective(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &GridFunction,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if n_paths < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 paths, got {n_paths}")));
    }
    if n_steps < 1 {
        return Err(Error::InvalidConfig("need at least 1 time step".into()));
    }
    control.check_shape(grid)?;

    let horizon = problem.horizon();
    let dt = horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let x0 = problem.initial_state();

    let rewards: Vec<Option<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);
            let mut x = x0;
            let mut reward = 0.0;
            for k in 0..n_steps {
                let t = k as f64 * dt;
                let c = interpolate_control(grid, control, t, x);
                let z: f64 = StandardNormal.sample(&mut rng);
                reward += problem.running_reward(t, x, c) * dt;
                x += problem.drift(t, x, c) * dt + problem.diffusion(t, x, c) * sqrt_dt * z;
                if !x.is_finite() {
                    return None;
                }
            }
            let total = reward + problem.terminal_reward(x);
            total.is_finite().then_some(total)
        })
        .collect();

    let exploded = rewards.iter().filter(|r| r.is_none()).count();
    let kept: Vec<f64> = rewards.into_iter().flatten().collect();
    let n = kept.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("only {n} of {n_paths} paths stayed finite")));
    }
    let mean = kept.iter().sum::<f64>() / n as f64;
    let var = kept.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(MCEstimate { mean, std_error: (var / n as f64).sqrt(), n_paths: n, n_steps, seed, exploded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, GridSpec};
    use crate::problem::ControlBounds;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(
            1.0,
            GridSpec { n_t: 5, n_x: 7, x_min: 0.0, x_max: 3.0, log_space: false, boundary: Boundary::Reflecting },
        )
        .unwrap()
    }

    #[test]
    fn frozen_dynamics_are_exact() {
        let p = ControlProblem::new(
            "frozen",
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |x| x,
            1.0,
            1.3,
            ControlBounds { lo: 0.0, hi: 1.0 },
        )
        .unwrap();
        let g = grid();
        let est = monte_carlo_objective(&p, &g, &GridFunction::constant(&g, 0.5), 100, 10, 3).unwrap();
        assert!((est.mean - 1.3).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = ControlProblem::new(
            "bm",
            |_, _, c| c,
            |_, _, _| 0.5,
            |_, x, _| x,
            |x| x * x,
            1.0,
            1.0,
            ControlBounds { lo: 0.0, hi: 1.0 },
        )
        .unwrap();
        let g = grid();
        let c = GridFunction::from_fn(&g, |t, x| (0.3 * t + 0.2 * x).min(1.0));
        let a = monte_carlo_objective(&p, &g, &c, 2000, 20, 11).unwrap();
        let b = monte_carlo_objective(&p, &g, &c, 2000, 20, 11).unwrap();
        assert_eq!(a, b);
        let other = monte_carlo_objective(&p, &g, &c, 2000, 20, 12).unwrap();
        assert_ne!(a.mean, other.mean);
    }

    #[test]
    fn exploding_paths_are_counted() {
        let p = ControlProblem::new(
            "blowup",
            |_, x, _| x * x * 1e200,
            |_, _, _| 1.0,
            |_, _, _| 0.0,
            |x| x,
            1.0,
            1.0,
            ControlBounds { lo: 0.0, hi: 1.0 },
        )
        .unwrap();
        let g = grid();
        let r = monte_carlo_objective(&p, &g, &GridFunction::zeros(&g), 50, 10, 0);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn interpolation_is_bilinear_and_clamped() {
        let g = grid();
        let c = GridFunction::from_fn(&g, |t, x| 2.0 * t + x);
        assert!((interpolate_control(&g, &c, 0.3, 1.7) - 2.3).abs() < 1e-12);
        assert_eq!(interpolate_control(&g, &c, 0.0, -5.0), 0.0);
        assert_eq!(interpolate_control(&g, &c, 2.0, 9.0), 5.0);
    }

    #[test]
    fn rejects_too_few_paths() {
        let p = ControlProblem::new("z", |_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0, |x| x, 1.0, 1.0, ControlBounds { lo: 0.0, hi: 1.0 }).unwrap();
        let g = grid();
        assert!(monte_carlo_objective(&p, &g, &GridFunction::zeros(&g), 1, 10, 0).is_err());
    }
}
