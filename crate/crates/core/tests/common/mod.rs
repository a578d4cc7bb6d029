#![allow(dead_code)]

use varctrl_core::{Boundary, ControlBounds, ControlProblem, GridFunction, GridSpec, SpaceTimeGrid};

/// Smooth toy problem on `[-2, 2]` with control in `[-1, 1]`; the Hamiltonian
/// is strictly concave in `c` whenever `d2_lambda <= 0` or `kappa` dominates.
#[derive(Debug, Clone, Copy)]
pub struct Toy {
    pub drift0: f64,
    pub drift1: f64,
    pub vol0: f64,
    pub vol1: f64,
    pub kappa: f64,
    pub weight: f64,
    pub omega: f64,
}

impl Toy {
    pub fn problem(&self, scale: f64) -> ControlProblem {
        let Toy { drift0, drift1, vol0, vol1, kappa, weight, omega } = *self;
        ControlProblem::new(
            "toy",
            move |_, x, c| c * (1.0 + drift1 * x.sin()) + drift0,
            move |_, x, c| vol0 + vol1 * (c * x).cos().abs(),
            move |t, x, c| scale * (weight * (t + x).sin() - (c - kappa * x.sin()).powi(2)),
            move |x| scale * (omega * x).cos(),
            1.0,
            0.1,
            ControlBounds { lo: -1.0, hi: 1.0 },
        )
        .unwrap()
    }
}

pub fn toy_grid(n_t: usize, n_x: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::new(
        1.0,
        GridSpec { n_t, n_x, x_min: -2.0, x_max: 2.0, log_space: false, boundary: Boundary::Reflecting },
    )
    .unwrap()
}

pub fn wavy_control(grid: &SpaceTimeGrid, phase: f64) -> GridFunction {
    GridFunction::from_fn(grid, |t, x| 0.9 * (2.0 * x + 3.0 * t + phase).sin())
}

pub fn merton_grid(n: usize, x_min: f64, x_max: f64) -> SpaceTimeGrid {
    SpaceTimeGrid::new(
        1.0,
        GridSpec { n_t: n, n_x: n, x_min, x_max, log_space: true, boundary: Boundary::Reflecting },
    )
    .unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|<A phi, psi> - <phi, A^T psi>|` relative to the sum of term magnitudes.
pub fn duality_gap(grid: &SpaceTimeGrid, problem: &ControlProblem, control: &[f64], phi: &[f64], psi: &[f64]) -> f64 {
    let a = varctrl_core::assemble_generator(problem, grid, 0.3, control);
    let adj = varctrl_core::assemble_adjoint(problem, grid, 0.3, control);
    let a_phi = a.apply(phi);
    let adj_psi = adj.apply(psi);
    let lhs = dot(&a_phi, psi);
    let rhs = dot(phi, &adj_psi);
    let scale: f64 = a_phi.iter().zip(psi).map(|(x, y)| (x * y).abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    (lhs - rhs).abs() / scale
}
