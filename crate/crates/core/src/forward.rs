//! Kolmogorov forward (Fokker-Planck) solver for the controlled density.
//!
//! The unknown is the vector of nodal masses `m_i = w_i p_i`. One step over
//! `[t_n, t_{n+1}]` uses the control slice at `t_n` and solves
//!
//! ```text
//! (I - theta dt A_n^T) m^{n+1} = (I + (1 - theta) dt A_n^T) m^n
//! ```
//!
//! With `theta = 1` the matrix is an M-matrix, so masses stay non-negative,
//! and with reflecting boundaries `sum_i m_i` is conserved to round-off.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::generator::assemble_adjoint;
use crate::grid::{Boundary, GridFunction, SpaceTimeGrid};
use crate::problem::ControlProblem;

/// Density field returned by [`solve_kfe`] plus mass diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    /// Density `p(t, x)` with respect to `dx`.
    pub density: GridFunction,
    /// Largest `|mass(t_{n+1}) - mass(t_n)|` over all steps.
    pub max_step_mass_drift: f64,
    pub warnings: Vec<String>,
}

/// Nodal masses of the mollified delta at `x0`: a Gaussian bump in the mesh
/// coordinate with standard deviation `width_cells * dxi`, normalized to
/// unit mass. A zero width puts all mass on the nearest node.
pub fn initial_mass(grid: &SpaceTimeGrid, x0: f64, width_cells: f64) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let n = grid.n_x();
    if !(x0 > nodes[0] && x0 < nodes[n - 1]) {
        return Err(Error::InvalidGrid(format!(
            "initial state {x0} must lie strictly inside ({}, {})",
            nodes[0],
            nodes[n - 1]
        )));
    }
    let centre = grid.to_coord(x0);
    let coords = grid.coords();
    let nearest = (0..n)
        .min_by(|&a, &b| (coords[a] - centre).abs().total_cmp(&(coords[b] - centre).abs()))
        .expect("mesh has nodes");

    let sd = width_cells * grid.dxi();
    let mut mass = vec![0.0; n];
    if sd == 0.0 {
        mass[nearest] = 1.0;
        return Ok(mass);
    }
    // exponents shifted by the nearest node so narrow bumps do not underflow
    let d0 = (coords[nearest] - centre) / sd;
    for (i, m) in mass.iter_mut().enumerate() {
        let d = (coords[i] - centre) / sd;
        let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        *m = end * (-0.5 * (d * d - d0 * d0)).exp();
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    Ok(mass)
}

/// Density row of the mollified delta; see [`initial_mass`].
pub fn initial_delta(grid: &SpaceTimeGrid, x0: f64, width_cells: f64) -> Result<Vec<f64>> {
    Ok(mass_to_density(grid, &initial_mass(grid, x0, width_cells)?))
}

pub(crate) fn mass_to_density(grid: &SpaceTimeGrid, mass: &[f64]) -> Vec<f64> {
    mass.iter().zip(grid.weights()).map(|(m, w)| m / w).collect()
}

pub(crate) fn density_to_mass(grid: &SpaceTimeGrid, density: &[f64]) -> Vec<f64> {
    density.iter().zip(grid.weights()).map(|(p, w)| p * w).collect()
}

/// Solves the forward equation from the mollified delta at the problem's
/// initial state under the Markov control `control`.
pub fn solve_kfe(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    control: &GridFunction,
    config: &SolverConfig,
) -> Result<ForwardSolution> {
    config.validate()?;
    control.check_shape(grid)?;
    control.check_within(problem.bounds())?;

    let theta = config.theta;
    let dt = grid.dt();
    let mut density = GridFunction::zeros(grid);
    let mut mass = initial_mass(grid, problem.initial_state(), config.delta_width_cells)?;
    density.slice_mut(0).copy_from_slice(&mass_to_density(grid, &mass));

    let mut max_drift: f64 = 0.0;
    let mut warnings = Vec::new();
    let mut before: f64 = mass.iter().sum();
    for n in 0..grid.n_t() - 1 {
        let adjoint = assemble_adjoint(problem, grid, grid.times()[n], control.slice(n));
        let rhs = if theta < 1.0 {
            adjoint.apply_identity_plus((1.0 - theta) * dt, &mass)
        } else {
            mass
        };
        mass = adjoint
            .solve_identity_minus(theta * dt, &rhs)
            .map_err(|e| Error::SingularSystem { time_index: n + 1, row: e.0 })?;
        let after: f64 = mass.iter().sum();
        let drift = (after - before).abs();
        max_drift = max_drift.max(drift);
        if grid.boundary() == Boundary::Reflecting && drift > config.mass_tol {
            warnings.push(format!("mass drift {drift:.3e} at time index {} exceeds mass_tol", n + 1));
        }
        before = after;
        density.slice_mut(n + 1).copy_from_slice(&mass_to_density(grid, &mass));
    }

    Ok(ForwardSolution { density, max_step_mass_drift: max_drift, warnings })
}

/// L1 distance `int |u - v| dx` between two density slices.
pub fn l1_distance(grid: &SpaceTimeGrid, u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(grid.weights())
        .map(|((a, b), w)| (a - b).abs() * w)
        .sum()
}
