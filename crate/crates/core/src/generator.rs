//! Discrete generator `A_c = b_c d/dx + 1/2 a_c^2 d^2/dx^2` and its adjoint.
//!
//! The generator is assembled in the mesh coordinate `xi` (`x` or `ln x`).
//! With `xi = ln x` the chain rule turns it into
//! `(b/x - a^2/(2x^2)) d/dxi + a^2/(2x^2) d^2/dxi^2`.
//!
//! Second derivatives are central. The first-order term is central while the
//! cell Peclet number `|beta| dxi / D` is at most 2; above that the diffusion
//! is raised to `|beta| dxi / 2`, which zeroes the upstream off-diagonal and
//! leaves a one-sided (upwind) drift stencil. Off-diagonals are therefore
//! always non-negative and the coefficients stay continuous in the control.
//!
//! The adjoint is the literal transpose and acts on nodal masses
//! `m_i = w_i p_i` (see [`crate::grid`]), so `<A phi, m> = <phi, A^T m>`
//! holds to round-off and reflecting boundaries conserve `sum_i m_i`.

use crate::grid::{Boundary, SpaceTimeGrid};
use crate::problem::ControlProblem;
use crate::tridiag::TridiagonalOperator;

/// Drift and diffusion of the generator in the mesh coordinate at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshCoefficients {
    /// First-order coefficient `beta`.
    pub drift: f64,
    /// Second-order coefficient `D = a^2 / 2` (per unit `xi^2`).
    pub diffusion: f64,
}

/// Generator coefficients in the mesh coordinate at `(t, x)` under control `c`.
#[inline]
pub fn mesh_coefficients(problem: &ControlProblem, log_space: bool, t: f64, x: f64, c: f64) -> MeshCoefficients {
    let b = problem.drift(t, x, c);
    let a = problem.diffusion(t, x, c);
    if log_space {
        let d = 0.5 * a * a / (x * x);
        MeshCoefficients { drift: b / x - d, diffusion: d }
    } else {
        MeshCoefficients { drift: b, diffusion: 0.5 * a * a }
    }
}

/// Off-diagonal weights `(lower, upper)` of the monotone stencil.
#[inline]
pub(crate) fn stencil_weights(coef: MeshCoefficients, dxi: f64) -> (f64, f64) {
    let diffusion = coef.diffusion.max(0.5 * coef.drift.abs() * dxi);
    let second = diffusion / (dxi * dxi);
    let first = coef.drift / (2.0 * dxi);
    ((second - first).max(0.0), (second + first).max(0.0))
}

/// Discrete generator at time `t` for the control slice `control`.
///
/// Reflecting boundaries use a mirrored ghost node (zero derivative);
/// absorbing boundaries decouple the end nodes, which is the killed process.
/// Bounds on the control are not checked here.
pub fn assemble_generator(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    t: f64,
    control: &[f64],
) -> TridiagonalOperator {
    let n = grid.n_x();
    assert_eq!(control.len(), n, "control slice has the wrong length");
    let dxi = grid.dxi();
    let nodes = grid.nodes();
    let mut op = TridiagonalOperator::zeros(n);

    for i in 0..n {
        let coef = mesh_coefficients(problem, grid.log_space(), t, nodes[i], control[i]);
        let (lo, up) = stencil_weights(coef, dxi);
        if i == 0 || i == n - 1 {
            if grid.boundary() == Boundary::Reflecting {
                let w = lo + up;
                if i == 0 {
                    op.upper[0] = w;
                } else {
                    op.lower[n - 1] = w;
                }
                op.diag[i] = -w;
            }
            continue;
        }
        op.lower[i] = lo;
        op.upper[i] = up;
        op.diag[i] = -(lo + up);
    }

    if grid.boundary() == Boundary::Absorbing {
        op.lower[1] = 0.0;
        op.upper[n - 2] = 0.0;
    }
    op
}

/// Discrete adjoint generator: the exact transpose of [`assemble_generator`],
/// acting on nodal masses.
pub fn assemble_adjoint(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    t: f64,
    control: &[f64],
) -> TridiagonalOperator {
    assemble_generator(problem, grid, t, control).transpose()
}
