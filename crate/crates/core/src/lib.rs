//! Optimal Markov controls for one-dimensional finite-horizon stochastic
//! control problems.
//!
//! The solver looks for a critical point `(p, c, lambda)` of the
//! Lagrangian of `J(c) = E[int f dt + g(X_T)]` constrained by the forward
//! equation for the state density `p`. It alternates a backward solve for
//! the multiplier `lambda` with pointwise maximization of
//! `f + b d_x lambda + a^2/2 d_xx lambda` and a forward solve for `p`.

pub mod backward;
pub mod config;
pub mod control;
pub mod error;
pub mod forward;
pub mod generator;
pub mod grid;
pub mod problem;
pub mod sweep;
pub mod tridiag;
pub mod verification;

pub use backward::{solve_adjoint, solve_adjoint_with_stages, AdjointSolution};
pub use config::SolverConfig;
pub use control::{hamiltonian, maximize_hamiltonian, update_control_slice, HamiltonianSample};
pub use error::{Error, Result};
pub use forward::{initial_delta, initial_mass, l1_distance, solve_kfe, ForwardSolution};
pub use generator::{assemble_adjoint, assemble_generator};
pub use grid::{make_grid, Boundary, GridFunction, GridSpec, SpaceTimeGrid};
pub use problem::{make_merton_problem, ControlBounds, ControlProblem, Parameters, ProblemCatalog};
pub use sweep::{forward_backward_sweep, SweepRecord, SweepResult};
pub use tridiag::TridiagonalOperator;
pub use verification::{
    check_first_variations, merton_closed_form, monte_carlo_objective, MCEstimate, MertonClosedForm,
    MertonComparison, VariationReport,
};
