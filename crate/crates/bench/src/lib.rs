//! Shared fixtures for the solver benchmarks.

use varctrl_core::{make_merton_problem, Boundary, ControlProblem, GridSpec, SpaceTimeGrid};

pub fn merton() -> ControlProblem {
    make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).expect("valid parameters")
}

pub fn merton_grid(n: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::new(
        1.0,
        GridSpec { n_t: n, n_x: n, x_min: 0.2, x_max: 5.0, log_space: true, boundary: Boundary::Reflecting },
    )
    .expect("valid grid")
}
