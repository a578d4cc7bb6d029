//! Independent oracles for the solver: Merton closed forms, a Monte Carlo
//! estimator of the objective, and a finite-difference check of the first
//! variations of the discrete Lagrangian.

pub mod merton;
pub mod monte_carlo;
pub mod variations;

pub use merton::{merton_closed_form, MertonClosedForm, MertonComparison};
pub use monte_carlo::{monte_carlo_objective, MCEstimate};
pub use variations::{check_first_variations, step_multipliers, DiscreteLagrangian, VariationReport};
