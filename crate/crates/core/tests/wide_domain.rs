//! The desk-scale Merton checks on a domain wide enough to hold the optimal
//! wealth distribution, where the closed forms are reachable.

mod common;

use std::sync::OnceLock;

use varctrl_core::*;

use common::merton_grid;

const X_MIN: f64 = 1e-5;
const X_MAX: f64 = 1e5;

fn closed_form() -> MertonClosedForm {
    merton_closed_form(0.1, 0.2, 0.5, 1.0, 1.0).unwrap()
}

fn problem() -> ControlProblem {
    make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap()
}

fn solved(n: usize) -> &'static (SpaceTimeGrid, SweepResult) {
    static COARSE: OnceLock<(SpaceTimeGrid, SweepResult)> = OnceLock::new();
    static FINE: OnceLock<(SpaceTimeGrid, SweepResult)> = OnceLock::new();
    let cell = if n == 201 { &COARSE } else { &FINE };
    cell.get_or_init(|| {
        let g = merton_grid(n, X_MIN, X_MAX);
        let r = forward_backward_sweep(&problem(), &g, &SolverConfig::default(), Some(&GridFunction::zeros(&g)))
            .unwrap();
        (g, r)
    })
}

#[test]
fn control_and_multiplier_match_closed_form() {
    let (g, r) = solved(401);
    assert!(r.converged);
    let cf = closed_form();
    let c_err = cf.control_error(g, &r.control);
    let l_err = cf.multiplier_error(g, &r.multiplier);
    assert!(c_err <= 0.1, "{c_err}");
    assert!(l_err <= 0.01, "{l_err}");
}

#[test]
fn density_matches_lognormal() {
    let (g, _) = solved(401);
    let err = closed_form().density_error(&problem(), g, &SolverConfig::default()).unwrap();
    assert!(err <= 0.02, "{err}");
}

#[test]
fn objective_matches_grid_and_monte_carlo() {
    let (g, r) = solved(401);
    let cf = closed_form();
    assert!((r.objective / cf.j_star - 1.0).abs() <= 0.01, "{}", r.objective);
    let mc = monte_carlo_objective(&problem(), g, &r.control, 100_000, 200, 99).unwrap();
    assert_eq!(mc.exploded, 0);
    assert!((mc.mean - cf.j_star).abs() <= 3.0 * mc.std_error, "{mc:?}");
}

#[test]
fn first_variations_vanish() {
    let (g, r) = solved(401);
    let cfg = SolverConfig::default();
    let rep = check_first_variations(&problem(), g, r, &cfg, 20, 5).unwrap();
    assert!(rep.max_residual() <= 1e-3, "{rep:?}");
    let mut shifted = r.clone();
    shifted.control.values_mut().iter_mut().for_each(|c| *c = (*c + 1.0).min(10.0));
    let bad = check_first_variations(&problem(), g, &shifted, &cfg, 20, 5).unwrap();
    assert!(bad.c_direction >= 10.0 * rep.c_direction, "{bad:?}");
}

#[test]
fn errors_shrink_under_refinement() {
    let ((gc, rc), (gf, rf)) = (solved(201), solved(401));
    let cf = closed_form();
    let cfg = SolverConfig::default();
    let c_ratio = cf.control_error(gc, &rc.control) / cf.control_error(gf, &rf.control);
    let d_ratio = cf.density_error(&problem(), gc, &cfg).unwrap() / cf.density_error(&problem(), gf, &cfg).unwrap();
    assert!(c_ratio >= 1.8, "{c_ratio}");
    assert!(d_ratio >= 1.8, "{d_ratio}");
}
