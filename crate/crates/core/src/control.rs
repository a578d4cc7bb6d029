//! Pointwise control update: maximize the Hamiltonian
//! `H(c) = f(t, y, c) + b(t, y, c) d_lambda + 1/2 a(t, y, c)^2 d2_lambda`
//! over the admissible interval at every node.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::problem::{ControlBounds, ControlProblem};

/// First and second state derivatives of `lambda` at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSample {
    pub t: f64,
    pub y: f64,
    pub d_lambda: f64,
    pub d2_lambda: f64,
}

/// `f + b * d_lambda + 1/2 a^2 * d2_lambda` at control `c`.
#[inline]
pub fn hamiltonian(problem: &ControlProblem, sample: &HamiltonianSample, c: f64) -> f64 {
    let HamiltonianSample { t, y, d_lambda, d2_lambda } = *sample;
    let a = problem.diffusion(t, y, c);
    problem.running_reward(t, y, c) + problem.drift(t, y, c) * d_lambda + 0.5 * a * a * d2_lambda
}

/// Derivatives of the slice `lambda` at node `i`, by central differences in
/// the mesh coordinate. End nodes use the mirrored ghost value, matching the
/// boundary rows of the generator.
pub fn hamiltonian_sample(grid: &SpaceTimeGrid, t: f64, lambda: &[f64], i: usize) -> HamiltonianSample {
    let n = grid.n_x();
    let h = grid.dxi();
    let left = if i == 0 { lambda[1] } else { lambda[i - 1] };
    let right = if i == n - 1 { lambda[n - 2] } else { lambda[i + 1] };
    let d1 = (right - left) / (2.0 * h);
    let d2 = (right - 2.0 * lambda[i] + left) / (h * h);
    // differences at the rounding level of lambda carry no information
    let level = 4.0 * f64::EPSILON * left.abs().max(right.abs()).max(lambda[i].abs());
    let d1 = if (right - left).abs() <= level { 0.0 } else { d1 };
    let d2 = if (right - 2.0 * lambda[i] + left).abs() <= 2.0 * level { 0.0 } else { d2 };
    let y = grid.nodes()[i];
    if grid.log_space() {
        HamiltonianSample { t, y, d_lambda: d1 / y, d2_lambda: (d2 - d1) / (y * y) }
    } else {
        HamiltonianSample { t, y, d_lambda: d1, d2_lambda: d2 }
    }
}

const SCAN_POINTS: usize = 32;
const GOLDEN_REL_WIDTH: f64 = 1e-7;
const NEWTON_STEPS: usize = 4;

/// Global maximizer of `h` on `[lo, hi]`.
///
/// A uniform scan picks the best cell, golden-section search narrows the
/// bracket around it, and a few guarded Newton steps on `h'` (finite
/// differences) polish the result. A Hamiltonian that is flat to round-off
/// over the whole scan returns `lo`. Ties go to the smaller control.
pub fn maximize_on_interval<F>(h: F, bounds: ControlBounds) -> std::result::Result<f64, f64>
where
    F: Fn(f64) -> f64,
{
    let ControlBounds { lo, hi } = bounds;
    let width = hi - lo;
    let at = |j: usize| if j == SCAN_POINTS { hi } else { lo + width * j as f64 / SCAN_POINTS as f64 };

    let mut best_j = 0;
    let mut best = f64::NEG_INFINITY;
    let mut worst = f64::INFINITY;
    for j in 0..=SCAN_POINTS {
        let c = at(j);
        let v = h(c);
        if !v.is_finite() {
            return Err(c);
        }
        if v > best {
            best = v;
            best_j = j;
        }
        worst = worst.min(v);
    }
    if best - worst <= 8.0 * f64::EPSILON * best.abs().max(worst.abs()) {
        return Ok(lo);
    }

    let mut best_c = at(best_j);
    let mut a = at(best_j.saturating_sub(1));
    let mut b = at((best_j + 1).min(SCAN_POINTS));

    // golden section on [a, b]
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = h(x1);
    let mut f2 = h(x2);
    while b - a > GOLDEN_REL_WIDTH * width {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = h(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = h(x2);
        }
    }
    for (c, v) in [(x1, f1), (x2, f2)] {
        if !v.is_finite() {
            return Err(c);
        }
        if v > best || (v == best && c < best_c) {
            best = v;
            best_c = c;
        }
    }

    // Newton polish on h'
    let step = 1e-5 * width;
    let mut c = best_c;
    for _ in 0..NEWTON_STEPS {
        let (hm, h0, hp) = (h(c - step), h(c), h(c + step));
        let d1 = (hp - hm) / (2.0 * step);
        let d2 = (hp - 2.0 * h0 + hm) / (step * step);
        if !(d2 < 0.0 && d1.is_finite()) {
            break;
        }
        let next = (c - d1 / d2).clamp(lo, hi);
        let v = h(next);
        if !(v >= best) {
            break;
        }
        let moved = (next - c).abs();
        best = v;
        best_c = next;
        c = next;
        if moved <= 1e-14 * width {
            break;
        }
    }
    Ok(best_c)
}

/// Maximizer of the Hamiltonian for one sample.
pub fn maximize_hamiltonian(problem: &ControlProblem, sample: &HamiltonianSample) -> Result<f64> {
    maximize_on_interval(|c| hamiltonian(problem, sample, c), problem.bounds())
        .map_err(|_| Error::NonFiniteHamiltonian { t: sample.t, y: sample.y })
}

/// New control slice at time `t` from the multiplier slice `lambda`.
///
/// Nodes are independent and processed in parallel; the result does not
/// depend on the number of worker threads.
pub fn update_control_slice(
    problem: &ControlProblem,
    grid: &SpaceTimeGrid,
    t: f64,
    lambda: &[f64],
) -> Result<Vec<f64>> {
    assert_eq!(lambda.len(), grid.n_x());
    (0..grid.n_x())
        .into_par_iter()
        .map(|i| maximize_hamiltonian(problem, &hamiltonian_sample(grid, t, lambda, i)))
        .collect()
}

/// Relative first-order residual `|dH/dc| / scale(H)` at `c`.
///
/// `None` when `c` sits on (or beyond) a bound or the Hamiltonian is not
/// strictly concave there, i.e. where the interior condition does not apply.
/// The scale is the sum of the magnitudes of the three Hamiltonian terms per
/// unit of control range.
pub fn stationarity_residual(problem: &ControlProblem, sample: &HamiltonianSample, c: f64) -> Option<f64> {
    let bounds = problem.bounds();
    let width = bounds.width();
    let edge = 1e-9 * width;
    if c <= bounds.lo + edge || c >= bounds.hi - edge {
        return None;
    }
    let step = 1e-5 * width;
    let (hm, h0, hp) = (
        hamiltonian(problem, sample, c - step),
        hamiltonian(problem, sample, c),
        hamiltonian(problem, sample, c + step),
    );
    let d1 = (hp - hm) / (2.0 * step);
    let d2 = (hp - 2.0 * h0 + hm) / (step * step);
    let HamiltonianSample { t, y, d_lambda, d2_lambda } = *sample;
    let a = problem.diffusion(t, y, c);
    let magnitude = problem.running_reward(t, y, c).abs()
        + (problem.drift(t, y, c) * d_lambda).abs()
        + (0.5 * a * a * d2_lambda).abs();
    // curvature must be resolved above finite-difference noise
    let noise = 64.0 * f64::EPSILON * magnitude / (step * step);
    if !(d2 < -noise) {
        return None;
    }
    if magnitude == 0.0 {
        return Some(0.0);
    }
    Some(d1.abs() / (magnitude / width))
}
