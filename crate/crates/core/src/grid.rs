//! Space-time meshes and fields sampled on them.
//!
//! Space nodes are uniform in the mesh coordinate `xi`, which is either the
//! state itself or its logarithm. All spatial integrals use the trapezoid
//! rule in `xi` with the Jacobian `dx/dxi` folded into the node weights, so
//! `sum_i w_i p_i` approximates `int p(x) dx` on either kind of mesh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ControlBounds, ControlProblem};

/// Behaviour of the process at the ends of the truncated state interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero-flux boundary; conserves probability mass.
    #[default]
    Reflecting,
    /// Killing boundary; mass that reaches it is removed.
    Absorbing,
}

/// Parameters describing a mesh; see [`make_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_x: usize,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default)]
    pub log_space: bool,
    #[serde(default)]
    pub boundary: Boundary,
}

/// Uniform time mesh on `[0, T]` times a uniform mesh in `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    spec: GridSpec,
    horizon: f64,
    dt: f64,
    dxi: f64,
    times: Vec<f64>,
    coords: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SpaceTimeGrid {
    /// Mesh on `[0, horizon] x [x_min, x_max]` with no reference to a problem.
    pub fn new(horizon: f64, spec: GridSpec) -> Result<Self> {
        let GridSpec { n_t, n_x, x_min, x_max, log_space, .. } = spec;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_t < 2 {
            return Err(Error::InvalidGrid(format!("need n_t >= 2, got {n_t}")));
        }
        if n_x < 3 {
            return Err(Error::InvalidGrid(format!("need n_x >= 3, got {n_x}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if log_space && x_min <= 0.0 {
            return Err(Error::InvalidGrid(format!("log-space mesh needs x_min > 0, got {x_min}")));
        }

        let (xi_min, xi_max) = if log_space { (x_min.ln(), x_max.ln()) } else { (x_min, x_max) };
        let dxi = (xi_max - xi_min) / (n_x - 1) as f64;
        let coords: Vec<f64> = (0..n_x)
            .map(|i| if i == n_x - 1 { xi_max } else { xi_min + i as f64 * dxi })
            .collect();
        let nodes: Vec<f64> = coords
            .iter()
            .enumerate()
            .map(|(i, &xi)| match (i, log_space) {
                (0, _) => x_min,
                (i, _) if i == n_x - 1 => x_max,
                (_, true) => xi.exp(),
                (_, false) => xi,
            })
            .collect();
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("mesh nodes are not strictly increasing".into()));
        }
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let jac = if log_space { x } else { 1.0 };
                let end = if i == 0 || i == n_x - 1 { 0.5 } else { 1.0 };
                end * dxi * jac
            })
            .collect();

        let dt = horizon / (n_t - 1) as f64;
        let times = (0..n_t)
            .map(|n| if n == n_t - 1 { horizon } else { n as f64 * dt })
            .collect();

        Ok(Self { spec, horizon, dt, dxi, times, coords, nodes, weights })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn n_t(&self) -> usize {
        self.spec.n_t
    }
    pub fn n_x(&self) -> usize {
        self.spec.n_x
    }
    pub fn log_space(&self) -> bool {
        self.spec.log_space
    }
    pub fn boundary(&self) -> Boundary {
        self.spec.boundary
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    /// Time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// Spacing in the mesh coordinate.
    pub fn dxi(&self) -> f64 {
        self.dxi
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    /// State values at the space nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    /// Mesh coordinate (`x` or `ln x`) at the space nodes.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    /// Trapezoid quadrature weights for `int . dx`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Maps a state value to the mesh coordinate.
    pub fn to_coord(&self, x: f64) -> f64 {
        if self.spec.log_space {
            x.ln()
        } else {
            x
        }
    }

    /// Trapezoid integral `int v(x) dx` of one space slice.
    pub fn integrate(&self, slice: &[f64]) -> f64 {
        debug_assert_eq!(slice.len(), self.n_x());
        slice.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Index range of the nodes lying in the middle half of the mesh coordinate.
    pub fn central_half(&self) -> std::ops::Range<usize> {
        let lo_xi = self.coords[0] + 0.25 * (self.coords[self.n_x() - 1] - self.coords[0]);
        let hi_xi = self.coords[0] + 0.75 * (self.coords[self.n_x() - 1] - self.coords[0]);
        let start = self.coords.iter().position(|&xi| xi >= lo_xi).unwrap_or(0);
        let end = self.coords.iter().rposition(|&xi| xi <= hi_xi).map_or(self.n_x(), |i| i + 1);
        start..end
    }
}

/// Builds the mesh for `problem`, checking that the initial state is interior
/// and that the diffusion coefficient is non-negative on the mesh.
pub fn make_grid(problem: &ControlProblem, spec: GridSpec) -> Result<SpaceTimeGrid> {
    let grid = SpaceTimeGrid::new(problem.horizon(), spec)?;
    let x0 = problem.initial_state();
    if !(x0 > spec.x_min && x0 < spec.x_max) {
        return Err(Error::InvalidGrid(format!(
            "initial state {x0} is not inside ({}, {})",
            spec.x_min, spec.x_max
        )));
    }
    let bounds = problem.bounds();
    for &t in &[0.0, problem.horizon()] {
        for &x in grid.nodes() {
            for c in [bounds.lo, bounds.midpoint(), bounds.hi] {
                let a = problem.diffusion(t, x, c);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "diffusion must be finite and non-negative, got {a} at t = {t}, x = {x}, c = {c}"
                    )));
                }
            }
        }
    }
    Ok(grid)
}

/// Dense `n_t x n_x` field, row-major over time then space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n_t: usize,
    n_x: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &SpaceTimeGrid, value: f64) -> Self {
        Self { n_t: grid.n_t(), n_x: grid.n_x(), values: vec![value; grid.n_t() * grid.n_x()] }
    }

    /// Samples `f(t, x)` at every mesh point.
    pub fn from_fn(grid: &SpaceTimeGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_t() * grid.n_x());
        for &t in grid.times() {
            values.extend(grid.nodes().iter().map(|&x| f(t, x)));
        }
        Self { n_t: grid.n_t(), n_x: grid.n_x(), values }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_t() * grid.n_x() {
            return Err(Error::ShapeMismatch {
                expected_t: grid.n_t(),
                expected_x: grid.n_x(),
                found_t: values.len() / grid.n_x().max(1),
                found_x: grid.n_x(),
            });
        }
        Ok(Self { n_t: grid.n_t(), n_x: grid.n_x(), values })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_x..(n + 1) * self.n_x]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.n_x..(n + 1) * self.n_x]
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.n_x + i]
    }

    pub fn set(&mut self, n: usize, i: usize, v: f64) {
        self.values[n * self.n_x + i] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance to a field of the same shape.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Errors on the first entry outside `bounds`.
    pub fn check_within(&self, bounds: ControlBounds) -> Result<()> {
        match self.values.iter().position(|&c| !bounds.contains(c)) {
            None => Ok(()),
            Some(k) => Err(Error::ControlOutOfBounds {
                time_index: k / self.n_x,
                node: k % self.n_x,
                value: self.values[k],
                lo: bounds.lo,
                hi: bounds.hi,
            }),
        }
    }

    pub fn check_shape(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if self.n_t != grid.n_t() || self.n_x != grid.n_x() {
            return Err(Error::ShapeMismatch {
                expected_t: grid.n_t(),
                expected_x: grid.n_x(),
                found_t: self.n_t,
                found_x: self.n_x,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_merton_problem;

    fn spec(n_x: usize, x_min: f64, x_max: f64, log_space: bool) -> GridSpec {
        GridSpec { n_t: 2, n_x, x_min, x_max, log_space, boundary: Boundary::Reflecting }
    }

    #[test]
    fn linear_nodes() {
        let g = SpaceTimeGrid::new(1.0, spec(3, 0.5, 2.0, false)).unwrap();
        assert_eq!(g.nodes(), &[0.5, 1.25, 2.0]);
        assert_eq!(g.times(), &[0.0, 1.0]);
    }

    #[test]
    fn log_nodes() {
        let g = SpaceTimeGrid::new(1.0, spec(3, 1.0, 4.0, true)).unwrap();
        assert_eq!(g.nodes()[0], 1.0);
        assert!((g.nodes()[1] - 2.0).abs() < 1e-15);
        assert_eq!(g.nodes()[2], 4.0);
    }

    #[test]
    fn rejects_initial_state_outside() {
        let p = make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap();
        assert!(make_grid(&p, spec(5, 2.0, 4.0, false)).is_err());
        assert!(make_grid(&p, spec(5, 1.0, 4.0, false)).is_err());
        assert!(make_grid(&p, spec(5, 0.5, 4.0, true)).is_ok());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SpaceTimeGrid::new(1.0, spec(2, 0.0, 1.0, false)).is_err());
        assert!(SpaceTimeGrid::new(1.0, GridSpec { n_t: 1, ..spec(3, 0.0, 1.0, false) }).is_err());
        assert!(SpaceTimeGrid::new(1.0, spec(3, 1.0, 1.0, false)).is_err());
        assert!(SpaceTimeGrid::new(1.0, spec(3, 0.0, 1.0, true)).is_err());
        assert!(SpaceTimeGrid::new(0.0, spec(3, 0.1, 1.0, true)).is_err());
    }

    #[test]
    fn rejects_negative_diffusion() {
        let p = make_merton_problem(0.1, 0.2, 0.5, 1.0, 1.0).unwrap().with_bounds(-1.0, 1.0).unwrap();
        let err = make_grid(&p, spec(5, 0.5, 2.0, true)).unwrap_err();
        assert!(matches!(err, Error::InvalidProblem(_)));
    }

    #[test]
    fn nodes_are_reproducible_and_increasing() {
        let s = GridSpec { n_t: 11, n_x: 401, x_min: 0.2, x_max: 5.0, log_space: true, boundary: Boundary::Reflecting };
        let a = SpaceTimeGrid::new(1.0, s).unwrap();
        let b = SpaceTimeGrid::new(1.0, s).unwrap();
        assert_eq!(a, b);
        assert!(a.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(a.times()[10], 1.0);
    }

    #[test]
    fn weights_integrate_exactly_on_linear_functions() {
        let g = SpaceTimeGrid::new(1.0, spec(11, 1.0, 3.0, false)).unwrap();
        let ones = vec![1.0; 11];
        assert!((g.integrate(&ones) - 2.0).abs() < 1e-14);
        let xs = g.nodes().to_vec();
        assert!((g.integrate(&xs) - 4.0).abs() < 1e-13);
        // log mesh: int 1/x dx over [1, e^2] = 2, exact under the Jacobian weights
        let lg = SpaceTimeGrid::new(1.0, spec(9, 1.0, 2f64.exp(), true)).unwrap();
        let inv: Vec<f64> = lg.nodes().iter().map(|x| 1.0 / x).collect();
        assert!((lg.integrate(&inv) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn central_half_covers_middle_nodes() {
        let g = SpaceTimeGrid::new(1.0, spec(9, 0.0, 8.0, false)).unwrap();
        assert_eq!(g.central_half(), 2..7);
    }

    #[test]
    fn grid_function_access() {
        let g = SpaceTimeGrid::new(1.0, GridSpec { n_t: 3, ..spec(4, 0.0, 3.0, false) }).unwrap();
        let f = GridFunction::from_fn(&g, |t, x| t + 10.0 * x);
        assert_eq!(f.slice(2), &[1.0, 11.0, 21.0, 31.0]);
        assert_eq!(f.get(1, 2), 20.5);
        assert!(GridFunction::from_values(&g, vec![0.0; 5]).is_err());
        let z = GridFunction::zeros(&g);
        assert_eq!(f.sup_distance(&z), 31.0);
    }
}
