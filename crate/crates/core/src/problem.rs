//! Control problem definition and the built-in problem catalog.
//!
//! A [`ControlProblem`] bundles the controlled dynamics
//! `dX = b(t, X, c) dt + a(t, X, c) dW`, the running reward `f(t, x, c)`,
//! the terminal reward `g(x)`, the horizon and the initial state, together
//! with the admissible control interval.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient of the controlled dynamics or running reward, `(t, x, c) -> value`.
pub type Coefficient = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Terminal reward `x -> value`.
pub type TerminalReward = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed control interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ControlBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidProblem(format!(
                "control bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.lo && c <= self.hi
    }

    pub fn clamp(&self, c: f64) -> f64 {
        c.clamp(self.lo, self.hi)
    }
}

/// A 1-D finite-horizon stochastic control problem.
#[derive(Clone)]
pub struct ControlProblem {
    name: String,
    drift: Coefficient,
    diffusion: Coefficient,
    running_reward: Coefficient,
    terminal_reward: TerminalReward,
    horizon: f64,
    initial_state: f64,
    bounds: ControlBounds,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("initial_state", &self.initial_state)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl ControlProblem {
    /// Builds a problem from its coefficient functions.
    ///
    /// The coefficients must be pure; nothing here caches or mutates them.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        drift: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        running_reward: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        terminal_reward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        horizon: f64,
        initial_state: f64,
        bounds: ControlBounds,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if !initial_state.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "initial state must be finite, got {initial_state}"
            )));
        }
        let bounds = ControlBounds::new(bounds.lo, bounds.hi)?;
        Ok(Self {
            name: name.into(),
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            running_reward: Arc::new(running_reward),
            terminal_reward: Arc::new(terminal_reward),
            horizon,
            initial_state,
            bounds,
        })
    }

    /// Same problem with a different admissible control interval.
    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.bounds = ControlBounds::new(lo, hi)?;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_state(&self) -> f64 {
        self.initial_state
    }

    pub fn bounds(&self) -> ControlBounds {
        self.bounds
    }

    #[inline]
    pub fn drift(&self, t: f64, x: f64, c: f64) -> f64 {
        (self.drift)(t, x, c)
    }

    #[inline]
    pub fn diffusion(&self, t: f64, x: f64, c: f64) -> f64 {
        (self.diffusion)(t, x, c)
    }

    #[inline]
    pub fn running_reward(&self, t: f64, x: f64, c: f64) -> f64 {
        (self.running_reward)(t, x, c)
    }

    #[inline]
    pub fn terminal_reward(&self, x: f64) -> f64 {
        (self.terminal_reward)(x)
    }
}

/// Default admissible interval for the Merton preset.
pub const MERTON_DEFAULT_BOUNDS: ControlBounds = ControlBounds { lo: 0.0, hi: 10.0 };

/// Merton portfolio problem with power utility `U(x) = x^q / q` and zero
/// interest rate: `b = mu c x`, `a = sigma c x`, `f = 0`, `g = U`.
///
/// The control is the fraction of wealth held in the risky asset. Bounds
/// default to [`MERTON_DEFAULT_BOUNDS`]; use [`ControlProblem::with_bounds`]
/// to change them.
pub fn make_merton_problem(mu: f64, sigma: f64, q: f64, horizon: f64, x0: f64) -> Result<ControlProblem> {
    validate_merton(mu, sigma, q, x0)?;
    ControlProblem::new(
        "merton",
        move |_, x, c| mu * c * x,
        move |_, x, c| sigma * c * x,
        |_, _, _| 0.0,
        move |x| x.powf(q) / q,
        horizon,
        x0,
        MERTON_DEFAULT_BOUNDS,
    )
}

pub(crate) fn validate_merton(mu: f64, sigma: f64, q: f64, x0: f64) -> Result<()> {
    if !mu.is_finite() {
        return Err(Error::InvalidProblem(format!("mu must be finite, got {mu}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidProblem(format!("sigma must be positive, got {sigma}")));
    }
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::InvalidProblem(format!("initial wealth must be positive, got {x0}")));
    }
    if !q.is_finite() || q >= 1.0 {
        return Err(Error::InvalidProblem(format!(
            "risk exponent q must be < 1 for a concave utility, got {q}"
        )));
    }
    if q == 0.0 {
        return Err(Error::InvalidProblem(
            "q = 0 (log utility) is not covered by the power-utility preset".into(),
        ));
    }
    Ok(())
}

/// Named scalar parameters used to instantiate catalog problems.
pub type Parameters = BTreeMap<String, f64>;

type Builder = Box<dyn Fn(&Parameters) -> Result<ControlProblem> + Send + Sync>;

/// Registry mapping problem names to builders.
pub struct ProblemCatalog {
    builders: BTreeMap<String, Builder>,
}

impl fmt::Debug for ProblemCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemCatalog")
            .field("problems", &self.builders.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for ProblemCatalog {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ProblemCatalog {
    pub fn empty() -> Self {
        Self { builders: BTreeMap::new() }
    }

    /// Catalog holding the `merton` preset.
    ///
    /// `merton` reads `mu`, `sigma`, `q`, `horizon` (or `T`), `x0`, and the
    /// optional bounds `c_lo`, `c_hi`.
    pub fn with_builtins() -> Self {
        let mut catalog = Self::empty();
        catalog.register("merton", |params| {
            let mu = required(params, "mu")?;
            let sigma = required(params, "sigma")?;
            let q = required(params, "q")?;
            let horizon = params
                .get("horizon")
                .or_else(|| params.get("T"))
                .copied()
                .ok_or_else(|| Error::InvalidProblem("missing parameter `horizon`".into()))?;
            let x0 = required(params, "x0")?;
            let problem = make_merton_problem(mu, sigma, q, horizon, x0)?;
            let lo = params.get("c_lo").copied().unwrap_or(MERTON_DEFAULT_BOUNDS.lo);
            let hi = params.get("c_hi").copied().unwrap_or(MERTON_DEFAULT_BOUNDS.hi);
            problem.with_bounds(lo, hi)
        });
        catalog
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        builder: impl Fn(&Parameters) -> Result<ControlProblem> + Send + Sync + 'static,
    ) {
        self.builders.insert(name.into(), Box::new(builder));
    }

    pub fn build(&self, name: &str, params: &Parameters) -> Result<ControlProblem> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
        builder(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }
}

fn required(params: &Parameters, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::InvalidProblem(format!("missing parameter `{key}`")))
}
