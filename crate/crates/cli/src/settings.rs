//! Run configuration file (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use varctrl_core::{GridSpec, Parameters, SolverConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    #[serde(default)]
    pub parameters: Parameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out") }
    }
}

/// Tolerances for `verify`. The closed-form checks apply to `merton` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub n_random: usize,
    pub seed: u64,
    pub c_star_tol: f64,
    pub lambda_tol: f64,
    pub density_l1_tol: f64,
    pub j_tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { n_random: 20, seed: 1, c_star_tol: 0.1, lambda_tol: 0.01, density_l1_tol: 0.02, j_tol: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { paths: 100_000, steps: 200, seed: 1 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.solver.validate()?;
        if config.verify.n_random == 0 {
            return Err(CliError::Config("verify.n_random must be at least 1".into()));
        }
        Ok(config)
    }
}
