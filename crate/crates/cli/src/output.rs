use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use varctrl_core::{GridFunction, MCEstimate, SpaceTimeGrid, SweepRecord};

use crate::CliError;

/// `t,x,value` rows, time-major, 17 significant digits.
pub fn field_csv(grid: &SpaceTimeGrid, field: &GridFunction) -> String {
    let mut out = String::from("t,x,value\n");
    for (n, &t) in grid.times().iter().enumerate() {
        for (i, &x) in grid.nodes().iter().enumerate() {
            writeln!(out, "{t:.16e},{x:.16e},{:.16e}", field.get(n, i)).expect("writing to a String");
        }
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write(dir, name, &text)
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub problem: String,
    pub n_t: usize,
    pub n_x: usize,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub tail_nodes: usize,
    pub history: Vec<SweepRecord>,
    pub warnings: Vec<String>,
    pub j_star: Option<f64>,
    pub c_star_error: Option<f64>,
    pub lambda_error: Option<f64>,
    #[serde(rename = "density_L1_error")]
    pub density_l1_error: Option<f64>,
    #[serde(rename = "J_error")]
    pub j_error: Option<f64>,
    /// Order: p, c, lambda, mu.
    pub variation_residuals: Option<[f64; 4]>,
    pub monte_carlo: Option<MCEstimate>,
    pub failed_checks: Vec<String>,
}
