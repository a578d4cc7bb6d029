//! `varctrl`: solve, verify and simulate optimal Markov control problems
//! described by a JSON run configuration.

mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use varctrl_core::{
    check_first_variations, forward_backward_sweep, make_grid, monte_carlo_objective, ControlProblem,
    MertonClosedForm, ProblemCatalog, SpaceTimeGrid, SweepResult,
};

use output::{field_csv, write, write_json, Report};
use settings::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(varctrl_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("verification failed: {}", .0.join("; "))]
    Verify(Vec<String>),
}

impl From<varctrl_core::Error> for CliError {
    fn from(e: varctrl_core::Error) -> Self {
        use varctrl_core::Error::*;
        match e {
            InvalidProblem(_) | InvalidGrid(_) | InvalidConfig(_) | UnknownProblem(_) => Self::Config(e.to_string()),
            other => Self::Solver(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "varctrl", version, about = "Optimal Markov controls by forward-backward sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sweep and write the control, multiplier and density fields.
    Solve(Common),
    /// Solve, then run the closed-form and first-variation checks.
    Verify(Common),
    /// Solve, then estimate the objective of the control by simulation.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("varctrl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VARCTRL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("VARCTRL_THREADS must be a non-negative integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

struct Solved {
    config: RunConfig,
    out_dir: PathBuf,
    problem: ControlProblem,
    grid: SpaceTimeGrid,
    result: SweepResult,
    report: Report,
}

fn solve(common: &Common) -> Result<Solved, CliError> {
    let config = RunConfig::load(&common.config)?;
    let out_dir = common.out.clone().unwrap_or_else(|| config.outputs.directory.clone());
    let problem = ProblemCatalog::with_builtins().build(&config.problem.name, &config.problem.parameters)?;
    let grid = make_grid(&problem, config.grid)?;
    let result = forward_backward_sweep(&problem, &grid, &config.solver, None)?;

    write(&out_dir, "c_star.csv", &field_csv(&grid, &result.control))?;
    write(&out_dir, "lambda.csv", &field_csv(&grid, &result.multiplier))?;
    write(&out_dir, "density.csv", &field_csv(&grid, &result.density))?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let report = Report {
        problem: config.problem.name.clone(),
        n_t: grid.n_t(),
        n_x: grid.n_x(),
        converged: result.converged,
        iterations: result.iterations,
        objective: result.objective,
        tail_nodes: result.tail_nodes,
        history: result.history.clone(),
        warnings: result.warnings.clone(),
        j_star: None,
        c_star_error: None,
        lambda_error: None,
        density_l1_error: None,
        j_error: None,
        variation_residuals: None,
        monte_carlo: None,
        failed_checks: Vec::new(),
    };
    Ok(Solved { config, out_dir, problem, grid, result, report })
}

fn closed_form(config: &RunConfig) -> Result<Option<MertonClosedForm>, CliError> {
    if config.problem.name != "merton" {
        return Ok(None);
    }
    Ok(Some(MertonClosedForm::from_problem_parameters(&config.problem.parameters)?))
}

fn finish(solved: &Solved) -> Result<(), CliError> {
    write_json(&solved.out_dir, "report.json", &solved.report)?;
    let r = &solved.report;
    println!(
        "{}: J = {:.10} after {} sweeps (converged: {})",
        r.problem, r.objective, r.iterations, r.converged
    );
    println!("wrote {}", solved.out_dir.display());
    Ok(())
}

fn verify(common: &Common) -> Result<(), CliError> {
    let mut s = solve(common)?;
    let tol = s.config.verify;
    let mut failed = Vec::new();
    if !s.result.converged {
        failed.push("sweep did not converge".to_string());
    }

    if let Some(cf) = closed_form(&s.config)? {
        let cmp = cf.compare(&s.problem, &s.grid, &s.config.solver, &s.result)?;
        let checks = [
            ("c_star_error", cmp.c_star_error, tol.c_star_tol),
            ("lambda_error", cmp.lambda_error, tol.lambda_tol),
            ("density_L1_error", cmp.density_l1_error, tol.density_l1_tol),
            ("J_error", cmp.objective_error, tol.j_tol),
        ];
        for (name, value, limit) in checks {
            if !(value <= limit) {
                failed.push(format!("{name} = {value:.3e} > {limit:.1e}"));
            }
        }
        s.report.j_star = Some(cf.j_star);
        s.report.c_star_error = Some(cmp.c_star_error);
        s.report.lambda_error = Some(cmp.lambda_error);
        s.report.density_l1_error = Some(cmp.density_l1_error);
        s.report.j_error = Some(cmp.objective_error);
    }

    let variations = check_first_variations(&s.problem, &s.grid, &s.result, &s.config.solver, tol.n_random, tol.seed)?;
    let limit = s.config.solver.variation_tol;
    for (name, value) in ["p", "c", "lambda", "mu"].iter().zip(variations.as_array()) {
        if !(value <= limit) {
            failed.push(format!("{name}-direction variation = {value:.3e} > {limit:.1e}"));
        }
    }
    s.report.variation_residuals = Some(variations.as_array());
    s.report.failed_checks = failed.clone();
    finish(&s)?;
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(CliError::Verify(failed))
    }
}

fn simulate(common: &Common, paths: Option<usize>, steps: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let mut s = solve(common)?;
    let mc = s.config.monte_carlo;
    let estimate = monte_carlo_objective(
        &s.problem,
        &s.grid,
        &s.result.control,
        paths.unwrap_or(mc.paths),
        steps.unwrap_or(mc.steps),
        seed.unwrap_or(mc.seed),
    )?;
    println!("monte carlo J = {:.10} +- {:.3e} ({} paths)", estimate.mean, estimate.std_error, estimate.n_paths);
    if let Some(cf) = closed_form(&s.config)? {
        s.report.j_star = Some(cf.j_star);
        println!("closed form J* = {:.10} ({:.2} standard errors)", cf.j_star, (estimate.mean - cf.j_star) / estimate.std_error);
    }
    s.report.monte_carlo = Some(estimate);
    finish(&s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(common) => finish(&solve(common)?),
        Command::Verify(common) => verify(common),
        Command::Mc { common, paths, steps, seed } => simulate(common, *paths, *steps, *seed),
    }
}

