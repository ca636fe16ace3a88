//! The `reinsure` command-line tool.

pub mod config;
pub mod csvio;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::simulator::{estimate_survival, SimConfig, SimulationError};
use crate::solver::{extract_strategy, refine, solve, InnerMethod, SolverConfig, SolverError};

pub use config::{parse_config, parse_config_with, Overrides, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} already exists; pass --force to overwrite")]
    WouldOverwrite(PathBuf),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("solver failed for {scenario}: {source}")]
    Solver {
        scenario: String,
        #[source]
        source: SolverError,
    },
    #[error("ordering check failed: {0}")]
    Ordering(String),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimulationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Format(_)
            | CliError::Io(_)
            | CliError::WouldOverwrite(_)
            | CliError::GridMismatch(_) => 2,
            CliError::Solver { .. } | CliError::Ordering(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "reinsure",
    version,
    about = "Optimal multi-line reinsurance via the HJB finite-difference scheme"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal survival probability and strategy table
    Solve {
        #[command(flatten)]
        common: Common,
        /// Print delta at these surplus levels
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
    /// Estimate survival under a strategy table by Monte Carlo
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Strategy CSV written by `solve`
        #[arg(long)]
        strategy: PathBuf,
        /// Solution CSV to report agreement against
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Initial surplus levels (defaults to the config's x0 list)
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
    /// Solve several scenarios on one grid and tabulate their curves
    Compare {
        #[command(flatten)]
        common: Common,
        /// Require this scenario to dominate all others within 1e-3
        #[arg(long)]
        expect_best: Option<String>,
        /// Print a summary at these surplus levels
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
    /// Halve h repeatedly and report sup-norm changes of delta
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file; `compare` takes several
    #[arg(long, required = true, num_args = 1..)]
    pub config: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, value_enum)]
    pub inner: Option<InnerArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Overwrite existing output files
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum InnerArg {
    Exhaustive,
    Fractional,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            h: self.h,
            x_max: self.xmax,
            resolution: self.resolution,
            inner: self.inner.map(|i| match i {
                InnerArg::Exhaustive => InnerMethod::Exhaustive,
                InnerArg::Fractional => InnerMethod::Fractional,
            }),
            seed: self.seed,
            paths: self.paths,
        }
    }

    fn scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        let o = self.overrides();
        self.config.iter().map(|p| parse_config_with(p, &o)).collect()
    }

    fn single(&self) -> Result<Scenario, CliError> {
        if self.config.len() != 1 {
            return Err(CliError::Config("exactly one --config is required".into()));
        }
        Ok(self.scenarios()?.remove(0))
    }
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: Vec<PathBuf>,
    pub subcommand: String,
    pub solver: Vec<SolverConfig>,
    pub simulation: Option<SimConfig>,
    pub output_dir: PathBuf,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Creates `dir` and fails if any of `names` exists there unless `force`.
fn prepare_outputs(dir: &Path, names: &[&str], force: bool) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::WouldOverwrite(p.clone()));
        }
    }
    Ok(paths)
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn manifest(
    common: &Common,
    subcommand: &str,
    scenarios: &[Scenario],
    simulation: Option<SimConfig>,
) -> RunManifest {
    RunManifest {
        config: common.config.clone(),
        subcommand: subcommand.into(),
        solver: scenarios.iter().map(|s| s.solver.clone()).collect(),
        simulation,
        output_dir: common.out.clone(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

fn solver_error(s: &Scenario) -> impl FnOnce(SolverError) -> CliError + '_ {
    move |source| CliError::Solver {
        scenario: s.name.clone(),
        source,
    }
}

pub fn cmd_solve(common: &Common, at: &[f64]) -> Result<(), CliError> {
    let s = common.single()?;
    let paths = prepare_outputs(
        &common.out,
        &["solution.csv", "strategy.csv", "solve.manifest.json"],
        common.force,
    )?;
    let table = solve(&s.spec, &s.solver).map_err(solver_error(&s))?;
    csvio::write_solution(&paths[0], &table)?;
    csvio::write_strategy(&paths[1], &extract_strategy(&table), &table.families)?;
    write_manifest(
        &paths[2],
        &manifest(common, "solve", std::slice::from_ref(&s), None),
    )?;

    let d = &table.diagnostics;
    println!(
        "{}: {} steps, h = {}, delta(0) = {:.6}, min premium {:.6}, {:.2}s",
        s.name,
        table.n_steps(),
        table.h,
        table.delta[0],
        d.min_selected_premium,
        d.runtime_seconds
    );
    for x in at {
        println!("delta({x}) = {:.6}", table.delta_at(*x));
    }
    Ok(())
}

pub fn cmd_simulate(
    common: &Common,
    strategy: &Path,
    solution: Option<&Path>,
    at: &[f64],
) -> Result<(), CliError> {
    let s = common.single()?;
    let families: Vec<_> = s.spec.lines().iter().map(|l| l.family).collect();
    let table = csvio::read_strategy(strategy, &families)?;
    let curve = solution.map(|p| csvio::read_solution(p, &families)).transpose()?;
    let x0: Vec<f64> = if !at.is_empty() {
        at.to_vec()
    } else {
        s.x0.clone().ok_or_else(|| {
            CliError::Config("no initial surplus levels: pass --at or set [simulation] x0".into())
        })?
    };
    if let Some(bad) = x0
        .iter()
        .find(|x| !(**x >= 0.0 && **x <= s.simulation.upper_barrier))
    {
        return Err(CliError::Config(format!(
            "initial surplus {bad} outside [0, barrier = {}]",
            s.simulation.upper_barrier
        )));
    }
    let paths = prepare_outputs(
        &common.out,
        &["simulation.csv", "simulate.manifest.json"],
        common.force,
    )?;

    let estimates = x0
        .iter()
        .map(|x| estimate_survival(&s.spec, &table, *x, &s.simulation))
        .collect::<Result<Vec<_>, _>>()?;
    csvio::write_simulation(&paths[0], &estimates)?;
    write_manifest(
        &paths[1],
        &manifest(
            common,
            "simulate",
            std::slice::from_ref(&s),
            Some(s.simulation.clone()),
        ),
    )?;

    if let Some(curve) = curve {
        let mut agree = 0;
        for e in &estimates {
            let d = interpolate(&curve.x, &curve.delta, e.x0);
            let ok = (e.estimate - d).abs() <= 3.0 * e.half_width;
            agree += ok as usize;
            println!(
                "x0 = {:<8} estimate {:.5} ± {:.5}  delta {:.5}  {}",
                e.x0,
                e.estimate,
                e.half_width,
                d,
                if ok { "ok" } else { "OUTSIDE" }
            );
        }
        println!("{agree}/{} levels within 3 half-widths", estimates.len());
    } else {
        for e in &estimates {
            println!(
                "x0 = {:<8} estimate {:.5} ± {:.5}",
                e.x0, e.estimate, e.half_width
            );
        }
    }
    Ok(())
}

/// Linear interpolation on an increasing grid, constant outside it.
pub fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    let k = x.partition_point(|v| *v <= at);
    if k == 0 {
        return y[0];
    }
    if k == x.len() {
        return y[k - 1];
    }
    let t = (at - x[k - 1]) / (x[k] - x[k - 1]);
    y[k - 1] + t * (y[k] - y[k - 1])
}

pub fn cmd_compare(common: &Common, expect_best: Option<&str>, at: &[f64]) -> Result<(), CliError> {
    let scenarios = common.scenarios()?;
    if scenarios.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two --config files".into(),
        ));
    }
    let first = &scenarios[0];
    for s in &scenarios[1..] {
        if s.solver.h != first.solver.h || s.solver.n_steps() != first.solver.n_steps() {
            return Err(CliError::GridMismatch(format!(
                "{} uses h = {}, x_max = {} but {} uses h = {}, x_max = {}",
                s.name, s.solver.h, s.solver.x_max, first.name, first.solver.h, first.solver.x_max
            )));
        }
    }
    let mut names: Vec<String> = scenarios.iter().map(|s| s.name.clone()).collect();
    for k in 0..names.len() {
        if names[..k].contains(&names[k]) {
            names[k] = format!("{}_{}", names[k], k + 1);
        }
    }
    if let Some(best) = expect_best {
        if !names.iter().any(|n| n == best) {
            return Err(CliError::Config(format!(
                "--expect-best {best} names no scenario"
            )));
        }
    }
    let paths = prepare_outputs(
        &common.out,
        &["compare.csv", "compare.manifest.json"],
        common.force,
    )?;

    let tables = scenarios
        .par_iter()
        .map(|s| solve(&s.spec, &s.solver).map_err(solver_error(s)))
        .collect::<Result<Vec<_>, _>>()?;
    let data = csvio::CompareCsv {
        names: names.clone(),
        x: tables[0].grid.clone(),
        delta: tables.iter().map(|t| t.delta.clone()).collect(),
    };
    csvio::write_compare(&paths[0], &data)?;
    write_manifest(&paths[1], &manifest(common, "compare", &scenarios, None))?;

    let levels: Vec<f64> = if at.is_empty() { vec![0.0] } else { at.to_vec() };
    for (name, t) in names.iter().zip(&tables) {
        let values: Vec<String> = levels.iter().map(|x| format!("{:.5}", t.delta_at(*x))).collect();
        println!("{name:<24} {}", values.join("  "));
    }

    if let Some(best) = expect_best {
        let b = names.iter().position(|n| n == best).expect("checked above");
        for (k, t) in tables.iter().enumerate() {
            let gap = t
                .delta
                .iter()
                .zip(&tables[b].delta)
                .map(|(o, d)| o - d)
                .fold(f64::NEG_INFINITY, f64::max);
            if gap > 1e-3 {
                return Err(CliError::Ordering(format!(
                    "{} exceeds {best} by {gap:.3e}",
                    names[k]
                )));
            }
        }
        println!("{best} dominates all scenarios within 1e-3");
    }
    Ok(())
}

pub fn cmd_refine(common: &Common, levels: usize) -> Result<(), CliError> {
    let s = common.single()?;
    let paths = prepare_outputs(
        &common.out,
        &["convergence.csv", "refine.manifest.json"],
        common.force,
    )?;
    let report = refine(&s.spec, &s.solver, levels).map_err(solver_error(&s))?;
    csvio::write_convergence(&paths[0], &report)?;
    write_manifest(
        &paths[1],
        &manifest(common, "refine", std::slice::from_ref(&s), None),
    )?;
    for l in &report.levels {
        match l.sup_diff {
            Some(d) => println!("h = {:<10} sup diff {d:.3e}  ({:.2}s)", l.h, l.runtime_seconds),
            None => println!("h = {:<10} ({:.2}s)", l.h, l.runtime_seconds),
        }
    }
    println!("observed ratios: {:?}", report.ratios());
    println!("doubling x_max changes delta by {:.3e}", report.truncation_diff);
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve { common, at } => cmd_solve(common, at),
        Command::Simulate {
            common,
            strategy,
            solution,
            at,
        } => cmd_simulate(common, strategy, solution.as_deref(), at),
        Command::Compare {
            common,
            expect_best,
            at,
        } => cmd_compare(common, expect_best.as_deref(), at),
        Command::Refine { common, levels } => cmd_refine(common, *levels),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
