//! Scenario files: TOML with top-level loadings, optional `[solver]` and
//! `[simulation]` tables and one `[[lines]]` entry per business line.
//!
//! ```toml
//! name = "state_viii"
//! eta = 3.0
//! eta1 = 3.5
//!
//! [solver]
//! h = 0.02
//! x_max = 20.0
//!
//! [[lines]]
//! intensity = 1.0
//! family = "xl"
//! distribution = { type = "exponential", rate = 0.5 }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::distributions::ClaimDistribution;
use crate::portfolio::{LineSpec, PortfolioSpec};
use crate::reinsurance::FamilyChoice;
use crate::simulator::SimConfig;
use crate::solver::{lundberg_x_max, InnerMethod, SolverConfig};

use super::CliError;

/// Ruin-probability level used to pick `x_max` when a config leaves it out.
pub const DEFAULT_TRUNCATION_RESIDUAL: f64 = 1e-3;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    eta: f64,
    eta1: f64,
    #[serde(default)]
    shared_contract: bool,
    /// Replace all lines by their pooled mixture line.
    #[serde(default)]
    pooled: bool,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    simulation: RawSimulation,
    lines: Vec<RawLine>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    intensity: f64,
    family: FamilyChoice,
    distribution: ClaimDistribution,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    h: Option<f64>,
    x_max: Option<f64>,
    resolution: Option<usize>,
    lxl_resolution: Option<usize>,
    cap: Option<f64>,
    premium_floor: Option<f64>,
    inner: Option<InnerMethod>,
    dinkelbach_tol: Option<f64>,
    dinkelbach_max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    n_paths: Option<usize>,
    /// Defaults to 1.5 times `x_max`.
    upper_barrier: Option<f64>,
    max_time: Option<f64>,
    seed: Option<u64>,
    x0: Option<Vec<f64>>,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub name: String,
    pub spec: PortfolioSpec,
    pub solver: SolverConfig,
    pub simulation: SimConfig,
    /// Initial surplus levels for `simulate`, if the file lists any.
    pub x0: Option<Vec<f64>>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub h: Option<f64>,
    pub x_max: Option<f64>,
    pub resolution: Option<usize>,
    pub inner: Option<InnerMethod>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

pub fn parse_config(path: &Path) -> Result<Scenario, CliError> {
    parse_config_with(path, &Overrides::default())
}

pub fn parse_config_with(path: &Path, overrides: &Overrides) -> Result<Scenario, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, path, overrides)
}

pub fn parse_config_str(text: &str, path: &Path, overrides: &Overrides) -> Result<Scenario, CliError> {
    let invalid = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let raw: RawConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;

    let lines = raw
        .lines
        .into_iter()
        .map(|l| LineSpec::new(l.distribution, l.intensity, l.family))
        .collect();
    let mut spec = PortfolioSpec::new(lines, raw.eta, raw.eta1).map_err(|e| invalid(e.to_string()))?;
    let mut shared_contract = raw.shared_contract;
    if raw.pooled {
        let family = spec.lines()[0].family;
        if spec.lines().iter().any(|l| l.family != family) {
            return Err(invalid(
                "pooled requires every line to use the same family".into(),
            ));
        }
        spec = spec.pooled(family);
        shared_contract = false;
    }

    let s = raw.solver;
    let x_max = match overrides.x_max.or(s.x_max) {
        Some(x) => x,
        None => lundberg_x_max(&spec, DEFAULT_TRUNCATION_RESIDUAL)
            .ok_or_else(|| invalid("solver.x_max is required for heavy-tailed portfolios".into()))?,
    };
    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        h: overrides.h.or(s.h).unwrap_or(defaults.h),
        x_max,
        resolution: overrides
            .resolution
            .or(s.resolution)
            .unwrap_or(defaults.resolution),
        lxl_resolution: s.lxl_resolution.unwrap_or(defaults.lxl_resolution),
        cap: s.cap,
        premium_floor: s.premium_floor,
        inner: overrides.inner.or(s.inner).unwrap_or(defaults.inner),
        dinkelbach_tol: s.dinkelbach_tol.unwrap_or(defaults.dinkelbach_tol),
        dinkelbach_max_iter: s.dinkelbach_max_iter.unwrap_or(defaults.dinkelbach_max_iter),
        shared_contract,
    };
    solver.validate().map_err(|e| invalid(format!("[solver] {e}")))?;

    let m = raw.simulation;
    let simulation = SimConfig {
        n_paths: overrides.paths.or(m.n_paths).unwrap_or(100_000),
        upper_barrier: m.upper_barrier.unwrap_or(1.5 * x_max),
        max_time: m.max_time.unwrap_or(1e4),
        seed: overrides.seed.or(m.seed).unwrap_or(0),
    };
    simulation
        .validate()
        .map_err(|e| invalid(format!("[simulation] {e}")))?;
    if let Some(x0) = &m.x0 {
        // The barrier check happens at simulation time, after overrides.
        if let Some(bad) = x0.iter().find(|x| !(**x >= 0.0)) {
            return Err(invalid(format!("[simulation] x0 entry {bad} is negative")));
        }
    }

    let name = raw.name.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(Scenario {
        path: path.to_path_buf(),
        name,
        spec,
        solver,
        simulation,
        x0: m.x0,
    })
}
