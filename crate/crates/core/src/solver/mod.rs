//! Explicit finite-difference scheme for the optimal survival probability.
//!
//! Starting from `f(0) = 1`, every grid step `s = ih` picks the strategy
//! vector minimizing
//!
//! ```text
//!   β [ f((i−1)h)(1 − P(Z = 0)) − Σ_{j=1..i} f((i−j)h) P((j−1)h < Z ≤ jh) ] / p_R
//! ```
//!
//! with `Z` the aggregate retained claim, and sets
//! `f(ih) = f((i−1)h) + h · slope`. At `i = 0` the sum is empty and `f` is
//! replaced by 1, which is the initial slope. The survival probability is the
//! normalized `f / f(x_max)`.

mod refine;
mod scheme;
mod strategy;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::portfolio::{PortfolioError, PortfolioSpec, StrategyVector};
use crate::reinsurance::FamilyChoice;

pub use refine::{refine, ConvergenceReport, RefineLevel};
pub use scheme::{Scheme, StepChoice};
pub use strategy::{extract_strategy, StrategyTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no admissible strategy at step {step}: every candidate falls below the premium floor")]
    NoAdmissibleStrategy { step: usize },
    #[error("step {step}: selected net premium {premium} gives beta*h/p = {ratio:.3} >= 0.5; reduce h")]
    StepTooLarge { step: usize, premium: f64, ratio: f64 },
    #[error("scheme invariant violated at step {step}: {detail}")]
    InvariantViolation { step: usize, detail: String },
    #[error("strategy is inadmissible: net premium {premium} below floor {floor}")]
    InadmissibleStrategy { premium: f64, floor: f64 },
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InnerMethod {
    /// Full tensor product of per-line candidates.
    Exhaustive,
    /// Dinkelbach iteration on the separable ratio.
    #[default]
    Fractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub h: f64,
    pub x_max: f64,
    /// Grid size for proportional and XL parameters.
    pub resolution: usize,
    /// Grid size per axis for LXL `(M, L)` pairs.
    pub lxl_resolution: usize,
    /// Upper end of retention/limit grids; defaults to `x_max` plus three
    /// claim means.
    pub cap: Option<f64>,
    /// Minimum admissible net premium; defaults to `1e-6` of the gross premium.
    pub premium_floor: Option<f64>,
    pub inner: InnerMethod,
    pub dinkelbach_tol: f64,
    pub dinkelbach_max_iter: usize,
    /// Constrain all lines to one common contract.
    pub shared_contract: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            x_max: 40.0,
            resolution: 41,
            lxl_resolution: 11,
            cap: None,
            premium_floor: None,
            inner: InnerMethod::Fractional,
            dinkelbach_tol: 1e-12,
            dinkelbach_max_iter: 100,
            shared_contract: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("h must be positive (got {})", self.h));
        }
        if !(self.x_max.is_finite() && self.x_max >= 10.0 * self.h) {
            return bad(format!("x_max must be at least 10*h (got {})", self.x_max));
        }
        if self.resolution < 2 || self.lxl_resolution < 2 {
            return bad("resolutions must be at least 2".into());
        }
        if let Some(cap) = self.cap {
            if !(cap.is_finite() && cap > 0.0) {
                return bad(format!("cap must be positive (got {cap})"));
            }
        }
        if !(self.dinkelbach_tol > 0.0) || self.dinkelbach_max_iter == 0 {
            return bad("dinkelbach tolerance and iteration cap must be positive".into());
        }
        Ok(())
    }

    /// Number of steps `N = ⌊x_max / h⌋`.
    pub fn n_steps(&self) -> usize {
        (self.x_max / self.h + 1e-9).floor() as usize
    }
}

/// Truncation point for which the Lundberg bound `e^{-R x}` of the
/// no-reinsurance ruin probability drops below `residual`.
///
/// Returns `None` for portfolios without an adjustment coefficient (heavy
/// tails).
pub fn lundberg_x_max(spec: &PortfolioSpec, residual: f64) -> Option<f64> {
    let pooled = spec.pooled_distribution();
    let upper = pooled.min_rate()?;
    let beta = spec.aggregate_intensity();
    let premium = spec.gross_premium();
    // Root of β (M(r) − 1) − p r on (0, min rate).
    let g = |r: f64| beta * (pooled.mgf(r) - 1.0) - premium * r;
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    (r > 0.0).then(|| (-residual.ln() / r).ceil())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub premium_floor: f64,
    pub min_selected_premium: f64,
    pub dinkelbach_iterations: usize,
    pub exhaustive_fallbacks: usize,
    pub candidates_per_group: Vec<usize>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolutionTable {
    pub h: f64,
    pub families: Vec<FamilyChoice>,
    pub grid: Vec<f64>,
    /// Unnormalized values `f_h(ih)`.
    pub f: Vec<f64>,
    pub slope: Vec<f64>,
    /// `f / f(x_max)`.
    pub delta: Vec<f64>,
    /// Minimizing strategy at each grid point.
    pub strategy: Vec<StrategyVector>,
    /// Net premium of that strategy.
    pub premium: Vec<f64>,
    pub config: SolverConfig,
    pub diagnostics: Diagnostics,
}

impl SolutionTable {
    pub fn n_steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Normalized survival probability at `x`, linear between grid points and
    /// constant past the last one.
    pub fn delta_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.delta[0];
        }
        let pos = x / self.h;
        let k = pos.floor() as usize;
        if k >= self.n_steps() {
            return *self.delta.last().unwrap();
        }
        let t = pos - k as f64;
        self.delta[k] + t * (self.delta[k + 1] - self.delta[k])
    }

    /// Parameter values of line `line` along the grid (first parameter of the
    /// family, e.g. `b` or `M`).
    pub fn parameter_path(&self, line: usize) -> Vec<f64> {
        let family = self.families[line];
        self.strategy
            .iter()
            .map(|s| s[line].params(family).first().copied().unwrap_or(f64::NAN))
            .collect()
    }
}

/// `Σ_{j=1..i} f((i−j)h) P((j−1)h < Z ≤ jh)` for `i = prefix.len()`,
/// evaluated directly from the portfolio (no precomputed kernels).
pub fn convolution(spec: &PortfolioSpec, prefix: &[f64], s: &StrategyVector, h: f64) -> f64 {
    let i = prefix.len();
    (1..=i)
        .map(|j| prefix[i - j] * spec.mixture_bin_mass(s, j, h))
        .sum()
}

/// Scheme objective of one strategy vector at step `i = prefix.len()`.
pub fn step_objective(
    spec: &PortfolioSpec,
    prefix: &[f64],
    s: &StrategyVector,
    h: f64,
    floor: f64,
) -> Result<f64, SolverError> {
    let premium = spec.net_premium(s);
    if premium < floor {
        return Err(SolverError::InadmissibleStrategy { premium, floor });
    }
    let beta = spec.aggregate_intensity();
    let f_prev = prefix.last().copied().unwrap_or(1.0);
    let numerator = f_prev * (1.0 - spec.mixture_zero_mass(s)) - convolution(spec, prefix, s, h);
    Ok(beta * numerator / premium)
}

/// Slope at `x = 0`: `inf β (1 − P(Z = 0)) / p_R`.
pub fn initial_slope(
    spec: &PortfolioSpec,
    config: &SolverConfig,
) -> Result<(f64, StrategyVector), SolverError> {
    let scheme = Scheme::new(spec, config)?;
    let r = scheme.minimize_step(&[], config.inner)?;
    Ok((r.value, scheme.strategy(&r.indices)))
}

/// Single grid step for callers holding their own prefix.
pub fn minimize_step(
    spec: &PortfolioSpec,
    prefix: &[f64],
    config: &SolverConfig,
) -> Result<(f64, StrategyVector), SolverError> {
    let scheme = Scheme::new(spec, config)?;
    let r = scheme.minimize_step(prefix, config.inner)?;
    Ok((r.value, scheme.strategy(&r.indices)))
}

pub fn solve(spec: &PortfolioSpec, config: &SolverConfig) -> Result<SolutionTable, SolverError> {
    let scheme = Scheme::new(spec, config)?;
    scheme.solve(spec, config)
}

impl Scheme {
    /// Runs the full recursion, checking the scheme's monotonicity and growth
    /// bounds at every step.
    pub fn solve(&self, spec: &PortfolioSpec, config: &SolverConfig) -> Result<SolutionTable, SolverError> {
        let started = Instant::now();
        let n = self.n_steps();
        let h = self.h;
        let beta = self.beta;

        let mut f = Vec::with_capacity(n + 1);
        let mut slope = Vec::with_capacity(n + 1);
        let mut premium = Vec::with_capacity(n + 1);
        let mut choices = Vec::with_capacity(n + 1);
        let mut diagnostics = Diagnostics {
            premium_floor: self.floor,
            min_selected_premium: f64::INFINITY,
            candidates_per_group: self.candidate_counts(),
            ..Diagnostics::default()
        };

        let record = |r: &StepChoice, diagnostics: &mut Diagnostics| {
            diagnostics.dinkelbach_iterations += r.iterations;
            diagnostics.exhaustive_fallbacks += r.fell_back as usize;
        };

        let first = self.minimize_step(&[], config.inner)?;
        record(&first, &mut diagnostics);
        f.push(1.0);
        slope.push(first.value.max(0.0));
        premium.push(first.premium);
        choices.push(first.indices);

        let mut p_min = f64::INFINITY;
        for i in 1..=n {
            let r = self.minimize_step(&f, config.inner)?;
            record(&r, &mut diagnostics);
            let f_prev = f[i - 1];
            if r.value < -1e-12 * f_prev {
                return Err(SolverError::InvariantViolation {
                    step: i,
                    detail: format!("negative slope {}", r.value),
                });
            }
            let ratio = beta * h / r.premium;
            if ratio >= 0.5 {
                return Err(SolverError::StepTooLarge {
                    step: i,
                    premium: r.premium,
                    ratio,
                });
            }
            let s = r.value.max(0.0);
            let next = f_prev + h * s;
            p_min = p_min.min(r.premium);
            let bound = (beta * i as f64 * h / p_min).exp();
            if next > bound * (1.0 + 1e-12) {
                return Err(SolverError::InvariantViolation {
                    step: i,
                    detail: format!("f = {next} exceeds growth bound {bound}"),
                });
            }
            f.push(next);
            slope.push(s);
            premium.push(r.premium);
            choices.push(r.indices);
        }
        diagnostics.min_selected_premium = p_min.min(premium[0]);

        let f_end = f[n];
        let delta: Vec<f64> = f.iter().map(|v| v / f_end).collect();
        for i in 1..=n {
            let rise = (delta[i] - delta[i - 1]) / h;
            let lipschitz = beta / premium[i] * f[i] / f_end;
            if rise > lipschitz * (1.0 + 1e-9) + 1e-15 {
                return Err(SolverError::InvariantViolation {
                    step: i,
                    detail: format!("delta rises at {rise}, above Lipschitz bound {lipschitz}"),
                });
            }
        }
        if delta.iter().any(|d| !(0.0..=1.0).contains(d)) || delta[n] != 1.0 {
            return Err(SolverError::InvariantViolation {
                step: n,
                detail: "normalized delta outside [0, 1]".into(),
            });
        }

        diagnostics.runtime_seconds = started.elapsed().as_secs_f64();
        Ok(SolutionTable {
            h,
            families: spec.lines().iter().map(|l| l.family).collect(),
            grid: (0..=n).map(|i| i as f64 * h).collect(),
            f,
            slope,
            delta,
            strategy: choices.iter().map(|c| self.strategy(c)).collect(),
            premium,
            config: config.clone(),
            diagnostics,
        })
    }
}
