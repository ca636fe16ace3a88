use std::time::Instant;

use crate::portfolio::PortfolioSpec;

use super::{solve, SolverConfig, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct RefineLevel {
    pub h: f64,
    /// Sup-norm change of delta against the previous (coarser) level on the
    /// coarsest grid; `None` for the first level.
    pub sup_diff: Option<f64>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<RefineLevel>,
    /// Sup-norm change of delta on `[0, x_max]` when the truncation point is
    /// doubled at the coarsest step.
    pub truncation_diff: f64,
}

impl ConvergenceReport {
    pub fn diffs(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.sup_diff).collect()
    }

    /// Whether consecutive differences strictly decrease.
    pub fn is_contracting(&self) -> bool {
        self.diffs().windows(2).all(|w| w[1] < w[0])
    }

    /// Observed order ratios `diff_k / diff_{k+1}`.
    pub fn ratios(&self) -> Vec<f64> {
        self.diffs().windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Solves at `h, h/2, …, h/2^(levels−1)` over a common truncation point and
/// compares normalized survival curves on the coarse grid.
pub fn refine(
    spec: &PortfolioSpec,
    config: &SolverConfig,
    levels: usize,
) -> Result<ConvergenceReport, SolverError> {
    if levels < 2 {
        return Err(SolverError::InvalidConfig(format!(
            "refine needs at least 2 levels (got {levels})"
        )));
    }
    config.validate()?;
    let coarse_steps = config.n_steps();
    let x_max = coarse_steps as f64 * config.h;

    let mut out = Vec::with_capacity(levels);
    let mut previous: Option<Vec<f64>> = None;
    for level in 0..levels {
        let factor = 1usize << level;
        let cfg = SolverConfig {
            h: config.h / factor as f64,
            x_max,
            ..config.clone()
        };
        let started = Instant::now();
        let table = solve(spec, &cfg)?;
        let runtime_seconds = started.elapsed().as_secs_f64();
        let coarse: Vec<f64> = (0..=coarse_steps).map(|k| table.delta[k * factor]).collect();
        let sup_diff = previous.as_ref().map(|p| sup_distance(p, &coarse));
        out.push(RefineLevel {
            h: cfg.h,
            sup_diff,
            runtime_seconds,
        });
        previous = Some(coarse);
    }

    let wide = SolverConfig {
        x_max: 2.0 * x_max,
        ..config.clone()
    };
    let base = solve(
        spec,
        &SolverConfig {
            x_max,
            ..config.clone()
        },
    )?;
    let wide = solve(spec, &wide)?;
    let truncation_diff = sup_distance(&base.delta, &wide.delta[..base.delta.len()]);

    Ok(ConvergenceReport {
        levels: out,
        truncation_diff,
    })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
