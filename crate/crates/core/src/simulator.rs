//! Monte Carlo simulation of the controlled surplus under a feedback
//! strategy table, used as an independent check of the solver.
//!
//! Each path draws from its own ChaCha stream (`seed`, stream = path index),
//! so estimates are identical for any number of worker threads.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::portfolio::PortfolioSpec;
use crate::solver::StrategyTable;

/// Two-sided 99% standard normal quantile.
const Z99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("initial surplus {x0} must lie in [0, barrier = {barrier}]")]
    BadInitialSurplus { x0: f64, barrier: f64 },
    #[error("strategy cell starting at {start} has non-positive net premium {premium}")]
    NonPositivePremium { start: f64, premium: f64 },
    #[error("{fraction:.4} of paths hit the time cap (limit 0.01); raise max_time or lower the barrier")]
    TooManyCensored { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Paths reaching this surplus count as surviving.
    pub upper_barrier: f64,
    pub max_time: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.n_paths == 0 {
            return Err(SimulationError::InvalidConfig(
                "n_paths must be at least 1".into(),
            ));
        }
        if !(self.upper_barrier.is_finite() && self.upper_barrier > 0.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "upper_barrier must be positive (got {})",
                self.upper_barrier
            )));
        }
        if !(self.max_time > 0.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "max_time must be positive (got {})",
                self.max_time
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ruined,
    Survived,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub verdict: Verdict,
    pub terminal_time: f64,
    pub terminal_surplus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub x0: f64,
    pub estimate: f64,
    /// Normal-approximation 99% half-width.
    pub half_width: f64,
    pub censored_fraction: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Strategy table with per-cell premiums resolved, ready for path simulation.
#[derive(Debug, Clone)]
pub struct ControlledProcess<'a> {
    spec: &'a PortfolioSpec,
    table: &'a StrategyTable,
    premiums: Vec<f64>,
    /// Cumulative `β_k / β`.
    line_cdf: Vec<f64>,
    beta: f64,
}

impl<'a> ControlledProcess<'a> {
    pub fn new(spec: &'a PortfolioSpec, table: &'a StrategyTable) -> Result<Self, SimulationError> {
        let premiums: Vec<f64> = table.vectors.iter().map(|s| spec.net_premium(s)).collect();
        for (start, premium) in table.breakpoints.iter().zip(&premiums) {
            if !(*premium > 0.0) {
                return Err(SimulationError::NonPositivePremium {
                    start: *start,
                    premium: *premium,
                });
            }
        }
        let mut acc = 0.0;
        let line_cdf = spec
            .weights()
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            spec,
            table,
            premiums,
            line_cdf,
            beta: spec.aggregate_intensity(),
        })
    }

    fn pick_line(&self, u: f64) -> usize {
        self.line_cdf
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.line_cdf.len() - 1)
    }

    /// Simulates one path from `x0` until ruin, the barrier or the time cap.
    ///
    /// Between claims the surplus rises at the premium rate of its current
    /// cell; at each breakpoint the rate is re-read. A claim on line `k` is
    /// reduced by the contract in force at the pre-claim surplus.
    pub fn simulate_path<R: Rng>(&self, x0: f64, config: &SimConfig, rng: &mut R) -> PathOutcome {
        let barrier = config.upper_barrier;
        let mut t = 0.0;
        let mut x = x0;
        let mut pending: Option<f64> = None;
        loop {
            if x >= barrier {
                return PathOutcome {
                    verdict: Verdict::Survived,
                    terminal_time: t,
                    terminal_surplus: x,
                };
            }
            let cell = self.table.cell_index(x).expect("surplus is nonnegative");
            let rate = self.premiums[cell];
            let edge = self
                .table
                .breakpoints
                .get(cell + 1)
                .copied()
                .unwrap_or(f64::INFINITY)
                .min(barrier);
            let to_edge = (edge - x) / rate;
            let wait = match pending {
                Some(w) => w,
                None => -rng.sample::<f64, _>(Open01).ln() / self.beta,
            };
            if wait >= to_edge {
                if t + to_edge > config.max_time {
                    return PathOutcome {
                        verdict: Verdict::Censored,
                        terminal_time: config.max_time,
                        terminal_surplus: x + rate * (config.max_time - t),
                    };
                }
                t += to_edge;
                x = edge;
                pending = Some(wait - to_edge);
                continue;
            }
            if t + wait > config.max_time {
                return PathOutcome {
                    verdict: Verdict::Censored,
                    terminal_time: config.max_time,
                    terminal_surplus: x + rate * (config.max_time - t),
                };
            }
            pending = None;
            t += wait;
            x += rate * wait;
            let line = self.pick_line(rng.sample(Open01));
            let dist = &self.spec.lines()[line].dist;
            let claim = dist.sample(rng.sample(Open01)).expect("open-interval uniform");
            let contract = self.table.lookup(x).expect("surplus is nonnegative")[line];
            x -= contract.apply(claim);
            if x < 0.0 {
                return PathOutcome {
                    verdict: Verdict::Ruined,
                    terminal_time: t,
                    terminal_surplus: x,
                };
            }
        }
    }
}

/// RNG of path `index` for `seed`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_path(
    spec: &PortfolioSpec,
    table: &StrategyTable,
    x0: f64,
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PathOutcome, SimulationError> {
    config.validate()?;
    check_x0(x0, config)?;
    Ok(ControlledProcess::new(spec, table)?.simulate_path(x0, config, rng))
}

fn check_x0(x0: f64, config: &SimConfig) -> Result<(), SimulationError> {
    if !(x0 >= 0.0 && x0 <= config.upper_barrier) {
        return Err(SimulationError::BadInitialSurplus {
            x0,
            barrier: config.upper_barrier,
        });
    }
    Ok(())
}

/// Fraction of surviving paths among uncensored ones, with a 99% half-width.
pub fn estimate_survival(
    spec: &PortfolioSpec,
    table: &StrategyTable,
    x0: f64,
    config: &SimConfig,
) -> Result<SurvivalEstimate, SimulationError> {
    config.validate()?;
    check_x0(x0, config)?;
    let process = ControlledProcess::new(spec, table)?;
    let (survived, censored) = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_stream(config.seed, k);
            match process.simulate_path(x0, config, &mut rng).verdict {
                Verdict::Survived => (1usize, 0usize),
                Verdict::Censored => (0, 1),
                Verdict::Ruined => (0, 0),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let censored_fraction = censored as f64 / config.n_paths as f64;
    if censored_fraction >= 0.01 {
        return Err(SimulationError::TooManyCensored {
            fraction: censored_fraction,
        });
    }
    let effective = (config.n_paths - censored) as f64;
    let estimate = survived as f64 / effective;
    let half_width = Z99 * (estimate * (1.0 - estimate) / effective).sqrt();
    Ok(SurvivalEstimate {
        x0,
        estimate,
        half_width,
        censored_fraction,
        n_paths: config.n_paths,
        seed: config.seed,
    })
}

/// Survival probability of the uncontrolled single-line exponential model,
/// `1 − e^{−η λ x / (1 + η)} / (1 + η)`.
pub fn closed_form_survival_exponential(eta: f64, rate: f64, x: f64) -> f64 {
    1.0 - (-(eta * rate / (1.0 + eta)) * x).exp() / (1.0 + eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ClaimDistribution;
    use crate::portfolio::{LineSpec, StrategyVector};
    use crate::reinsurance::{FamilyChoice, RetainedLoss};
    use approx::assert_abs_diff_eq;
    use rand::rngs::mock::StepRng;

    fn single(family: FamilyChoice) -> PortfolioSpec {
        PortfolioSpec::new(
            vec![LineSpec::new(
                ClaimDistribution::exponential(1.0).unwrap(),
                1.0,
                family,
            )],
            3.0,
            3.0,
        )
        .unwrap()
    }

    fn config(n_paths: usize) -> SimConfig {
        SimConfig {
            n_paths,
            upper_barrier: 60.0,
            max_time: 1e5,
            seed: 42,
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(
            closed_form_survival_exponential(3.0, 1.0, 0.0),
            0.75,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            closed_form_survival_exponential(3.0, 1.0, 1.0),
            0.881908,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            closed_form_survival_exponential(3.0, 1.0, 1e4),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_premium_cells_are_rejected() {
        // η1 = η, so ceding everything above 0 leaves no premium.
        let spec = single(FamilyChoice::Xl);
        let table = StrategyTable::constant(StrategyVector(vec![RetainedLoss::ExcessOfLoss {
            retention: 0.0,
        }]));
        assert!(matches!(
            estimate_survival(&spec, &table, 1.0, &config(10)),
            Err(SimulationError::NonPositivePremium { .. })
        ));
    }

    /// A constant zero stream makes the first waiting time `−ln(2^-54)/β`,
    /// long enough to cross every cell before a claim arrives.
    fn quiet_rng() -> StepRng {
        StepRng::new(0, 0)
    }

    #[test]
    fn drift_reaches_barrier_without_claims() {
        let spec = single(FamilyChoice::FullOnly);
        let table = StrategyTable::constant(StrategyVector::full(1));
        let cfg = SimConfig {
            upper_barrier: 10.0,
            ..config(1)
        };
        let process = ControlledProcess::new(&spec, &table).unwrap();
        let out = process.simulate_path(2.0, &cfg, &mut quiet_rng());
        assert_eq!(out.verdict, Verdict::Survived);
        assert_eq!(out.terminal_surplus, 10.0);
        assert_abs_diff_eq!(out.terminal_time, 8.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn cell_crossings_follow_piecewise_drift() {
        let spec = single(FamilyChoice::Proportional);
        let half = StrategyVector(vec![RetainedLoss::Proportional { b: 0.5 }]);
        let table = StrategyTable::new(vec![0.0, 5.0], vec![half.clone(), StrategyVector::full(1)]).unwrap();
        assert_abs_diff_eq!(spec.net_premium(&half), 2.0, epsilon = 1e-12);
        let cfg = SimConfig {
            upper_barrier: 10.0,
            ..config(1)
        };
        let process = ControlledProcess::new(&spec, &table).unwrap();
        let out = process.simulate_path(1.0, &cfg, &mut quiet_rng());
        assert_eq!(out.verdict, Verdict::Survived);
        assert_abs_diff_eq!(out.terminal_time, 4.0 / 2.0 + 5.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn large_first_claim_ruins() {
        // Full retention and zero initial surplus: ruin at the first claim
        // larger than the premium accrued before it.
        let spec = single(FamilyChoice::FullOnly);
        let table = StrategyTable::constant(StrategyVector::full(1));
        let cfg = config(1);
        let mut ruined = 0;
        for k in 0..200 {
            let mut rng = path_stream(9, k);
            let out = simulate_path(&spec, &table, 0.0, &cfg, &mut rng).unwrap();
            if out.verdict == Verdict::Ruined {
                assert!(out.terminal_surplus < 0.0);
                ruined += 1;
            }
        }
        assert!(ruined > 0);
    }

    #[test]
    fn barrier_start_survives_immediately() {
        let spec = single(FamilyChoice::FullOnly);
        let table = StrategyTable::constant(StrategyVector::full(1));
        let est = estimate_survival(&spec, &table, 60.0, &config(100)).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert!(matches!(
            estimate_survival(&spec, &table, 61.0, &config(100)),
            Err(SimulationError::BadInitialSurplus { .. })
        ));
        let one = estimate_survival(&spec, &table, 1.0, &config(1)).unwrap();
        assert!(one.estimate == 0.0 || one.estimate == 1.0);
    }

    #[test]
    fn no_reinsurance_matches_closed_form() {
        let spec = single(FamilyChoice::FullOnly);
        let table = StrategyTable::constant(StrategyVector::full(1));
        let est = estimate_survival(&spec, &table, 1.0, &config(1_000_000)).unwrap();
        let exact = closed_form_survival_exponential(3.0, 1.0, 1.0);
        // Barrier bias is below 0.25 e^{-45}.
        assert!(
            (est.estimate - exact).abs() <= est.half_width,
            "{} ± {} vs {exact}",
            est.estimate,
            est.half_width
        );
    }

    #[test]
    fn censoring_is_reported() {
        let spec = single(FamilyChoice::FullOnly);
        let table = StrategyTable::constant(StrategyVector::full(1));
        let cfg = SimConfig {
            max_time: 1e-3,
            ..config(100)
        };
        assert!(matches!(
            estimate_survival(&spec, &table, 5.0, &cfg),
            Err(SimulationError::TooManyCensored { .. })
        ));
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let spec = single(FamilyChoice::FullOnly);
        let table = StrategyTable::constant(StrategyVector::full(1));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_survival(&spec, &table, 0.5, &config(20_000)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
