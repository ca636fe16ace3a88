//! Retained-loss functions and the law of the retained claim `R(U)`.
//!
//! Unlimited retention levels and layer limits are stored as
//! `f64::INFINITY`; every formula below treats them explicitly rather than
//! relying on IEEE arithmetic, so `Full`-equivalent contracts are exact.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{ClaimDistribution, DistributionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReinsuranceError {
    #[error("retained proportion must lie in [0, 1] (got {0})")]
    BadProportion(f64),
    #[error("retention level must be nonnegative (got {0})")]
    BadRetention(f64),
    #[error("layer limit must be nonnegative (got {0})")]
    BadLimit(f64),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Family of retained-loss functions allowed on one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    Proportional,
    Xl,
    Lxl,
    #[serde(rename = "none")]
    FullOnly,
}

impl FamilyChoice {
    /// Column names used for this family's parameters in CSV output.
    pub fn param_names(self, line: usize) -> Vec<String> {
        let k = line + 1;
        match self {
            FamilyChoice::Proportional => vec![format!("b{k}")],
            FamilyChoice::Xl => vec![format!("M{k}")],
            FamilyChoice::Lxl => vec![format!("M{k}"), format!("L{k}")],
            FamilyChoice::FullOnly => Vec::new(),
        }
    }
}

impl fmt::Display for FamilyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyChoice::Proportional => "proportional",
            FamilyChoice::Xl => "xl",
            FamilyChoice::Lxl => "lxl",
            FamilyChoice::FullOnly => "none",
        };
        f.write_str(s)
    }
}

/// The part of a claim kept by the insurer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetainedLoss {
    /// `R(a) = b a`.
    Proportional { b: f64 },
    /// `R(a) = min(a, M)`.
    ExcessOfLoss { retention: f64 },
    /// `R(a) = min(a, M) + (a - M - L)^+`.
    LimitedExcessOfLoss { retention: f64, limit: f64 },
    /// `R(a) = a`.
    Full,
}

impl RetainedLoss {
    pub fn proportional(b: f64) -> Result<Self, ReinsuranceError> {
        if !(0.0..=1.0).contains(&b) {
            return Err(ReinsuranceError::BadProportion(b));
        }
        Ok(RetainedLoss::Proportional { b })
    }

    pub fn excess_of_loss(retention: f64) -> Result<Self, ReinsuranceError> {
        if retention.is_nan() || retention < 0.0 {
            return Err(ReinsuranceError::BadRetention(retention));
        }
        Ok(RetainedLoss::ExcessOfLoss { retention })
    }

    pub fn limited_excess_of_loss(retention: f64, limit: f64) -> Result<Self, ReinsuranceError> {
        if retention.is_nan() || retention < 0.0 {
            return Err(ReinsuranceError::BadRetention(retention));
        }
        if limit.is_nan() || limit < 0.0 {
            return Err(ReinsuranceError::BadLimit(limit));
        }
        Ok(RetainedLoss::LimitedExcessOfLoss { retention, limit })
    }

    /// Whether this contract retains every claim in full.
    pub fn is_full(&self) -> bool {
        match *self {
            RetainedLoss::Full => true,
            RetainedLoss::Proportional { b } => b == 1.0,
            RetainedLoss::ExcessOfLoss { retention } => retention.is_infinite(),
            RetainedLoss::LimitedExcessOfLoss { retention, limit } => retention.is_infinite() || limit == 0.0,
        }
    }

    /// Whether the contract is a member of `family`. `Full` belongs to every family.
    pub fn belongs_to(&self, family: FamilyChoice) -> bool {
        matches!(
            (self, family),
            (RetainedLoss::Full, _)
                | (RetainedLoss::Proportional { .. }, FamilyChoice::Proportional)
                | (RetainedLoss::ExcessOfLoss { .. }, FamilyChoice::Xl)
                | (RetainedLoss::LimitedExcessOfLoss { .. }, FamilyChoice::Lxl)
        )
    }

    /// Parameter values in the order of [`FamilyChoice::param_names`].
    pub fn params(&self, family: FamilyChoice) -> Vec<f64> {
        match (family, *self) {
            (FamilyChoice::FullOnly, _) => Vec::new(),
            (FamilyChoice::Proportional, RetainedLoss::Proportional { b }) => vec![b],
            (FamilyChoice::Proportional, _) => vec![1.0],
            (FamilyChoice::Xl, RetainedLoss::ExcessOfLoss { retention }) => vec![retention],
            (FamilyChoice::Xl, _) => vec![f64::INFINITY],
            (FamilyChoice::Lxl, RetainedLoss::LimitedExcessOfLoss { retention, limit }) => {
                vec![retention, limit]
            }
            (FamilyChoice::Lxl, _) => vec![f64::INFINITY, 0.0],
        }
    }

    /// Rebuilds a contract from its CSV parameters.
    pub fn from_params(family: FamilyChoice, params: &[f64]) -> Result<Self, ReinsuranceError> {
        match family {
            FamilyChoice::FullOnly => Ok(RetainedLoss::Full),
            FamilyChoice::Proportional => RetainedLoss::proportional(params[0]),
            FamilyChoice::Xl => RetainedLoss::excess_of_loss(params[0]),
            FamilyChoice::Lxl => RetainedLoss::limited_excess_of_loss(params[0], params[1]),
        }
    }

    pub fn apply(&self, claim: f64) -> f64 {
        match *self {
            RetainedLoss::Full => claim,
            RetainedLoss::Proportional { b } => b * claim,
            RetainedLoss::ExcessOfLoss { retention } => claim.min(retention),
            RetainedLoss::LimitedExcessOfLoss { retention, limit } => {
                if retention.is_infinite() {
                    claim
                } else if claim <= retention + limit {
                    claim.min(retention)
                } else {
                    (claim - limit).max(retention)
                }
            }
        }
    }

    /// `E[U - R(U)]`, the expected ceded part of one claim.
    pub fn ceded_mean(&self, dist: &ClaimDistribution) -> f64 {
        match *self {
            RetainedLoss::Full => 0.0,
            RetainedLoss::Proportional { b } => (1.0 - b) * dist.mean(),
            RetainedLoss::ExcessOfLoss { retention } => {
                if retention.is_infinite() {
                    0.0
                } else {
                    dist.stop_loss(retention, f64::INFINITY)
                        .expect("validated retention")
                }
            }
            RetainedLoss::LimitedExcessOfLoss { retention, limit } => {
                if retention.is_infinite() || limit == 0.0 {
                    0.0
                } else {
                    dist.stop_loss(retention, retention + limit)
                        .expect("validated retention")
                }
            }
        }
    }

    /// `P(R(U) > r)` for `r >= 0`.
    pub fn retained_survival(&self, dist: &ClaimDistribution, r: f64) -> f64 {
        match *self {
            RetainedLoss::Full => dist.survival(r),
            RetainedLoss::Proportional { b } => {
                if b == 0.0 {
                    if r < 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    dist.survival(r / b)
                }
            }
            RetainedLoss::ExcessOfLoss { retention } => {
                if r < retention {
                    dist.survival(r)
                } else {
                    0.0
                }
            }
            RetainedLoss::LimitedExcessOfLoss { retention, limit } => {
                if r < retention {
                    dist.survival(r)
                } else if limit.is_infinite() {
                    0.0
                } else {
                    dist.survival(r + limit)
                }
            }
        }
    }

    /// `P(lo < R(U) <= hi)`; an atom on `hi` belongs to the interval.
    pub fn retained_interval_mass(
        &self,
        dist: &ClaimDistribution,
        lo: f64,
        hi: f64,
    ) -> Result<f64, ReinsuranceError> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(DistributionError::ReversedInterval { lo, hi }.into());
        }
        if lo < 0.0 {
            return Err(DistributionError::NegativeLimit(lo).into());
        }
        Ok((self.retained_survival(dist, lo) - self.retained_survival(dist, hi)).max(0.0))
    }

    /// `P(R(U) = 0)`.
    pub fn retained_zero_mass(&self, dist: &ClaimDistribution) -> f64 {
        1.0 - self.retained_survival(dist, 0.0)
    }
}

impl fmt::Display for RetainedLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RetainedLoss::Full => write!(f, "full"),
            RetainedLoss::Proportional { b } => write!(f, "proportional(b={b})"),
            RetainedLoss::ExcessOfLoss { retention } => write!(f, "xl(M={retention})"),
            RetainedLoss::LimitedExcessOfLoss { retention, limit } => {
                write!(f, "lxl(M={retention}, L={limit})")
            }
        }
    }
}

fn uniform_grid(resolution: usize, upper: f64) -> impl Iterator<Item = f64> {
    let steps = (resolution - 1) as f64;
    (0..resolution).map(move |k| {
        if k + 1 == resolution {
            upper
        } else {
            upper * k as f64 / steps
        }
    })
}

/// Discretized control set for one family, in ascending parameter order with
/// the full-retention member last.
///
/// * proportional: `b` on a uniform grid over `[0, 1]`;
/// * XL: `M` on a uniform grid over `[0, cap]`, then `M = ∞`;
/// * LXL: `M` on the grid, `L` on the grid without `0` followed by `L = ∞`,
///   then the single full-retention member `(M, L) = (∞, 0)`. `L = 0` is full
///   retention for every `M`, so it is listed once.
pub fn parameter_candidates(family: FamilyChoice, resolution: usize, cap: f64) -> Vec<RetainedLoss> {
    let resolution = resolution.max(2);
    match family {
        FamilyChoice::FullOnly => vec![RetainedLoss::Full],
        FamilyChoice::Proportional => uniform_grid(resolution, 1.0)
            .map(|b| RetainedLoss::Proportional { b })
            .collect(),
        FamilyChoice::Xl => uniform_grid(resolution, cap)
            .chain(std::iter::once(f64::INFINITY))
            .map(|retention| RetainedLoss::ExcessOfLoss { retention })
            .collect(),
        FamilyChoice::Lxl => {
            let mut out = Vec::with_capacity(resolution * resolution + 1);
            for retention in uniform_grid(resolution, cap) {
                for limit in uniform_grid(resolution, cap)
                    .skip(1)
                    .chain(std::iter::once(f64::INFINITY))
                {
                    out.push(RetainedLoss::LimitedExcessOfLoss { retention, limit });
                }
            }
            out.push(RetainedLoss::LimitedExcessOfLoss {
                retention: f64::INFINITY,
                limit: 0.0,
            });
            out
        }
    }
}
