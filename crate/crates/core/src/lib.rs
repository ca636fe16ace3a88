//! Optimal dynamic reinsurance for multi-line Cramér-Lundberg portfolios.
//!
//! The crate computes the maximal survival probability of an insurer running
//! several lines of business, each protected by its own proportional, excess
//! of loss or limited excess of loss contract whose parameters may depend on
//! the current surplus. The value function is obtained from an explicit
//! finite-difference scheme for the associated HJB equation ([`solver`]) and
//! can be checked against a Monte Carlo simulation of the controlled surplus
//! ([`simulator`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distributions;
pub mod portfolio;
pub mod reinsurance;
pub mod simulator;
pub mod solver;

pub use distributions::ClaimDistribution;
pub use portfolio::{LineSpec, PortfolioSpec, StrategyVector};
pub use reinsurance::{FamilyChoice, RetainedLoss};
pub use solver::{solve, InnerMethod, SolutionTable, SolverConfig, StrategyTable};
