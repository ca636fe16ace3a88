//! Multi-line portfolio: per-line Poisson intensities and claim laws, the
//! expected-value premium algebra and the mixture law of the aggregate
//! retained claim.

use thiserror::Error;

use crate::distributions::{ClaimDistribution, DistributionError};
use crate::reinsurance::{FamilyChoice, RetainedLoss};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("portfolio has no lines")]
    NoLines,
    #[error("lines[{line}].intensity must be positive and finite (got {value})")]
    BadIntensity { line: usize, value: f64 },
    #[error("lines[{line}].distribution: {source}")]
    BadDistribution {
        line: usize,
        #[source]
        source: DistributionError,
    },
    #[error("eta must be positive and finite (got {0})")]
    BadLoading(f64),
    #[error("eta1 ({eta1}) must be at least eta ({eta})")]
    ReinsurerLoading { eta: f64, eta1: f64 },
    #[error("strategy has {got} entries for {expected} lines")]
    StrategyArity { expected: usize, got: usize },
    #[error("strategy entry {line} ({contract}) is not in family {family}")]
    WrongFamily {
        line: usize,
        contract: RetainedLoss,
        family: FamilyChoice,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    pub dist: ClaimDistribution,
    pub intensity: f64,
    pub family: FamilyChoice,
}

impl LineSpec {
    pub fn new(dist: ClaimDistribution, intensity: f64, family: FamilyChoice) -> Self {
        Self {
            dist,
            intensity,
            family,
        }
    }
}

/// One retained-loss function per line.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyVector(pub Vec<RetainedLoss>);

impl StrategyVector {
    pub fn full(lines: usize) -> Self {
        StrategyVector(vec![RetainedLoss::Full; lines])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RetainedLoss> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for StrategyVector {
    type Output = RetainedLoss;

    fn index(&self, i: usize) -> &RetainedLoss {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec {
    lines: Vec<LineSpec>,
    eta: f64,
    eta1: f64,
}

impl PortfolioSpec {
    pub fn new(lines: Vec<LineSpec>, eta: f64, eta1: f64) -> Result<Self, PortfolioError> {
        if lines.is_empty() {
            return Err(PortfolioError::NoLines);
        }
        for (line, l) in lines.iter().enumerate() {
            if !(l.intensity.is_finite() && l.intensity > 0.0) {
                return Err(PortfolioError::BadIntensity {
                    line,
                    value: l.intensity,
                });
            }
            l.dist
                .validate()
                .map_err(|source| PortfolioError::BadDistribution { line, source })?;
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(PortfolioError::BadLoading(eta));
        }
        if eta1.is_nan() || eta1 < eta || eta1.is_infinite() {
            return Err(PortfolioError::ReinsurerLoading { eta, eta1 });
        }
        Ok(Self { lines, eta, eta1 })
    }

    pub fn lines(&self) -> &[LineSpec] {
        &self.lines
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    /// Total claim arrival intensity `β = Σ β_i`.
    pub fn aggregate_intensity(&self) -> f64 {
        self.lines.iter().map(|l| l.intensity).sum()
    }

    /// Mixture weight `β_i / β` of each line.
    pub fn weights(&self) -> Vec<f64> {
        let beta = self.aggregate_intensity();
        self.lines.iter().map(|l| l.intensity / beta).collect()
    }

    /// `Σ_k (1 + η) β_k μ_k`.
    pub fn gross_premium(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| (1.0 + self.eta) * l.intensity * l.dist.mean())
            .sum()
    }

    /// Reinsurance premium charged for ceding `contract` on `line`.
    pub fn line_reinsurance_cost(&self, line: usize, contract: &RetainedLoss) -> f64 {
        let l = &self.lines[line];
        (1.0 + self.eta1) * l.intensity * contract.ceded_mean(&l.dist)
    }

    /// Premium income net of reinsurance, the drift of the controlled surplus.
    /// May be negative.
    pub fn net_premium(&self, s: &StrategyVector) -> f64 {
        let ceded: f64 = s
            .iter()
            .enumerate()
            .map(|(i, r)| self.line_reinsurance_cost(i, r))
            .sum();
        self.gross_premium() - ceded
    }

    pub fn check_strategy(&self, s: &StrategyVector) -> Result<(), PortfolioError> {
        if s.len() != self.n_lines() {
            return Err(PortfolioError::StrategyArity {
                expected: self.n_lines(),
                got: s.len(),
            });
        }
        for (line, (r, l)) in s.iter().zip(&self.lines).enumerate() {
            if !r.belongs_to(l.family) {
                return Err(PortfolioError::WrongFamily {
                    line,
                    contract: *r,
                    family: l.family,
                });
            }
        }
        Ok(())
    }

    /// `P((j-1)h < Z <= jh)` for the aggregate retained claim `Z`.
    pub fn mixture_bin_mass(&self, s: &StrategyVector, j: usize, h: f64) -> f64 {
        let (lo, hi) = ((j - 1) as f64 * h, j as f64 * h);
        let beta = self.aggregate_intensity();
        self.lines
            .iter()
            .zip(s.iter())
            .map(|(l, r)| {
                l.intensity / beta
                    * r.retained_interval_mass(&l.dist, lo, hi)
                        .expect("ordered nonnegative bin")
            })
            .sum()
    }

    /// `P(Z = 0)` for the aggregate retained claim.
    pub fn mixture_zero_mass(&self, s: &StrategyVector) -> f64 {
        let beta = self.aggregate_intensity();
        self.lines
            .iter()
            .zip(s.iter())
            .map(|(l, r)| l.intensity / beta * r.retained_zero_mass(&l.dist))
            .sum()
    }

    /// `P(Z > x)` for the aggregate retained claim.
    pub fn mixture_tail(&self, s: &StrategyVector, x: f64) -> f64 {
        let beta = self.aggregate_intensity();
        self.lines
            .iter()
            .zip(s.iter())
            .map(|(l, r)| l.intensity / beta * r.retained_survival(&l.dist, x))
            .sum()
    }

    /// Inclusive floor: `net_premium >= floor`.
    pub fn admissible(&self, s: &StrategyVector, floor: f64) -> bool {
        self.net_premium(s) >= floor
    }

    /// Claim law of the pooled portfolio, `Σ (β_i / β) F_i`.
    pub fn pooled_distribution(&self) -> ClaimDistribution {
        if self.lines.len() == 1 {
            return self.lines[0].dist.clone();
        }
        ClaimDistribution::Mixture {
            weights: self.weights(),
            components: self.lines.iter().map(|l| l.dist.clone()).collect(),
        }
    }

    /// The one-contract-for-all-lines model: a single synthetic line with the
    /// pooled claim law, the aggregate intensity and the given family.
    pub fn pooled(&self, family: FamilyChoice) -> PortfolioSpec {
        let line = LineSpec::new(self.pooled_distribution(), self.aggregate_intensity(), family);
        PortfolioSpec {
            lines: vec![line],
            eta: self.eta,
            eta1: self.eta1,
        }
    }

    /// Same lines with every family replaced.
    pub fn with_families(&self, families: &[FamilyChoice]) -> PortfolioSpec {
        let lines = self
            .lines
            .iter()
            .zip(families)
            .map(|(l, f)| LineSpec::new(l.dist.clone(), l.intensity, *f))
            .collect();
        PortfolioSpec {
            lines,
            eta: self.eta,
            eta1: self.eta1,
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn intensities() {
        assert_eq!(example1(FamilyChoice::Proportional).aggregate_intensity(), 44.0);
        let one = single_exponential(1.0, 5.0, 1.0, 1.0, FamilyChoice::FullOnly);
        assert_eq!(one.aggregate_intensity(), 5.0);
        let e = ClaimDistribution::exponential(1.0).unwrap();
        let two = PortfolioSpec::new(
            vec![
                LineSpec::new(e.clone(), 2.0, FamilyChoice::Xl),
                LineSpec::new(e, 2.0, FamilyChoice::Xl),
            ],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(two.aggregate_intensity(), 4.0);
    }

    #[test]
    fn premiums() {
        let p = example1(FamilyChoice::Proportional);
        let expected = 4.0 * (1.0 / 0.15 + 13.0 / 0.8 + 30.0 / 2.0);
        assert_abs_diff_eq!(p.gross_premium(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(p.gross_premium(), 151.667, epsilon = 1e-3);
        let unit = single_exponential(1.0, 1.0, 1.0, 1.0, FamilyChoice::FullOnly);
        assert_eq!(unit.gross_premium(), 2.0);

        assert_eq!(p.net_premium(&StrategyVector::full(3)), p.gross_premium());
        let cede_all = StrategyVector(vec![RetainedLoss::Proportional { b: 0.0 }; 3]);
        assert_abs_diff_eq!(p.net_premium(&cede_all), -0.5 * expected / 4.0, epsilon = 1e-10);
        assert!(!p.admissible(&cede_all, 1e-6));

        let xl = single_exponential(1.0, 1.0, 3.0, 3.5, FamilyChoice::Xl);
        let s = StrategyVector(vec![RetainedLoss::ExcessOfLoss { retention: 2.0 }]);
        assert_abs_diff_eq!(xl.net_premium(&s), 4.0 - 4.5 * (-2.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(xl.net_premium(&s), 3.391, epsilon = 1e-3);
    }

    #[test]
    fn admissibility_floor_is_inclusive() {
        let p = example1(FamilyChoice::Proportional);
        let full = StrategyVector::full(3);
        let g = p.gross_premium();
        assert!(p.admissible(&full, g));
        assert!(p.admissible(&full, 1.0));
        assert!(!p.admissible(&full, g * (1.0 + 1e-12)));
    }

    #[test]
    fn zero_masses() {
        let p = example1(FamilyChoice::Xl);
        assert_eq!(p.mixture_zero_mass(&StrategyVector::full(3)), 0.0);
        let s = StrategyVector(vec![
            RetainedLoss::ExcessOfLoss { retention: 0.0 },
            RetainedLoss::ExcessOfLoss {
                retention: f64::INFINITY,
            },
            RetainedLoss::ExcessOfLoss {
                retention: f64::INFINITY,
            },
        ]);
        assert_abs_diff_eq!(p.mixture_zero_mass(&s), 1.0 / 44.0, epsilon = 1e-15);
        let q = example1(FamilyChoice::Proportional);
        let cede_all = StrategyVector(vec![RetainedLoss::Proportional { b: 0.0 }; 3]);
        assert_eq!(q.mixture_zero_mass(&cede_all), 1.0);
    }

    #[test]
    fn bin_masses() {
        let one = single_exponential(0.7, 3.0, 1.0, 1.5, FamilyChoice::Xl);
        let r = RetainedLoss::ExcessOfLoss { retention: 1.1 };
        let s = StrategyVector(vec![r]);
        for j in 1..20 {
            let direct = r
                .retained_interval_mass(&one.lines()[0].dist, (j - 1) as f64 * 0.1, j as f64 * 0.1)
                .unwrap();
            assert_abs_diff_eq!(one.mixture_bin_mass(&s, j, 0.1), direct, epsilon = 1e-16);
        }

        let e = ClaimDistribution::exponential(0.7).unwrap();
        let two = PortfolioSpec::new(
            vec![
                LineSpec::new(e.clone(), 1.5, FamilyChoice::Xl),
                LineSpec::new(e, 1.5, FamilyChoice::Xl),
            ],
            1.0,
            1.5,
        )
        .unwrap();
        let s2 = StrategyVector(vec![r, r]);
        for j in 1..20 {
            assert_abs_diff_eq!(
                two.mixture_bin_mass(&s2, j, 0.1),
                one.mixture_bin_mass(&s, j, 0.1),
                epsilon = 1e-15
            );
        }

        let p = example1(FamilyChoice::FullOnly);
        let full = StrategyVector::full(3);
        let h = 0.05;
        let bins = 2000;
        let total: f64 = p.mixture_zero_mass(&full)
            + (1..=bins).map(|j| p.mixture_bin_mass(&full, j, h)).sum::<f64>()
            + p.mixture_tail(&full, bins as f64 * h);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn validation() {
        let e = ClaimDistribution::exponential(1.0).unwrap();
        let line = LineSpec::new(e.clone(), 1.0, FamilyChoice::Xl);
        assert_eq!(PortfolioSpec::new(vec![], 1.0, 1.0), Err(PortfolioError::NoLines));
        assert!(matches!(
            PortfolioSpec::new(vec![line.clone()], 3.0, 2.0),
            Err(PortfolioError::ReinsurerLoading { .. })
        ));
        assert!(matches!(
            PortfolioSpec::new(vec![LineSpec::new(e, 0.0, FamilyChoice::Xl)], 3.0, 3.0),
            Err(PortfolioError::BadIntensity { line: 0, .. })
        ));
        assert!(PortfolioSpec::new(vec![line.clone()], 0.0, 1.0).is_err());
        let p = PortfolioSpec::new(vec![line], 1.0, 1.0).unwrap();
        let wrong = StrategyVector(vec![RetainedLoss::Proportional { b: 0.5 }]);
        assert!(matches!(
            p.check_strategy(&wrong),
            Err(PortfolioError::WrongFamily { .. })
        ));
        assert!(p.check_strategy(&StrategyVector::full(1)).is_ok());
        assert!(p.check_strategy(&StrategyVector::full(2)).is_err());
    }

    #[test]
    fn pooled_model() {
        let p = example1(FamilyChoice::Proportional);
        let pooled = p.pooled(FamilyChoice::Proportional);
        assert_eq!(pooled.n_lines(), 1);
        assert_eq!(pooled.aggregate_intensity(), 44.0);
        assert_abs_diff_eq!(pooled.gross_premium(), p.gross_premium(), epsilon = 1e-10);
        // Sharing one proportional contract equals ceding on the pooled law.
        let b = 0.6;
        let shared = StrategyVector(vec![RetainedLoss::Proportional { b }; 3]);
        let single = StrategyVector(vec![RetainedLoss::Proportional { b }]);
        assert_abs_diff_eq!(
            p.net_premium(&shared),
            pooled.net_premium(&single),
            epsilon = 1e-10
        );
        for j in 1..50 {
            assert_abs_diff_eq!(
                p.mixture_bin_mass(&shared, j, 0.1),
                pooled.mixture_bin_mass(&single, j, 0.1),
                epsilon = 1e-14
            );
        }
    }

    proptest! {
        #[test]
        fn ceding_more_never_raises_premium(b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0, m1 in 0.0f64..30.0, m2 in 0.0f64..30.0, line in 0usize..3) {
            let p = example1(FamilyChoice::Proportional);
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let mut more = StrategyVector::full(3);
            let mut less = StrategyVector::full(3);
            more.0[line] = RetainedLoss::Proportional { b: lo };
            less.0[line] = RetainedLoss::Proportional { b: hi };
            prop_assert!(p.net_premium(&more) <= p.net_premium(&less) + 1e-12);

            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            more.0[line] = RetainedLoss::ExcessOfLoss { retention: lo };
            less.0[line] = RetainedLoss::ExcessOfLoss { retention: hi };
            prop_assert!(p.net_premium(&more) <= p.net_premium(&less) + 1e-12);
        }
    }
}
