//! Claim-size laws with closed-form primitives.
//!
//! Every quantity the solver needs (interval masses, stop-loss integrals,
//! means) is evaluated analytically. Survival functions are used in place of
//! `1 - F` wherever a difference of probabilities is formed, so tail masses
//! keep their relative precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("exponential rate must be positive and finite (got {0})")]
    BadRate(f64),
    #[error("pareto scale must be positive and finite (got {0})")]
    BadScale(f64),
    #[error("pareto shape must exceed 1 for a finite mean (got {0})")]
    BadShape(f64),
    #[error("mixture needs at least one component")]
    EmptyMixture,
    #[error("mixture has {weights} weights but {components} components")]
    MixtureArity { weights: usize, components: usize },
    #[error("mixture weight {index} is invalid ({value})")]
    BadWeight { index: usize, value: f64 },
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("interval bounds out of order: lower {lo} > upper {hi}")]
    ReversedInterval { lo: f64, hi: f64 },
    #[error("stop-loss lower limit must be nonnegative (got {0})")]
    NegativeLimit(f64),
    #[error("uniform draw must lie in (0, 1) (got {0})")]
    BadUniform(f64),
}

/// Claim-size distribution of one line of business.
///
/// The Pareto variant is the Lomax form `F(x) = 1 - (scale / (scale + x))^shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClaimDistribution {
    Exponential {
        rate: f64,
    },
    Pareto {
        scale: f64,
        shape: f64,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<ClaimDistribution>,
    },
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        let d = ClaimDistribution::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self, DistributionError> {
        let d = ClaimDistribution::Pareto { scale, shape };
        d.validate()?;
        Ok(d)
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<ClaimDistribution>) -> Result<Self, DistributionError> {
        let d = ClaimDistribution::Mixture { weights, components };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter invariants, recursing into mixture components.
    ///
    /// Values deserialized from a config file bypass the constructors, so
    /// callers must run this before using them.
    pub fn validate(&self) -> Result<(), DistributionError> {
        match self {
            ClaimDistribution::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(DistributionError::BadRate(*rate));
                }
            }
            ClaimDistribution::Pareto { scale, shape } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(DistributionError::BadScale(*scale));
                }
                if !(shape.is_finite() && *shape > 1.0) {
                    return Err(DistributionError::BadShape(*shape));
                }
            }
            ClaimDistribution::Mixture { weights, components } => {
                if components.is_empty() {
                    return Err(DistributionError::EmptyMixture);
                }
                if weights.len() != components.len() {
                    return Err(DistributionError::MixtureArity {
                        weights: weights.len(),
                        components: components.len(),
                    });
                }
                for (index, &value) in weights.iter().enumerate() {
                    if !(value.is_finite() && value >= 0.0) {
                        return Err(DistributionError::BadWeight { index, value });
                    }
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(DistributionError::WeightSum(total));
                }
                for c in components {
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Survival function `1 - F(x)`; equals 1 for `x < 0`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => (-rate * x).exp(),
            ClaimDistribution::Pareto { scale, shape } => (scale / (scale + x)).powf(*shape),
            ClaimDistribution::Mixture { weights, components } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.survival(x))
                .sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => -(-rate * x).exp_m1(),
            _ => 1.0 - self.survival(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => 1.0 / rate,
            ClaimDistribution::Pareto { scale, shape } => scale / (shape - 1.0),
            ClaimDistribution::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.mean()).sum()
            }
        }
    }

    /// `∫_a^b (1 - F(u)) du` for `0 <= a <= b`, with `b` possibly infinite.
    pub fn stop_loss(&self, a: f64, b: f64) -> Result<f64, DistributionError> {
        if a < 0.0 {
            return Err(DistributionError::NegativeLimit(a));
        }
        if a > b || a.is_nan() || b.is_nan() {
            return Err(DistributionError::ReversedInterval { lo: a, hi: b });
        }
        Ok(self.stop_loss_unchecked(a, b))
    }

    fn stop_loss_unchecked(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => {
                // e^{-λa} (1 - e^{-λ(b-a)}) / λ, stable for short intervals.
                let width = b - a;
                let head = (-rate * a).exp();
                if width.is_infinite() {
                    head / rate
                } else {
                    -head * (-rate * width).exp_m1() / rate
                }
            }
            ClaimDistribution::Pareto { scale, shape } => {
                let k = shape - 1.0;
                let upper = if b.is_infinite() {
                    0.0
                } else {
                    (scale / (scale + b)).powf(k)
                };
                scale / k * ((scale / (scale + a)).powf(k) - upper)
            }
            ClaimDistribution::Mixture { weights, components } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.stop_loss_unchecked(a, b))
                .sum(),
        }
    }

    /// `P(lo < U <= hi)`.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> Result<f64, DistributionError> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(DistributionError::ReversedInterval { lo, hi });
        }
        Ok((self.survival(lo) - self.survival(hi)).max(0.0))
    }

    /// Inverse-CDF draw. Mixtures select a component from `u` and rescale the
    /// remainder of `u` onto `(0, 1)` before inverting that component, which
    /// is composition sampling driven by a single uniform.
    pub fn sample(&self, u: f64) -> Result<f64, DistributionError> {
        if !(u > 0.0 && u < 1.0) {
            return Err(DistributionError::BadUniform(u));
        }
        Ok(self.quantile(u))
    }

    fn quantile(&self, u: f64) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => -(-u).ln_1p() / rate,
            ClaimDistribution::Pareto { scale, shape } => scale * ((-(-u).ln_1p() / shape).exp_m1()),
            ClaimDistribution::Mixture { weights, components } => {
                let mut lower = 0.0;
                let last = components.len() - 1;
                for (k, (w, c)) in weights.iter().zip(components).enumerate() {
                    let upper = lower + w;
                    if (u < upper || k == last) && *w > 0.0 {
                        let v = ((u - lower) / w).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                        return c.quantile(v);
                    }
                    lower = upper;
                }
                // Only reachable when trailing weights are zero.
                let (k, _) = weights
                    .iter()
                    .enumerate()
                    .rev()
                    .find(|(_, w)| **w > 0.0)
                    .expect("validated mixture has positive weight");
                components[k].quantile(u.min(1.0 - f64::EPSILON))
            }
        }
    }

    /// True when every leaf component is exponential, i.e. the law is light
    /// tailed with a finite moment generating function near zero.
    pub fn is_exponential_family(&self) -> bool {
        match self {
            ClaimDistribution::Exponential { .. } => true,
            ClaimDistribution::Pareto { .. } => false,
            ClaimDistribution::Mixture { components, .. } => {
                components.iter().all(|c| c.is_exponential_family())
            }
        }
    }

    /// Moment generating function `E[e^{rU}]`, finite only for exponential
    /// mixtures with `r` below the smallest rate.
    pub fn mgf(&self, r: f64) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => {
                if r < *rate {
                    rate / (rate - r)
                } else {
                    f64::INFINITY
                }
            }
            ClaimDistribution::Pareto { .. } => {
                if r <= 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            ClaimDistribution::Mixture { weights, components } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| if *w == 0.0 { 0.0 } else { w * c.mgf(r) })
                .sum(),
        }
    }

    /// Smallest exponential rate among leaf components, if all are exponential.
    pub fn min_rate(&self) -> Option<f64> {
        match self {
            ClaimDistribution::Exponential { rate } => Some(*rate),
            ClaimDistribution::Pareto { .. } => None,
            ClaimDistribution::Mixture { components, .. } => {
                let mut best = f64::INFINITY;
                for c in components {
                    best = best.min(c.min_rate()?);
                }
                Some(best)
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::quadrature::{integrate, integrate_to_infinity};
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn example_mixture() -> ClaimDistribution {
        ClaimDistribution::mixture(
            vec![0.7, 0.3],
            vec![
                ClaimDistribution::exponential(0.5).unwrap(),
                ClaimDistribution::pareto(3.0, 3.0).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cdf_examples() {
        let e = ClaimDistribution::exponential(0.5).unwrap();
        assert_eq!(e.cdf(0.0), 0.0);
        assert_eq!(e.cdf(-3.0), 0.0);
        let p = ClaimDistribution::pareto(3.0, 3.0).unwrap();
        assert_abs_diff_eq!(p.cdf(3.0), 0.875, epsilon = 1e-15);
        assert_eq!(example_mixture().cdf(0.0), 0.0);
    }

    #[test]
    fn means_match_quadrature() {
        let e = ClaimDistribution::exponential(0.5).unwrap();
        assert_abs_diff_eq!(e.mean(), 2.0, epsilon = 1e-15);
        let p = ClaimDistribution::pareto(3.0, 3.0).unwrap();
        assert_abs_diff_eq!(p.mean(), 1.5, epsilon = 1e-15);
        let m = example_mixture();
        assert_abs_diff_eq!(m.mean(), 1.85, epsilon = 1e-14);
        for d in [e, p, m] {
            let q = integrate_to_infinity(&|u| d.survival(u), 0.0, 1e-12);
            assert_abs_diff_eq!(q, d.mean(), epsilon = 1e-8);
        }
    }

    #[test]
    fn stop_loss_examples() {
        let e = ClaimDistribution::exponential(0.5).unwrap();
        let v = e.stop_loss(2.0, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(v, (-1.0f64).exp() / 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.735759, epsilon = 1e-6);
        assert_eq!(example_mixture().stop_loss(1.3, 1.3).unwrap(), 0.0);
        for d in [e, example_mixture()] {
            assert_abs_diff_eq!(
                d.stop_loss(0.0, f64::INFINITY).unwrap(),
                d.mean(),
                epsilon = 1e-10
            );
        }
        assert!(matches!(
            example_mixture().stop_loss(2.0, 1.0),
            Err(DistributionError::ReversedInterval { .. })
        ));
    }

    #[test]
    fn interval_mass_examples() {
        let e = ClaimDistribution::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e.interval_mass(0.0, 2.0).unwrap(), 0.864665, epsilon = 1e-6);
        assert_eq!(e.interval_mass(1.5, 1.5).unwrap(), 0.0);
        assert!(e.interval_mass(2.0, 1.0).is_err());
    }

    #[test]
    fn sample_examples() {
        let e = ClaimDistribution::exponential(0.5).unwrap();
        let u = 1.0 - (-1.0f64).exp();
        assert_abs_diff_eq!(e.sample(u).unwrap(), 2.0, epsilon = 1e-12);
        let p = ClaimDistribution::pareto(3.0, 3.0).unwrap();
        assert_abs_diff_eq!(p.sample(0.875).unwrap(), 3.0, epsilon = 1e-12);
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(e.sample(bad).is_err());
        }
    }

    #[test]
    fn mixture_sampling_within_dkw_band() {
        use rand::{Rng, SeedableRng};
        let m = example_mixture();
        let n = 1_000_000usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut xs: Vec<f64> = (0..n)
            .map(|_| m.sample(rng.sample(rand::distributions::Open01)).unwrap())
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // DKW: P(sup|F_n - F| > eps) <= 2 exp(-2 n eps^2); eps at alpha = 1e-6.
        let eps = ((2.0f64 / 1e-6).ln() / (2.0 * n as f64)).sqrt();
        let mut worst = 0.0f64;
        for (k, x) in xs.iter().enumerate() {
            let f = m.cdf(*x);
            worst = worst
                .max((f - k as f64 / n as f64).abs())
                .max((f - (k + 1) as f64 / n as f64).abs());
        }
        assert!(worst < eps, "KS distance {worst} exceeds DKW band {eps}");
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(ClaimDistribution::exponential(0.0).is_err());
        assert!(ClaimDistribution::pareto(3.0, 1.0).is_err());
        assert!(ClaimDistribution::pareto(-1.0, 3.0).is_err());
        let e = ClaimDistribution::exponential(1.0).unwrap();
        assert!(matches!(
            ClaimDistribution::mixture(vec![0.5, 0.4], vec![e.clone(), e.clone()]),
            Err(DistributionError::WeightSum(_))
        ));
        assert!(ClaimDistribution::mixture(vec![1.0], vec![e.clone(), e]).is_err());
        assert!(ClaimDistribution::mixture(vec![], vec![]).is_err());
    }

    #[test]
    fn config_tagged_record_round_trip() {
        let text = r#"{"type":"mixture","weights":[0.7,0.3],"components":[{"type":"exponential","rate":0.5},{"type":"pareto","scale":3.0,"shape":3.0}]}"#;
        let d: ClaimDistribution = serde_json::from_str(text).unwrap();
        assert_eq!(d, example_mixture());
    }

    fn arb_leaf() -> impl Strategy<Value = ClaimDistribution> {
        prop_oneof![
            (0.05f64..5.0).prop_map(|rate| ClaimDistribution::Exponential { rate }),
            (0.1f64..10.0, 1.2f64..6.0).prop_map(|(scale, shape)| ClaimDistribution::Pareto { scale, shape }),
        ]
    }

    fn arb_dist() -> impl Strategy<Value = ClaimDistribution> {
        prop_oneof![
            arb_leaf(),
            (arb_leaf(), arb_leaf(), 0.0f64..1.0).prop_map(|(a, b, w)| {
                ClaimDistribution::Mixture {
                    weights: vec![w, 1.0 - w],
                    components: vec![a, b],
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn partition_masses_sum_to_one(d in arb_dist(), h in 0.01f64..2.0, bins in 1usize..400) {
            let mut total = 0.0;
            for j in 1..=bins {
                total += d.interval_mass((j - 1) as f64 * h, j as f64 * h).unwrap();
            }
            total += d.survival(bins as f64 * h);
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn stop_loss_matches_quadrature(d in arb_dist(), a in 0.0f64..8.0, width in 0.0f64..12.0) {
            let b = a + width;
            let exact = d.stop_loss(a, b).unwrap();
            let q = integrate(&|u| d.survival(u), a, b, 1e-12);
            prop_assert!((exact - q).abs() < 1e-8, "{exact} vs {q}");
            prop_assert!((d.stop_loss(0.0, f64::INFINITY).unwrap() - d.mean()).abs() < 1e-10);
        }

        #[test]
        fn cdf_inverts_sample(d in arb_dist(), u in 1e-9f64..(1.0 - 1e-9)) {
            let x = d.sample(u).unwrap();
            prop_assert!(x >= 0.0);
            if !matches!(d, ClaimDistribution::Mixture { .. }) {
                prop_assert!((d.cdf(x) - u).abs() < 1e-10);
            }
        }

        #[test]
        fn cdf_is_monotone(d in arb_dist(), x in -1.0f64..50.0, dx in 0.0f64..5.0) {
            prop_assert!(d.cdf(x) <= d.cdf(x + dx) + 1e-16);
            prop_assert!((0.0..=1.0).contains(&d.cdf(x)));
        }
    }
}
