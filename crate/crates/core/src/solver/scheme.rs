//! Precomputed per-candidate kernels and the per-step inner minimization.
//!
//! For a fixed step the objective of a strategy vector is
//!
//! ```text
//!   N(θ) / D(θ),   N(θ) = Σ_g [ c_g(θ_g) f_prev − Σ_j f(i−j) m_{g,j}(θ_g) ],
//!                  D(θ) = p_gross − Σ_g q_g(θ_g)
//! ```
//!
//! where `g` runs over decision groups (one per line, or a single group when
//! all lines share one contract), `c_g = Σ_{l∈g} β_l (1 − P(R_l(U_l) = 0))`,
//! `m_{g,j} = Σ_{l∈g} β_l P((j−1)h < R_l(U_l) ≤ jh)` and `q_g` is the
//! reinsurance premium. Both numerator and denominator are sums of per-group
//! terms, which is what the Dinkelbach inner solver exploits.

use rayon::prelude::*;

use crate::portfolio::{PortfolioSpec, StrategyVector};
use crate::reinsurance::{parameter_candidates, FamilyChoice, RetainedLoss};

use super::{InnerMethod, SolverConfig, SolverError};

/// Work (candidates × prefix length) above which a step fans out to rayon.
const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub lines: Vec<usize>,
    pub candidates: Vec<RetainedLoss>,
    /// `Σ_{l∈g} β_l (1 − P(R = 0))` per candidate.
    pub survive: Vec<f64>,
    /// Reinsurance premium per candidate.
    pub cost: Vec<f64>,
    /// Per candidate, β-weighted bin masses stored in reverse: entry `q` holds
    /// the mass of bin `n_bins − q`, so a step's convolution is a contiguous
    /// dot product.
    pub rev_bins: Vec<Vec<f64>>,
}

/// Result of one inner minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct StepChoice {
    /// Minimal objective, the slope `f'_h` at this step.
    pub value: f64,
    /// Candidate index per decision group.
    pub indices: Vec<usize>,
    /// Net premium of the selected strategy.
    pub premium: f64,
    /// Dinkelbach iterations used (0 for exhaustive search).
    pub iterations: usize,
    /// Whether the fractional method fell back to exhaustive search.
    pub fell_back: bool,
}

#[derive(Debug, Clone)]
pub struct Scheme {
    pub(crate) groups: Vec<Group>,
    pub(crate) n_lines: usize,
    pub(crate) n_bins: usize,
    pub(crate) beta: f64,
    pub(crate) gross: f64,
    pub(crate) floor: f64,
    pub(crate) h: f64,
    pub(crate) tol: f64,
    pub(crate) max_iter: usize,
}

/// Candidate list of one line or shared group. XL lists also carry the
/// one-step retention `M = h`, the smallest nonzero level the grid resolves.
pub(crate) fn group_candidates(family: FamilyChoice, config: &SolverConfig, cap: f64) -> Vec<RetainedLoss> {
    let resolution = match family {
        FamilyChoice::Lxl => config.lxl_resolution,
        _ => config.resolution,
    };
    let mut c = parameter_candidates(family, resolution, cap);
    if family == FamilyChoice::Xl {
        let step = RetainedLoss::ExcessOfLoss { retention: config.h };
        let pos = c.iter().position(|r| match r {
            RetainedLoss::ExcessOfLoss { retention } => *retention >= config.h,
            _ => true,
        });
        match pos {
            Some(p) if c[p] == step => {}
            Some(p) => c.insert(p, step),
            None => c.push(step),
        }
    }
    c
}

impl Scheme {
    pub fn new(spec: &PortfolioSpec, config: &SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let n_bins = config.n_steps();
        let gross = spec.gross_premium();
        let floor = config.premium_floor.unwrap_or(1e-6 * gross);
        if !(floor > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "premium floor must be positive (got {floor})"
            )));
        }
        if gross < floor {
            return Err(SolverError::NoAdmissibleStrategy { step: 0 });
        }

        let partition: Vec<Vec<usize>> = if config.shared_contract {
            let family = spec.lines()[0].family;
            if spec.lines().iter().any(|l| l.family != family) {
                return Err(SolverError::InvalidConfig(
                    "shared_contract requires every line to use the same family".into(),
                ));
            }
            vec![(0..spec.n_lines()).collect()]
        } else {
            (0..spec.n_lines()).map(|l| vec![l]).collect()
        };

        let h = config.h;
        let groups = partition
            .into_iter()
            .map(|lines| {
                let family = spec.lines()[lines[0]].family;
                let cap = config.cap.unwrap_or_else(|| {
                    let mean = lines
                        .iter()
                        .map(|&l| spec.lines()[l].dist.mean())
                        .fold(0.0, f64::max);
                    config.x_max + 3.0 * mean
                });
                let candidates = group_candidates(family, config, cap);
                let kernels: Vec<(f64, f64, Vec<f64>)> = candidates
                    .par_iter()
                    .map(|r| {
                        let mut survive = 0.0;
                        let mut cost = 0.0;
                        let mut rev_bins = vec![0.0; n_bins];
                        for &l in &lines {
                            let line = &spec.lines()[l];
                            let beta = line.intensity;
                            survive += beta * (1.0 - r.retained_zero_mass(&line.dist));
                            cost += spec.line_reinsurance_cost(l, r);
                            let mut upper = r.retained_survival(&line.dist, 0.0);
                            for j in 1..=n_bins {
                                let lower = r.retained_survival(&line.dist, j as f64 * h);
                                rev_bins[n_bins - j] += beta * (upper - lower).max(0.0);
                                upper = lower;
                            }
                        }
                        (survive, cost, rev_bins)
                    })
                    .collect();
                let mut g = Group {
                    lines,
                    candidates,
                    survive: Vec::with_capacity(kernels.len()),
                    cost: Vec::with_capacity(kernels.len()),
                    rev_bins: Vec::with_capacity(kernels.len()),
                };
                for (s, c, b) in kernels {
                    g.survive.push(s);
                    g.cost.push(c);
                    g.rev_bins.push(b);
                }
                g
            })
            .collect();

        Ok(Self {
            groups,
            n_lines: spec.n_lines(),
            n_bins,
            beta: spec.aggregate_intensity(),
            gross,
            floor,
            h,
            tol: config.dinkelbach_tol,
            max_iter: config.dinkelbach_max_iter,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_bins
    }

    pub fn premium_floor(&self) -> f64 {
        self.floor
    }

    pub fn aggregate_intensity(&self) -> f64 {
        self.beta
    }

    /// Number of candidates in each decision group.
    pub fn candidate_counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.candidates.len()).collect()
    }

    /// Expands per-group indices into a per-line strategy vector.
    pub fn strategy(&self, indices: &[usize]) -> StrategyVector {
        let mut out = vec![RetainedLoss::Full; self.n_lines];
        for (g, &k) in self.groups.iter().zip(indices) {
            for &l in &g.lines {
                out[l] = g.candidates[k];
            }
        }
        StrategyVector(out)
    }

    fn full_indices(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.candidates.len() - 1).collect()
    }

    /// Per-group numerator contributions for the step defined by `prefix`.
    fn numerators(&self, prefix: &[f64]) -> Vec<Vec<f64>> {
        let i = prefix.len();
        let f_prev = prefix.last().copied().unwrap_or(1.0);
        let start = self.n_bins - i;
        let eval = |g: &Group, k: usize| g.survive[k] * f_prev - dot(prefix, &g.rev_bins[k][start..]);
        let total: usize = self.groups.iter().map(|g| g.candidates.len()).sum();
        if total * i >= PARALLEL_THRESHOLD {
            self.groups
                .iter()
                .map(|g| {
                    (0..g.candidates.len())
                        .into_par_iter()
                        .map(|k| eval(g, k))
                        .collect()
                })
                .collect()
        } else {
            self.groups
                .iter()
                .map(|g| (0..g.candidates.len()).map(|k| eval(g, k)).collect())
                .collect()
        }
    }

    fn totals(&self, num: &[Vec<f64>], idx: &[usize]) -> (f64, f64) {
        let mut n = 0.0;
        let mut ceded = 0.0;
        for (g, &k) in idx.iter().enumerate() {
            n += num[g][k];
            ceded += self.groups[g].cost[k];
        }
        (n, self.gross - ceded)
    }

    /// Minimizes the step objective over all admissible strategy vectors.
    ///
    /// `prefix` holds `f_h(0), …, f_h((i−1)h)`; an empty prefix is the
    /// initial step at `x = 0`.
    pub fn minimize_step(&self, prefix: &[f64], method: InnerMethod) -> Result<StepChoice, SolverError> {
        let i = prefix.len();
        assert!(i <= self.n_bins, "step {i} beyond grid of {} bins", self.n_bins);
        let num = self.numerators(prefix);
        match method {
            InnerMethod::Exhaustive => self.exhaustive(&num, i),
            InnerMethod::Fractional => self.dinkelbach(&num, i),
        }
    }

    fn exhaustive(&self, num: &[Vec<f64>], step: usize) -> Result<StepChoice, SolverError> {
        let sizes = self.candidate_counts();
        let mut idx = vec![0usize; sizes.len()];
        let mut best: Option<(f64, Vec<usize>, f64)> = None;
        loop {
            let (n, d) = self.totals(num, &idx);
            if d >= self.floor {
                let value = n / d;
                if best.as_ref().is_none_or(|(b, _, _)| value < *b) {
                    best = Some((value, idx.clone(), d));
                }
            }
            // Odometer with the first group most significant.
            let mut g = sizes.len();
            loop {
                if g == 0 {
                    let (value, indices, premium) = best.ok_or(SolverError::NoAdmissibleStrategy { step })?;
                    return Ok(StepChoice {
                        value,
                        indices,
                        premium,
                        iterations: 0,
                        fell_back: false,
                    });
                }
                g -= 1;
                idx[g] += 1;
                if idx[g] < sizes[g] {
                    break;
                }
                idx[g] = 0;
            }
        }
    }

    fn dinkelbach(&self, num: &[Vec<f64>], step: usize) -> Result<StepChoice, SolverError> {
        let mut current = self.full_indices();
        let (n, d) = self.totals(num, &current);
        if d < self.floor {
            return Err(SolverError::NoAdmissibleStrategy { step });
        }
        let mut lambda = n / d;
        let mut premium = d;
        for iteration in 1..=self.max_iter {
            let candidate: Vec<usize> = self
                .groups
                .iter()
                .zip(num)
                .map(|(g, ng)| {
                    let mut best_k = 0;
                    let mut best_v = f64::INFINITY;
                    for (k, (nk, ck)) in ng.iter().zip(&g.cost).enumerate() {
                        let v = nk + lambda * ck;
                        if v < best_v {
                            best_v = v;
                            best_k = k;
                        }
                    }
                    best_k
                })
                .collect();
            let (n, d) = self.totals(num, &candidate);
            let gap = n - lambda * d;
            let scale = (lambda * self.gross).max(1.0);
            if gap >= -self.tol * scale {
                let (n, d) = self.totals(num, &current);
                return Ok(StepChoice {
                    value: n / d,
                    indices: current,
                    premium,
                    iterations: iteration,
                    fell_back: false,
                });
            }
            if d < self.floor {
                break;
            }
            current = candidate;
            lambda = n / d;
            premium = d;
        }
        let mut out = self.exhaustive(num, step)?;
        out.fell_back = true;
        Ok(out)
    }
}

/// Dot product with four independent accumulators; the summation order is
/// fixed, so results do not depend on scheduling.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
