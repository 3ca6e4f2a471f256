//! Monte Carlo construction of the strong random time for chains given as
//! samplers: run the split chain, flip the regeneration coin at small-set
//! visits, and estimate the tail P(T > t) with confidence bands for
//! comparison against the certified bound.

use crate::bounds::{self, DriftParams, RateParams};
use crate::chain::{FiniteChain, MinorizationSpec};
use crate::error::{Error, Result};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A chain packaged with its splitting data. `regen_block` implements the
/// regeneration attempt from a small-set state: marginally the block has
/// law P^m(x,·), the coin shows heads with probability ε, and given heads
/// the block endpoint has law ν.
///
/// Kernels must be read-only: replications run in parallel against a
/// shared reference.
pub trait SplitKernel {
    type State: Clone + Send;

    fn m(&self) -> u32;
    fn epsilon(&self) -> f64;
    fn in_small_set(&self, x: &Self::State) -> bool;
    /// One ordinary P-step from outside the small set.
    fn step(&self, x: &Self::State, rng: &mut dyn RngCore) -> Self::State;
    /// The m-step block from x in the small set; returns the coin and the
    /// states x_{n+1}, ..., x_{n+m}.
    fn regen_block(&self, x: &Self::State, rng: &mut dyn RngCore) -> (bool, Vec<Self::State>);
}

/// Outcome of one replication: the strong random time, or the knowledge
/// that it exceeds the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrongTime {
    Regenerated(u64),
    Truncated,
}

#[derive(Debug, Clone)]
pub struct SimulatedTime<S> {
    pub outcome: StrongTime,
    /// Chain steps actually simulated.
    pub steps: u64,
    /// State at the stopping point (the block endpoint on regeneration).
    pub state: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub reps: u64,
    pub horizon: usize,
    pub empirical_tail: Vec<f64>,
    pub wilson_lower: Vec<f64>,
    pub wilson_upper: Vec<f64>,
    pub truncated_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailViolation {
    pub t: u64,
    pub empirical: f64,
    pub bound: f64,
    /// empirical − 3·SE − bound, positive means statistically significant.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailComparison {
    pub violations: Vec<TailViolation>,
    pub max_excess: f64,
}

/// Core loop: follow the split chain until the coin shows heads at some
/// T = n + m ≤ cap, or until T > cap is certain. Exact in both directions:
/// `Regenerated(t)` is returned iff the strong random time is t ≤ cap.
fn run_split<K: SplitKernel>(
    kernel: &K,
    x0: K::State,
    cap: u64,
    rng: &mut dyn RngCore,
) -> SimulatedTime<K::State> {
    let m = u64::from(kernel.m());
    let mut state = x0;
    let mut n: u64 = 0;
    loop {
        if kernel.in_small_set(&state) {
            if n + m > cap {
                return SimulatedTime { outcome: StrongTime::Truncated, steps: n, state };
            }
            let (heads, block) = kernel.regen_block(&state, rng);
            debug_assert_eq!(block.len(), kernel.m() as usize);
            n += m;
            state = block.into_iter().last().expect("regen block is nonempty");
            if heads {
                return SimulatedTime { outcome: StrongTime::Regenerated(n), steps: n, state };
            }
        } else {
            if n + 1 > cap {
                return SimulatedTime { outcome: StrongTime::Truncated, steps: n, state };
            }
            state = kernel.step(&state, rng);
            n += 1;
        }
    }
}

/// Simulate one strong random time from a sampled initial state,
/// truncating once T > cap is certain. The truncation marker is an
/// outcome, not an error.
pub fn simulate_t<K, F>(
    kernel: &K,
    initial: F,
    cap: u64,
    seed: u64,
) -> SimulatedTime<K::State>
where
    K: SplitKernel,
    F: Fn(&mut dyn RngCore) -> K::State,
{
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let x0 = initial(&mut rng);
    run_split(kernel, x0, cap, &mut rng)
}

/// Two-sided Wilson score interval at `z` standard normal units.
fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // Containing the point estimate is exact in real arithmetic; enforce
    // it against the last-ulp rounding at p = 0 or 1.
    (
        (center - half).max(0.0).min(p),
        (center + half).min(1.0).max(p),
    )
}

const WILSON_Z: f64 = 3.0;

/// Estimate the tail P(T > t) for t = 0..=horizon over independent
/// replications. Replication `i` draws from stream i+1 of a counter-based
/// generator seeded with `seed`, so the estimate is parallel yet exactly
/// reproducible. Replications still running at the horizon count toward
/// every numerator: the estimate errs upward, never down.
pub fn estimate_tail<K, F>(
    kernel: &K,
    initial: F,
    reps: u64,
    horizon: usize,
    seed: u64,
) -> Result<TailEstimate>
where
    K: SplitKernel + Sync,
    K::State: Send,
    F: Fn(&mut dyn RngCore) -> K::State + Sync,
{
    if reps == 0 {
        return Err(Error::Domain("tail estimation needs at least one replication".into()));
    }
    let outcomes: Vec<StrongTime> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(rep + 1);
            let x0 = initial(&mut rng);
            run_split(kernel, x0, horizon as u64, &mut rng).outcome
        })
        .collect();
    // T >= m >= 1, so hist[0] stays empty and tail[0] = 1 exactly.
    let mut hist = vec![0u64; horizon + 1];
    let mut truncated_count = 0u64;
    for o in &outcomes {
        match *o {
            StrongTime::Regenerated(t) => hist[t as usize] += 1,
            StrongTime::Truncated => truncated_count += 1,
        }
    }
    let mut empirical_tail = Vec::with_capacity(horizon + 1);
    let mut wilson_lower = Vec::with_capacity(horizon + 1);
    let mut wilson_upper = Vec::with_capacity(horizon + 1);
    let mut settled = 0u64;
    for t in 0..=horizon {
        settled += hist[t];
        let exceed = reps - settled;
        let (lo, hi) = wilson_interval(exceed, reps, WILSON_Z);
        empirical_tail.push(exceed as f64 / reps as f64);
        wilson_lower.push(lo);
        wilson_upper.push(hi);
    }
    Ok(TailEstimate { reps, horizon, empirical_tail, wilson_lower, wilson_upper, truncated_count })
}

/// Flag every t where the empirical tail minus three binomial standard
/// errors still exceeds the certified bound μ(V)^r ρ^{t+1−m}. A clean run
/// returns no violations; a deliberately wrong rate should not.
pub fn compare_tail_to_bound(
    est: &TailEstimate,
    params: &DriftParams,
    rate: &RateParams,
    mu_v: f64,
) -> Result<TailComparison> {
    let mut violations = Vec::new();
    let mut max_excess = 0.0f64;
    let n = est.reps as f64;
    for t in 0..=est.horizon {
        let p = est.empirical_tail[t];
        let se = (p * (1.0 - p) / n).sqrt();
        let bound = bounds::tail_bound(params, rate, mu_v, t as u64)?;
        let excess = p - 3.0 * se - bound;
        if excess > 0.0 {
            violations.push(TailViolation { t: t as u64, empirical: p, bound, excess });
            max_excess = max_excess.max(excess);
        }
    }
    Ok(TailComparison { violations, max_excess })
}

/// Exact splitting of a finite chain with a one-step minorization: the
/// remainder law (P(x,·) − εν)/(1−ε) is closed-form, so regeneration
/// blocks are sampled directly.
#[derive(Debug, Clone)]
pub struct FiniteSplitKernel {
    chain: FiniteChain,
    in_c: Vec<bool>,
    epsilon: f64,
    nu: Vec<f64>,
    /// Remainder rows for small-set states; empty when ε = 1.
    remainder: Vec<Option<Vec<f64>>>,
}

impl FiniteSplitKernel {
    pub fn new(chain: &FiniteChain, c: &[usize], spec: &MinorizationSpec) -> Result<Self> {
        if spec.m != 1 {
            return Err(Error::Precondition(
                "finite split kernel supports m = 1 only; m > 1 needs a bridge sampler".into(),
            ));
        }
        if !chain.verify_minorization(c, spec)? {
            return Err(Error::Precondition(
                "minorization inequality does not hold for the supplied (C, epsilon, nu)".into(),
            ));
        }
        let n = chain.n();
        let mut in_c = vec![false; n];
        for &x in c {
            in_c[x] = true;
        }
        let mut remainder = vec![None; n];
        if spec.epsilon < 1.0 {
            let p = chain.kernel();
            for x in 0..n {
                if !in_c[x] {
                    continue;
                }
                let mut row: Vec<f64> = (0..n)
                    .map(|y| ((p[(x, y)] - spec.epsilon * spec.nu[y]) / (1.0 - spec.epsilon)).max(0.0))
                    .collect();
                let s: f64 = row.iter().sum();
                for v in &mut row {
                    *v /= s;
                }
                remainder[x] = Some(row);
            }
        }
        Ok(FiniteSplitKernel {
            chain: chain.clone(),
            in_c,
            epsilon: spec.epsilon,
            nu: spec.nu.clone(),
            remainder,
        })
    }

    pub fn chain(&self) -> &FiniteChain {
        &self.chain
    }
}

fn sample_discrete(pdf_iter: impl Iterator<Item = f64>, rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in pdf_iter.enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
        if w > 0.0 {
            last = i;
        }
    }
    // fp slack at u ~ 1: fall back to the last state with positive mass
    last
}

impl SplitKernel for FiniteSplitKernel {
    type State = usize;

    fn m(&self) -> u32 {
        1
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn in_small_set(&self, x: &usize) -> bool {
        self.in_c[*x]
    }

    fn step(&self, x: &usize, rng: &mut dyn RngCore) -> usize {
        let p = self.chain.kernel();
        let n = self.chain.n();
        let row = (0..n).map(|y| p[(*x, y)]);
        sample_discrete(row, rng)
    }

    fn regen_block(&self, x: &usize, rng: &mut dyn RngCore) -> (bool, Vec<usize>) {
        let heads = rng.random::<f64>() < self.epsilon;
        let next = if heads {
            sample_discrete(self.nu.iter().copied(), rng)
        } else {
            let row = self.remainder[*x]
                .as_ref()
                .expect("remainder row exists whenever tails is possible");
            sample_discrete(row.iter().copied(), rng)
        };
        (heads, vec![next])
    }
}
