//! Exact computations on finite chains: stationary distributions, distance
//! curves, the exact law of the strong random time, and executable checks
//! of every inequality the bound calculator relies on.
//!
//! These are the ground truth the certified bounds are tested against. All
//! distribution evolution uses vector-kernel products, never
//! eigendecompositions, so each number is an O(n²) sum of nonnegative
//! terms; eigensolvers appear only in `tv_rate` and the laziness/spectrum
//! reports.

use crate::bounds::{self, DriftParams};
use crate::chain::{DriftSpec, FiniteChain, MinorizationSpec};
use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exact distances ‖P^t(x,·) − π‖ in three norms, t = 0..horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurves {
    pub horizon: usize,
    pub tv: Vec<f64>,
    pub l2: Vec<f64>,
    pub vnorm: Vec<f64>,
}

/// Exact law of the strong random time from the splitting DP.
///
/// `expected_t` is the truncated sum Σ_{t=0}^{horizon} P(T > t), a lower
/// bound on E[T] that is exact once `residual_mass` (= P(T > horizon))
/// reaches zero; consumers that need E[T] must check the residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationTail {
    pub tail: Vec<f64>,
    pub expected_t: f64,
    pub residual_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2TheoremReport {
    pub max_slack_violation: f64,
    pub witness_t: usize,
    pub residual_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreLemmaReport {
    pub max_monotonicity_violation: f64,
    pub max_inequality_violation: f64,
    pub residual_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportingLemmasReport {
    /// max over x ∈ C of (P^m V)(x) − B
    pub b_bound_violation: f64,
    pub b_bound_witness: usize,
    /// π(V) − (K − λ)/(1 − λ) · π(C)
    pub pi_v_violation: f64,
    /// max over (x, t) of ‖P^t(x,·) − π‖_V minus its TV-convolution bound
    pub tv_to_v_violation: f64,
    pub tv_to_v_witness: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub tv_rate: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub slope: f64,
    pub per_n: Vec<ScalingPoint>,
}

fn require_irreducible(chain: &FiniteChain) -> Result<()> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible("chain support graph is not strongly connected".into()));
    }
    Ok(())
}

fn validate_distribution(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::Dimension(format!("{what} has {} entries for {n} states", p.len())));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// π from the balance equations; the unique stationary law of an
/// irreducible chain.
pub fn stationary_distribution(chain: &FiniteChain) -> Result<Vec<f64>> {
    require_irreducible(chain)?;
    chain.stationary_solve()
}

/// One step of distribution evolution: μ ← μP.
fn evolve(chain: &FiniteChain, mu: &[f64]) -> Vec<f64> {
    let n = chain.n();
    let p = chain.kernel();
    let mut out = vec![0.0; n];
    for x in 0..n {
        let w = mu[x];
        if w == 0.0 {
            continue;
        }
        for y in 0..n {
            out[y] += w * p[(x, y)];
        }
    }
    out
}

/// Exact TV, L²(π) and V-norm distance curves from the point start x.
///
/// On a finite space the V-norm distance is computable as the weighted ℓ₁
/// sum Σ_y V(y)|μ(y) − π(y)| (the supremum over |f| ≤ V is attained at
/// f = ±V on the sign pattern of μ − π).
pub fn distance_curves(
    chain: &FiniteChain,
    x: usize,
    v: &[f64],
    horizon: usize,
) -> Result<DistanceCurves> {
    let n = chain.n();
    if x >= n {
        return Err(Error::Dimension(format!("start state {x} out of range for {n} states")));
    }
    if v.len() != n {
        return Err(Error::Dimension(format!("V has {} entries for {n} states", v.len())));
    }
    if v.iter().any(|&w| !(w >= 1.0)) {
        return Err(Error::Domain("V must satisfy V >= 1".into()));
    }
    let pi = stationary_distribution(chain)?;
    let mut mu = vec![0.0; n];
    mu[x] = 1.0;
    let mut tv = Vec::with_capacity(horizon + 1);
    let mut l2 = Vec::with_capacity(horizon + 1);
    let mut vnorm = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let mut s_tv = 0.0;
        let mut s_l2 = 0.0;
        let mut s_v = 0.0;
        for y in 0..n {
            let diff = mu[y] - pi[y];
            s_tv += diff.abs();
            s_l2 += diff * diff / pi[y];
            s_v += v[y] * diff.abs();
        }
        tv.push(0.5 * s_tv);
        l2.push(s_l2.sqrt());
        vnorm.push(s_v);
        if t < horizon {
            mu = evolve(chain, &mu);
        }
    }
    Ok(DistanceCurves { horizon, tv, l2, vnorm })
}

/// Split-chain DP state: u_n(y) = P(X_n = y, T > n).
struct SplitDp<'a> {
    chain: &'a FiniteChain,
    in_c: Vec<bool>,
    epsilon: f64,
    nu: &'a [f64],
    u: Vec<f64>,
}

impl<'a> SplitDp<'a> {
    fn new(chain: &'a FiniteChain, c: &[usize], spec: &'a MinorizationSpec, initial: &[f64]) -> Self {
        let mut in_c = vec![false; chain.n()];
        for &x in c {
            in_c[x] = true;
        }
        SplitDp { chain, in_c, epsilon: spec.epsilon, nu: &spec.nu, u: initial.to_vec() }
    }

    fn mass(&self) -> f64 {
        self.u.iter().sum()
    }

    /// u_{n+1}(y) = Σ_{x∉C} u_n(x) P(x,y) + Σ_{x∈C} u_n(x) (P(x,y) − εν(y)).
    fn step(&mut self) {
        let n = self.chain.n();
        let p = self.chain.kernel();
        let mut next = vec![0.0; n];
        let mut c_mass = 0.0;
        for x in 0..n {
            let w = self.u[x];
            if w == 0.0 {
                continue;
            }
            if self.in_c[x] {
                c_mass += w;
            }
            for y in 0..n {
                next[y] += w * p[(x, y)];
            }
        }
        for y in 0..n {
            // Verified minorization keeps this nonnegative up to fp noise.
            next[y] = (next[y] - c_mass * self.epsilon * self.nu[y]).max(0.0);
        }
        self.u = next;
    }
}

fn require_unit_block(spec: &MinorizationSpec) -> Result<()> {
    if spec.m != 1 {
        return Err(Error::Precondition(format!(
            "exact regeneration law requires m = 1 (got m = {}); use the simulator for m > 1",
            spec.m
        )));
    }
    Ok(())
}

fn require_verified_minorization(
    chain: &FiniteChain,
    c: &[usize],
    spec: &MinorizationSpec,
) -> Result<()> {
    if !chain.verify_minorization(c, spec)? {
        return Err(Error::Precondition(
            "minorization inequality does not hold for the supplied (C, epsilon, nu)".into(),
        ));
    }
    Ok(())
}

/// Exact tail P(T > t) of the strong random time via the splitting DP,
/// from the start distribution `initial`.
pub fn exact_regeneration_tail(
    chain: &FiniteChain,
    c: &[usize],
    spec: &MinorizationSpec,
    initial: &[f64],
    horizon: usize,
) -> Result<RegenerationTail> {
    require_unit_block(spec)?;
    require_verified_minorization(chain, c, spec)?;
    validate_distribution(initial, chain.n(), "initial distribution")?;
    let mut dp = SplitDp::new(chain, c, spec, initial);
    let mut tail = Vec::with_capacity(horizon + 1);
    tail.push(1.0);
    for _ in 1..=horizon {
        dp.step();
        tail.push(dp.mass());
    }
    let expected_t = tail.iter().sum();
    let residual_mass = *tail.last().unwrap();
    Ok(RegenerationTail { tail, expected_t, residual_mass })
}

/// Stationary distribution reconstructed from the regeneration identity
/// π(y) ∝ Σ_{n≥0} P_ν(X_n = y, T > n), started from ν.
///
/// Requires the DP to have drained (residual ≤ 1e-12) and cross-checks the
/// result against the balance-equation solve before returning it.
pub fn stationary_via_regeneration(
    chain: &FiniteChain,
    c: &[usize],
    spec: &MinorizationSpec,
    horizon: usize,
) -> Result<Vec<f64>> {
    require_unit_block(spec)?;
    require_verified_minorization(chain, c, spec)?;
    let n = chain.n();
    let mut dp = SplitDp::new(chain, c, spec, &spec.nu);
    let mut acc = dp.u.clone();
    let mut denom = dp.mass();
    let mut mass = denom;
    for _ in 1..=horizon {
        dp.step();
        mass = dp.mass();
        for y in 0..n {
            acc[y] += dp.u[y];
        }
        denom += mass;
    }
    if mass > 1e-12 {
        return Err(Error::HorizonTooSmall(format!(
            "P(T > {horizon}) = {mass:.3e} still exceeds 1e-12; raise the horizon"
        )));
    }
    let pi_hat: Vec<f64> = acc.iter().map(|&v| v / denom).collect();
    let pi = stationary_distribution(chain)?;
    let l1: f64 = pi_hat.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
    if l1 > 1e-10 {
        return Err(Error::Precondition(format!(
            "regeneration identity output differs from the balance solve by {l1:.3e} in l1"
        )));
    }
    Ok(pi_hat)
}

fn require_nonnegative_reversible(chain: &FiniteChain) -> Result<Vec<f64>> {
    let report = chain.spectral_report()?;
    if !report.reversible {
        return Err(Error::Precondition("chain is not reversible".into()));
    }
    if report.min_eigenvalue < -1e-10 {
        return Err(Error::Precondition(format!(
            "spectrum dips to {}; the L2 comparison needs nonnegative eigenvalues",
            report.min_eigenvalue
        )));
    }
    Ok(report.stationary)
}

/// Check ‖νP^t − π‖²_{L²(π)} ≤ Σ_{n=2t+1}^∞ P_ν(T > n) at every t with
/// 2t + 1 ≤ horizon. Truncating the right side at the horizon only makes
/// the check stricter, so a pass is trustworthy regardless of residual.
pub fn check_l2_theorem(
    chain: &FiniteChain,
    c: &[usize],
    spec: &MinorizationSpec,
    horizon: usize,
) -> Result<L2TheoremReport> {
    let pi = require_nonnegative_reversible(chain)?;
    let rt = exact_regeneration_tail(chain, c, spec, &spec.nu, horizon)?;
    let mut suffix = vec![0.0; horizon + 2];
    for k in (0..=horizon).rev() {
        suffix[k] = suffix[k + 1] + rt.tail[k];
    }
    let n = chain.n();
    let mut mu = spec.nu.clone();
    let mut worst = f64::NEG_INFINITY;
    let mut witness_t = 0;
    let t_max = horizon.saturating_sub(1) / 2;
    for t in 0..=t_max {
        let mut l2sq = 0.0;
        for y in 0..n {
            let diff = mu[y] - pi[y];
            l2sq += diff * diff / pi[y];
        }
        let violation = l2sq - suffix[2 * t + 1];
        if violation > worst {
            worst = violation;
            witness_t = t;
        }
        if t < t_max {
            mu = evolve(chain, &mu);
        }
    }
    Ok(L2TheoremReport {
        max_slack_violation: worst,
        witness_t,
        residual_mass: rt.residual_mass,
    })
}

/// Check the regeneration lemma behind the L² theorem: with f = dν/dπ,
/// E_ν[f(X_t)] is nonincreasing and E_ν[f(X_t)] − 1 ≤ Σ_{n=t+1}^∞ P(T > n).
pub fn check_core_lemma(
    chain: &FiniteChain,
    c: &[usize],
    spec: &MinorizationSpec,
    horizon: usize,
) -> Result<CoreLemmaReport> {
    let pi = require_nonnegative_reversible(chain)?;
    let rt = exact_regeneration_tail(chain, c, spec, &spec.nu, horizon)?;
    let mut suffix = vec![0.0; horizon + 2];
    for k in (0..=horizon).rev() {
        suffix[k] = suffix[k + 1] + rt.tail[k];
    }
    let n = chain.n();
    let f: Vec<f64> = (0..n).map(|y| spec.nu[y] / pi[y]).collect();
    let mut mu = spec.nu.clone();
    let mut prev = f64::INFINITY;
    let mut worst_mono = f64::NEG_INFINITY;
    let mut worst_ineq = f64::NEG_INFINITY;
    for t in 0..horizon {
        let e_t: f64 = mu.iter().zip(&f).map(|(m, fv)| m * fv).sum();
        worst_mono = worst_mono.max(e_t - prev);
        worst_ineq = worst_ineq.max((e_t - 1.0) - suffix[t + 1]);
        prev = e_t;
        mu = evolve(chain, &mu);
    }
    Ok(CoreLemmaReport {
        max_monotonicity_violation: worst_mono,
        max_inequality_violation: worst_ineq,
        residual_mass: rt.residual_mass,
    })
}

/// h(x) = E_x[λ^{−τ_C}], the exponential moment of the hitting time of C,
/// by solving (λI − P_DD) h_D = P_DC 1 on the complement D.
///
/// This is the minimal drift function for rate λ: any V passing
/// verify_drift with the same λ dominates h pointwise.
pub fn exponential_hitting_moment(
    chain: &FiniteChain,
    c: &[usize],
    lambda: f64,
) -> Result<Vec<f64>> {
    let n = chain.n();
    if c.is_empty() || c.iter().any(|&x| x >= n) {
        return Err(Error::Dimension("small set empty or out of range".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0,1), got {lambda}")));
    }
    let mut in_c = vec![false; n];
    for &x in c {
        in_c[x] = true;
    }
    // Every state must reach C or the hitting time is infinite somewhere.
    {
        let p = chain.kernel();
        let mut reaches = in_c.clone();
        let mut frontier: Vec<usize> = c.to_vec();
        while let Some(y) = frontier.pop() {
            for x in 0..n {
                if !reaches[x] && p[(x, y)] > 0.0 {
                    reaches[x] = true;
                    frontier.push(x);
                }
            }
        }
        if let Some(x) = reaches.iter().position(|&b| !b) {
            return Err(Error::Precondition(format!("state {x} cannot reach the small set")));
        }
    }
    let d: Vec<usize> = (0..n).filter(|&x| !in_c[x]).collect();
    let mut h = vec![1.0; n];
    if d.is_empty() {
        return Ok(h);
    }
    let p = chain.kernel();
    let nd = d.len();
    let a = DMatrix::from_fn(nd, nd, |i, j| {
        let base = if i == j { lambda } else { 0.0 };
        base - p[(d[i], d[j])]
    });
    let rhs = DVector::from_fn(nd, |i, _| c.iter().map(|&y| p[(d[i], y)]).sum());
    let sol = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("lambda hits the off-C spectrum".into()))?;
    // λ below the spectral radius of P_DD leaves a finite solution that is
    // not the (divergent) expectation; it betrays itself by dipping under
    // the trivial floor h ≥ 1.
    let resid = (&a * &sol - &rhs).abs().max();
    if resid > 1e-9 * (1.0 + sol.abs().max()) {
        return Err(Error::SingularSystem(format!(
            "hitting-moment solve residual {resid:.3e} too large; lambda too close to the off-C spectrum"
        )));
    }
    for (i, &x) in d.iter().enumerate() {
        if sol[i] < 1.0 - 1e-9 {
            return Err(Error::SingularSystem(format!(
                "solution dips to {} < 1; lambda is below the geometric reach threshold",
                sol[i]
            )));
        }
        h[x] = sol[i];
    }
    Ok(h)
}

/// Check the three auxiliary inequalities tying drift data to π and to the
/// V-norm: the m-step ceiling B on C, the stationary moment bound on π(V),
/// and the TV-to-V-norm convolution bound at every t ≤ horizon from every
/// start.
pub fn check_supporting_lemmas(
    chain: &FiniteChain,
    drift: &DriftSpec,
    mino: &MinorizationSpec,
    horizon: usize,
) -> Result<SupportingLemmasReport> {
    let dr = chain.verify_drift(drift)?;
    if !dr.holds {
        return Err(Error::Precondition(format!(
            "drift condition fails by {} at state {}",
            dr.worst_violation, dr.witness
        )));
    }
    require_verified_minorization(chain, &drift.c, mino)?;
    let pi = stationary_distribution(chain)?;
    let params = DriftParams::new(drift.lambda, drift.k, mino.m, mino.epsilon)?;
    let rate = bounds::compute_rate_params(&params)?;
    let n = chain.n();

    // (i) (P^m V)(x) ≤ B on C.
    let q = chain.kernel_power(mino.m);
    let mut b_viol = f64::NEG_INFINITY;
    let mut b_wit = drift.c[0];
    for &x in &drift.c {
        let pmv: f64 = (0..n).map(|y| q[(x, y)] * drift.v[y]).sum();
        if pmv - rate.b > b_viol {
            b_viol = pmv - rate.b;
            b_wit = x;
        }
    }

    // (ii) π(V) ≤ (K − λ)/(1 − λ) π(C).
    let pi_v: f64 = pi.iter().zip(&drift.v).map(|(p, v)| p * v).sum();
    let pi_c: f64 = drift.c.iter().map(|&x| pi[x]).sum();
    let pi_v_violation = pi_v - (drift.k - drift.lambda) / (1.0 - drift.lambda) * pi_c;

    // (iii) ‖P^t(x,·) − π‖_V ≤ 2K Σ_{n=1}^t λ^{n−1} tv(t−n) + (V(x) + π(V)) λ^t.
    let mut v_viol = f64::NEG_INFINITY;
    let mut v_wit = (0usize, 0usize);
    for x in 0..n {
        let curves = distance_curves(chain, x, &drift.v, horizon)?;
        for t in 0..=horizon {
            let mut conv = 0.0;
            let mut lam_pow = 1.0;
            for s in 1..=t {
                conv += lam_pow * curves.tv[t - s];
                lam_pow *= drift.lambda;
            }
            // lam_pow is now λ^t.
            let rhs = 2.0 * drift.k * conv + (drift.v[x] + pi_v) * lam_pow;
            if curves.vnorm[t] - rhs > v_viol {
                v_viol = curves.vnorm[t] - rhs;
                v_wit = (x, t);
            }
        }
    }

    Ok(SupportingLemmasReport {
        b_bound_violation: b_viol,
        b_bound_witness: b_wit,
        pi_v_violation,
        tv_to_v_violation: v_viol,
        tv_to_v_witness: v_wit,
    })
}

/// The nearly periodic chain on Z/NZ: deterministic decrement off 0, a fair
/// coin at 0 between holding and wrapping to N−1. Comes packaged with its
/// exact drift data (V(j) = (1 − 1/N)^{−j}, C = {0}, λ = 1 − 1/N,
/// K = (1 + e)/2) and the full one-step minorization at 0.
pub fn nearly_periodic_chain(n: usize) -> Result<(FiniteChain, DriftSpec, MinorizationSpec)> {
    if n < 3 {
        return Err(Error::Domain(format!("nearly periodic chain needs N >= 3, got {n}")));
    }
    let mut rows = vec![vec![0.0; n]; n];
    rows[0][0] = 0.5;
    rows[0][n - 1] = 0.5;
    for j in 1..n {
        rows[j][j - 1] = 1.0;
    }
    let chain = FiniteChain::from_rows(&rows)?;
    let lambda = 1.0 - 1.0 / n as f64;
    let v: Vec<f64> = (0..n).map(|j| lambda.powi(-(j as i32))).collect();
    let drift = DriftSpec::new(v, vec![0], lambda, (1.0 + std::f64::consts::E) / 2.0)?;
    let mut nu = vec![0.0; n];
    nu[0] = 0.5;
    nu[n - 1] = 0.5;
    let mino = MinorizationSpec::new(1, 1.0, nu)?;
    let dr = chain.verify_drift(&drift)?;
    if !dr.holds || !chain.verify_minorization(&drift.c, &mino)? {
        return Err(Error::Precondition("nearly periodic construction failed self-check".into()));
    }
    Ok((chain, drift, mino))
}

/// Second-largest eigenvalue modulus: the optimal asymptotic TV rate of an
/// irreducible finite chain.
pub fn tv_rate(chain: &FiniteChain) -> Result<f64> {
    require_irreducible(chain)?;
    let eigs: Vec<Complex<f64>> = chain
        .kernel()
        .clone()
        .complex_eigenvalues()
        .iter()
        .cloned()
        .collect();
    // Drop the one eigenvalue nearest 1 (the Perron root, exact up to fp).
    let perron = eigs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (**a - Complex::new(1.0, 0.0)).norm();
            let db = (**b - Complex::new(1.0, 0.0)).norm();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .expect("n >= 2 guarantees eigenvalues");
    Ok(eigs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != perron)
        .map(|(_, e)| e.norm())
        .fold(0.0, f64::max))
}

/// Fit ln(1 − tv_rate) against ln N over nearly periodic chains; the
/// least-squares slope should sit near −3.
pub fn cubic_scaling_experiment(n_values: &[usize]) -> Result<ScalingReport> {
    if n_values.len() < 4 {
        return Err(Error::Domain("scaling experiment needs at least 4 sizes".into()));
    }
    if n_values.iter().any(|&n| n < 3) {
        return Err(Error::Domain("scaling experiment sizes must be >= 3".into()));
    }
    let per_n: Vec<ScalingPoint> = n_values
        .par_iter()
        .map(|&n| {
            let (chain, _, _) = nearly_periodic_chain(n)?;
            let rate = tv_rate(&chain)?;
            Ok(ScalingPoint { n, tv_rate: rate, gap: 1.0 - rate })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = per_n.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = per_n.iter().map(|p| p.gap.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - xbar) * (y - ybar);
        den += (x - xbar) * (x - xbar);
    }
    Ok(ScalingReport { slope: num / den, per_n })
}

/// Random lazy reversible chain with exact drift data, for test suites.
///
/// The kernel comes from a symmetric positive weight matrix (reversible by
/// construction, strictly positive so irreducible), made lazy so the
/// spectrum is nonnegative. V is the exponential hitting moment for
/// λ = (1 + sr(P_DD))/2, which satisfies the drift condition with equality
/// off C, and K = max_C PV; minorization is the canonical extraction.
/// Canonical drift data for a chain and a chosen small set: λ sits halfway
/// between the off-C spectral radius and 1, V is the minimal drift function
/// for that λ (the exponential hitting moment), and K is the exact ceiling
/// of PV over C. The resulting spec always passes `verify_drift`.
pub fn derive_drift_spec(chain: &FiniteChain, c: &[usize]) -> Result<DriftSpec> {
    let n = chain.n();
    let mut c: Vec<usize> = c.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.is_empty() || c.iter().any(|&x| x >= n) {
        return Err(Error::Dimension("small set empty or out of range".into()));
    }
    if c.len() == n {
        return Err(Error::Domain("small set covers every state; no drift to derive".into()));
    }
    let d: Vec<usize> = (0..n).filter(|x| !c.contains(x)).collect();
    let sub = DMatrix::from_fn(d.len(), d.len(), |i, j| chain.kernel()[(d[i], d[j])]);
    let sr = sub
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    let lambda = (1.0 + sr) / 2.0;
    let h = exponential_hitting_moment(chain, &c, lambda)?;
    let k = c
        .iter()
        .map(|&x| (0..n).map(|y| chain.kernel()[(x, y)] * h[y]).sum::<f64>())
        .fold(1.0, f64::max);
    DriftSpec::new(h, c, lambda, k)
}

pub fn random_reversible_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_n: usize,
) -> Result<(FiniteChain, DriftSpec, MinorizationSpec)> {
    let n = rng.random_range(3..=max_n.max(3));
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.random_range(0.05..1.0);
            w[i][j] = x;
            w[j][i] = x;
        }
    }
    let rows: Vec<Vec<f64>> = w
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    let chain = FiniteChain::from_rows(&rows)?.make_lazy();
    let c_size = rng.random_range(1..=3.min(n - 1));
    let c: Vec<usize> = rand::seq::index::sample(rng, n, c_size).into_vec();
    let mino = chain.extract_minorization(&c, 1)?;
    let drift = derive_drift_spec(&chain, &c)?;
    Ok((chain, drift, mino))
}
