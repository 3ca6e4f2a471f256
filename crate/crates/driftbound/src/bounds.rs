//! Convergence rate and bound computation from drift and minorization data.
//!
//! Input is the four-tuple (λ, K, m, ε): a geometric drift condition
//! PV ≤ λV off a small set C with PV ≤ K on C, and an m-step minorization
//! P^m(x, ·) ≥ ε ν(·) on C. Output is a certified geometric rate ρ together
//! with explicit total-variation and V-norm bound curves
//!
//! ```text
//! ‖P^t(x, ·) − π‖_TV ≤ (f1 t + f0) ρ^t
//! ‖P^t(x, ·) − π‖_V  ≤ polynomial-in-t mixture of ρ^t and λ^t
//! ```
//!
//! and a tail bound on the strong random time T that drives them. All
//! formulas are evaluated in log domain so large t underflows to zero
//! instead of losing the bound.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Drift and minorization data for one chain.
///
/// `k` is the bound on PV over the small set (written K in the usual
/// statement of the drift condition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub lambda: f64,
    pub k: f64,
    pub m: u32,
    pub epsilon: f64,
}

impl DriftParams {
    pub fn new(lambda: f64, k: f64, m: u32, epsilon: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!("lambda must lie in (0,1), got {lambda}")));
        }
        if !(k >= 1.0) || !k.is_finite() {
            // V ≥ 1 forces PV ≥ 1, so any valid K is at least 1.
            return Err(Error::Domain(format!("K must be >= 1, got {k}")));
        }
        if m < 1 {
            return Err(Error::Domain("m must be >= 1".into()));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0,1], got {epsilon}")));
        }
        Ok(DriftParams { lambda, k, m, epsilon })
    }
}

/// Derived rate data: the m-step drift ceiling B, the certified geometric
/// rate ρ ∈ [λ, 1), and the tilt exponent r = log ρ / log λ ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub b: f64,
    pub rho: f64,
    pub r: f64,
}

/// Rate of the strong random time built from (λ, K, m, ε).
///
/// With ε = 1 regeneration happens at every small-set visit and the rate is
/// λ itself. Otherwise ρ balances the geometric cost of failed regeneration
/// attempts (factor 1 − ε per coin) against the drift's return speed:
///
/// ```text
/// log ρ0 = log λ · (−log(1 − ε)) / (−m log λ + log(B − ε) − log(1 − ε))
/// ρ = max(λ, ρ0)
/// ```
pub fn compute_rate_params(p: &DriftParams) -> Result<RateParams> {
    let lam_m = p.lambda.powi(p.m as i32);
    let b = (1.0 - lam_m) / (1.0 - p.lambda) * (p.k - p.lambda) + lam_m;
    if b - p.epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "B = {b} does not exceed epsilon = {}; rate formula degenerates",
            p.epsilon
        )));
    }
    if p.epsilon == 1.0 {
        return Ok(RateParams { b, rho: p.lambda, r: 1.0 });
    }
    let log_lam = p.lambda.ln();
    let log_one_minus_eps = (1.0 - p.epsilon).ln();
    let denom = -(p.m as f64) * log_lam + (b - p.epsilon).ln() - log_one_minus_eps;
    // B ≥ 1 makes both denominator pieces nonnegative and the first strict.
    let log_rho0 = -log_one_minus_eps * log_lam / denom;
    let rho = log_rho0.exp().max(p.lambda);
    let r = rho.ln() / log_lam;
    Ok(RateParams { b, rho, r })
}

/// Tail bound P_μ(T > t) ≤ μ(V)^r ρ^{t+1−m} on the strong random time,
/// for a start distribution μ with μ(V) = `mu_v`.
///
/// The exponent goes negative for t < m − 1 and the bound then exceeds one;
/// it is reported as the formula gives it, without clipping.
pub fn tail_bound(p: &DriftParams, rate: &RateParams, mu_v: f64, t: u64) -> Result<f64> {
    if !(mu_v >= 1.0) || !mu_v.is_finite() {
        return Err(Error::Domain(format!("mu_v must be >= 1, got {mu_v}")));
    }
    let exponent = t as f64 + 1.0 - p.m as f64;
    Ok((rate.r * mu_v.ln() + exponent * rate.rho.ln()).exp())
}

/// Bound on ν(V) implied by the drift data: ν(V) ≤ (B − (1 − ε))/ε.
pub fn nu_drift_bound(p: &DriftParams, rate: &RateParams) -> f64 {
    (rate.b - (1.0 - p.epsilon)) / p.epsilon
}

/// Total-variation bound curve (f1 t + f0) ρ^t from a point start x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPolynomial {
    pub f1: f64,
    pub f0: f64,
    pub rho: f64,
}

/// Build the TV bound for a start at x with V(x) = `v_x`:
///
/// ```text
/// A(ν) = [(B − (1 − ε))/ε]^r ρ^{1−m}      regeneration-measure weight
/// A(x) = v_x^r ρ^{1−m}                     start weight
/// D    = ½ sqrt(A(ν) ρ / (1 − ρ))
/// f1   = (1 − ρ)/ρ · D · A(x)
/// f0   = (1 − D)₊ A(x) + D
/// ```
pub fn tv_bound_poly(p: &DriftParams, rate: &RateParams, v_x: f64) -> Result<BoundPolynomial> {
    if !(v_x >= 1.0) || !v_x.is_finite() {
        return Err(Error::Domain(format!("V(x) must be >= 1, got {v_x}")));
    }
    let rho = rate.rho;
    let shift = (1.0 - p.m as f64) * rho.ln();
    let a_nu = (rate.r * nu_drift_bound(p, rate).ln() + shift).exp();
    let a_x = (rate.r * v_x.ln() + shift).exp();
    let d = 0.5 * (a_nu * rho / (1.0 - rho)).sqrt();
    let f1 = (1.0 - rho) / rho * d * a_x;
    let f0 = (1.0 - d).max(0.0) * a_x + d;
    Ok(BoundPolynomial { f1, f0, rho })
}

/// Shape of the V-norm bound, split on whether the TV rate ρ coincides with
/// the drift rate λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VNormBranch {
    /// ρ = λ: the convolution of two rate-λ terms picks up a t² factor,
    /// value(t) = (g2 t² + g1 t + g0) λ^t.
    Critical { g2: f64, g1: f64 },
    /// ρ > λ: value(t) = (h1 t + h0) ρ^t + (g0 − h0) λ^t.
    Separated { h1: f64, h0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VNormBound {
    pub branch: VNormBranch,
    pub g0: f64,
    pub rho: f64,
    pub lambda: f64,
}

/// Build the V-norm bound for a start at x with V(x) = `v_x`.
///
/// The curve comes from folding the TV bound through one more drift step:
/// with F0, F1 the TV coefficients and G0 = v_x + (K − λ)/(1 − λ) the crude
/// V-norm start,
///
/// ```text
/// ρ = λ:  G1 = K λ⁻¹ (2 F0 − F1),  G2 = K λ⁻¹ F1
/// ρ > λ:  H1 = 2K F1/(ρ − λ),  H0 = 2K [F0/(ρ − λ) − ρ F1/(ρ − λ)²]
/// ```
pub fn vnorm_bound_poly(p: &DriftParams, rate: &RateParams, v_x: f64) -> Result<VNormBound> {
    let tv = tv_bound_poly(p, rate, v_x)?;
    let (f0, f1) = (tv.f0, tv.f1);
    let (rho, lambda) = (rate.rho, p.lambda);
    let g0 = v_x + (p.k - lambda) / (1.0 - lambda);
    let branch = if rho > lambda {
        let gap = rho - lambda;
        VNormBranch::Separated {
            h1: 2.0 * p.k * f1 / gap,
            h0: 2.0 * p.k * (f0 / gap - rho * f1 / (gap * gap)),
        }
    } else {
        VNormBranch::Critical {
            g2: p.k / lambda * f1,
            g1: p.k / lambda * (2.0 * f0 - f1),
        }
    };
    Ok(VNormBound { branch, g0, rho, lambda })
}

/// A bound curve over integer times, with enough structure to certify its
/// own eventual decrease.
pub trait BoundCurve {
    /// The bound value at time t.
    fn value(&self, t: u64) -> f64;

    /// A value that dominates `value(t)` for every t and is nonincreasing
    /// for t ≥ `monotone_from()`. Defaults to the curve itself.
    fn envelope(&self, t: u64) -> f64 {
        self.value(t)
    }

    /// First integer time from which `envelope` is certified nonincreasing.
    fn monotone_from(&self) -> u64;
}

/// Integer start of the decreasing regime of (c1 t + c0) ρ^t, from the
/// critical point t* = −1/log ρ − c0/c1.
fn affine_geo_monotone_from(c1: f64, c0: f64, rho: f64) -> u64 {
    if c1 <= 0.0 {
        return 0;
    }
    let t_star = -1.0 / rho.ln() - c0 / c1;
    if t_star <= 0.0 {
        0
    } else {
        t_star.ceil() as u64
    }
}

impl BoundCurve for BoundPolynomial {
    fn value(&self, t: u64) -> f64 {
        let t = t as f64;
        (self.f1 * t + self.f0) * (t * self.rho.ln()).exp()
    }

    fn monotone_from(&self) -> u64 {
        affine_geo_monotone_from(self.f1, self.f0, self.rho)
    }
}

impl VNormBound {
    /// ρ^t − λ^t evaluated without cancellation when ρ is barely above λ.
    fn geo_diff(&self, t: f64) -> f64 {
        let d = t * (self.rho.ln() - self.lambda.ln());
        if d < 0.5 {
            (t * self.lambda.ln()).exp() * d.exp_m1()
        } else {
            (t * self.rho.ln()).exp() - (t * self.lambda.ln()).exp()
        }
    }
}

impl BoundCurve for VNormBound {
    fn value(&self, t: u64) -> f64 {
        let t = t as f64;
        match self.branch {
            VNormBranch::Critical { g2, g1 } => {
                ((g2 * t + g1) * t + self.g0) * (t * self.lambda.ln()).exp()
            }
            VNormBranch::Separated { h1, h0 } => {
                h1 * t * (t * self.rho.ln()).exp()
                    + h0 * self.geo_diff(t)
                    + self.g0 * (t * self.lambda.ln()).exp()
            }
        }
    }

    fn envelope(&self, t: u64) -> f64 {
        match self.branch {
            VNormBranch::Critical { .. } => self.value(t),
            VNormBranch::Separated { h1, h0 } => {
                let t = t as f64;
                (h1 * t + h0).max(0.0) * (t * self.rho.ln()).exp()
                    + (self.g0 - h0).max(0.0) * (t * self.lambda.ln()).exp()
            }
        }
    }

    fn monotone_from(&self) -> u64 {
        match self.branch {
            VNormBranch::Critical { g2, g1 } => {
                if g2 <= 0.0 {
                    return affine_geo_monotone_from(g1.max(0.0), self.g0, self.lambda);
                }
                // Roots of the derivative factor
                // g2 logλ t² + (g1 logλ + 2 g2) t + (g0 logλ + g1).
                let ll = self.lambda.ln();
                let a2 = g2 * ll;
                let a1 = g1 * ll + 2.0 * g2;
                let a0 = self.g0 * ll + g1;
                let disc = a1 * a1 - 4.0 * a2 * a0;
                if disc <= 0.0 {
                    return 0;
                }
                let s = disc.sqrt();
                let t_star = ((-a1 + s) / (2.0 * a2)).max((-a1 - s) / (2.0 * a2));
                if t_star <= 0.0 {
                    0
                } else {
                    t_star.ceil() as u64
                }
            }
            VNormBranch::Separated { h1, h0 } => affine_geo_monotone_from(h1, h0, self.rho),
        }
    }
}

/// Minimal t such that the bound is at or below `target` for every u ≥ t.
///
/// The scan checks u ≤ `t_max` exactly; beyond the horizon the certified
/// nonincreasing envelope takes over, so the returned t covers all times,
/// not just the scanned window. Curves are not monotone near t = 0 (the
/// polynomial factor grows before the geometric factor wins), which is why
/// the definition quantifies over the whole suffix.
pub fn mixing_time<C: BoundCurve>(curve: &C, target: f64, t_max: u64) -> Result<u64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!("target must be positive, got {target}")));
    }
    if t_max < 1 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    if curve.monotone_from() > t_max {
        return Err(Error::TargetNotReached(format!(
            "horizon t_max = {t_max} ends before the certified decreasing regime at t = {}",
            curve.monotone_from()
        )));
    }
    if !(curve.envelope(t_max) <= target) {
        return Err(Error::TargetNotReached(format!(
            "bound is still {} > {target} at the horizon t_max = {t_max}",
            curve.envelope(t_max)
        )));
    }
    let mut ans = t_max;
    for u in (0..t_max).rev() {
        if curve.value(u) <= target {
            ans = u;
        } else {
            break;
        }
    }
    Ok(ans)
}
