//! Certified convergence bounds for Markov chains from drift and
//! minorization data.
//!
//! Given a Foster–Lyapunov drift condition (PV ≤ λV off a small set C,
//! PV ≤ K on C) and an m-step minorization (P^m(x,·) ≥ εν on C), this
//! crate computes the geometric rate certificate (B, ρ, r), explicit
//! total-variation and V-norm bound curves, and the mixing times they
//! certify. Everything is validated two ways: exactly, against
//! finite-chain oracles that compute distances and the law of the strong
//! random time by dynamic programming, and statistically, by Monte Carlo
//! simulation of the splitting construction.
//!
//! Modules:
//!
//! - [`bounds`]: rate formulas, bound polynomials, mixing times.
//! - [`chain`]: finite kernels, drift and minorization specs, verifiers.
//! - [`oracle`]: exact distance curves, regeneration DP, inequality checks.
//! - [`simulate`]: strong-random-time simulation with Wilson bands.
//! - [`pump`]: the pump-failure Gibbs sampler worked end to end.
//! - [`special`]: log-gamma, regularized incomplete gamma, gamma sampling.
//! - [`quad`]: adaptive Gauss–Kronrod quadrature.
//!
//! ```
//! use driftbound::bounds::{compute_rate_params, DriftParams};
//!
//! let params = DriftParams::new(0.61, 3.05, 1, 0.287).unwrap();
//! let rate = compute_rate_params(&params).unwrap();
//! assert!((rate.rho - 0.9135).abs() < 5e-4);
//! ```

// Frozen reference constants keep every digit of the independent
// computation that produced them, and `!(x >= 1.0)` guards are written
// that way to catch NaN. Both are deliberate; index-heavy numeric loops
// stay as plain ranges.
#![allow(clippy::excessive_precision)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod chain;
pub mod error;
pub mod oracle;
pub mod pump;
pub mod quad;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
