//! Finite Markov chains with their drift and minorization data.
//!
//! Everything is dense and exact-ish: validation tolerances are fixed at
//! construction, verification ops re-check the defining inequalities
//! entrywise, and the only spectral machinery is a symmetric eigensolve.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic transition kernel on n ≥ 2 states.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    n: usize,
    p: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl FiniteChain {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if n < 2 || p.ncols() != n {
            return Err(Error::Dimension(format!(
                "kernel must be square with n >= 2, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = p[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "kernel entry ({i},{j}) = {v} is not a probability"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!(
                    "row {i} sums to {sum}, off by more than {ROW_SUM_TOL}"
                )));
            }
        }
        Ok(FiniteChain { n, p, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Parse the plain-text matrix format: one whitespace-separated row per
    /// line, optionally preceded by a `#`-prefixed header of state labels.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if rows.is_empty() && labels.is_none() {
                    let toks: Vec<String> = rest.split_whitespace().map(String::from).collect();
                    if !toks.is_empty() {
                        labels = Some(toks);
                    }
                }
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| {
                Error::Parse(format!("line {}: {e}", lineno + 1))
            })?);
        }
        let mut chain = Self::from_rows(&rows)?;
        if let Some(l) = labels {
            if l.len() != chain.n {
                return Err(Error::Parse(format!(
                    "header has {} labels for {} states",
                    l.len(),
                    chain.n
                )));
            }
            chain.labels = Some(l);
        }
        Ok(chain)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// P^m by repeated multiplication.
    pub fn kernel_power(&self, m: u32) -> DMatrix<f64> {
        let mut q = self.p.clone();
        for _ in 1..m {
            q = &q * &self.p;
        }
        q
    }

    /// The lazy version (I + P)/2. Shifts every eigenvalue κ to (1 + κ)/2,
    /// so reversible inputs come out with nonnegative spectrum.
    pub fn make_lazy(&self) -> FiniteChain {
        let mut p = self.p.clone() * 0.5;
        for i in 0..self.n {
            p[(i, i)] += 0.5;
        }
        FiniteChain { n: self.n, p, labels: self.labels.clone() }
    }

    /// Strong connectivity of the support graph: every state reachable from
    /// state 0 and state 0 reachable from every state.
    pub fn is_irreducible(&self) -> bool {
        let fwd = self.reach(0, false);
        let bwd = self.reach(0, true);
        fwd.iter().all(|&b| b) && bwd.iter().all(|&b| b)
    }

    fn reach(&self, start: usize, transpose: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            for y in 0..self.n {
                let w = if transpose { self.p[(y, x)] } else { self.p[(x, y)] };
                if w > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }

    /// Stationary distribution by direct linear solve of the balance
    /// equations with the normalization row appended.
    pub(crate) fn stationary_solve(&self) -> Result<Vec<f64>> {
        let n = self.n;
        // A = Pᵀ − I with the last equation replaced by Σ π = 1.
        let mut a = self.p.transpose();
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("stationary balance equations".into()))?;
        let mut pi: Vec<f64> = pi.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= total;
        }
        // πP = π must hold to 1e-12 in ℓ₁ or the solve is not trusted.
        let mut resid = 0.0;
        for y in 0..n {
            let mut s = 0.0;
            for x in 0..n {
                s += pi[x] * self.p[(x, y)];
            }
            resid += (s - pi[y]).abs();
        }
        if resid > 1e-12 {
            return Err(Error::SingularSystem(format!(
                "stationary solve residual {resid:.3e} exceeds 1e-12"
            )));
        }
        Ok(pi)
    }
}

/// Drift data: V ≥ 1, small-set candidate C, rate λ, ceiling K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub v: Vec<f64>,
    pub c: Vec<usize>,
    pub lambda: f64,
    pub k: f64,
}

impl DriftSpec {
    pub fn new(v: Vec<f64>, mut c: Vec<usize>, lambda: f64, k: f64) -> Result<Self> {
        if v.iter().any(|&x| !(x >= 1.0) || !x.is_finite()) {
            return Err(Error::Domain("drift function must satisfy V >= 1 everywhere".into()));
        }
        c.sort_unstable();
        c.dedup();
        if c.is_empty() {
            return Err(Error::Domain("small-set candidate C must be nonempty".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!("lambda must lie in (0,1), got {lambda}")));
        }
        if !(k >= 1.0) {
            return Err(Error::Domain(format!("K must be >= 1, got {k}")));
        }
        Ok(DriftSpec { v, c, lambda, k })
    }

    pub fn in_c(&self, x: usize) -> bool {
        self.c.binary_search(&x).is_ok()
    }
}

/// Minorization data: P^m(x, ·) ≥ ε ν(·) claimed on a small set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorizationSpec {
    pub m: u32,
    pub epsilon: f64,
    pub nu: Vec<f64>,
}

impl MinorizationSpec {
    pub fn new(m: u32, epsilon: f64, nu: Vec<f64>) -> Result<Self> {
        if m < 1 {
            return Err(Error::Domain("m must be >= 1".into()));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0,1], got {epsilon}")));
        }
        if nu.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain("nu entries must be nonnegative".into()));
        }
        let sum: f64 = nu.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Domain(format!("nu sums to {sum}, not a probability vector")));
        }
        Ok(MinorizationSpec { m, epsilon, nu })
    }
}

/// Outcome of a drift check. `worst_violation` is the largest excess of PV
/// over its ceiling (negative slack when the condition holds); `witness` is
/// the state attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub holds: bool,
    pub worst_violation: f64,
    pub witness: usize,
}

/// Reversibility and spectrum summary.
///
/// `min_eigenvalue` is the smallest eigenvalue of the symmetric part of the
/// π-symmetrized kernel D^{1/2} P D^{−1/2}; for reversible chains that
/// matrix is symmetric and this is exactly the smallest eigenvalue of P.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub reversible: bool,
    pub min_eigenvalue: f64,
    pub stationary: Vec<f64>,
}

impl FiniteChain {
    /// Check PV ≤ λV off C and PV ≤ K on C, with 1e-12 slack.
    pub fn verify_drift(&self, spec: &DriftSpec) -> Result<DriftReport> {
        if spec.v.len() != self.n {
            return Err(Error::Dimension(format!(
                "drift function has {} entries for {} states",
                spec.v.len(),
                self.n
            )));
        }
        if spec.c.iter().any(|&x| x >= self.n) {
            return Err(Error::Dimension("small set references a state out of range".into()));
        }
        let mut worst = f64::NEG_INFINITY;
        let mut witness = 0;
        for x in 0..self.n {
            let pv: f64 = (0..self.n).map(|y| self.p[(x, y)] * spec.v[y]).sum();
            let ceiling = if spec.in_c(x) { spec.k } else { spec.lambda * spec.v[x] };
            let excess = pv - ceiling;
            if excess > worst {
                worst = excess;
                witness = x;
            }
        }
        Ok(DriftReport { holds: worst <= 1e-12, worst_violation: worst, witness })
    }

    /// The canonical maximal split for (C, m): ε = Σ_y min_{x∈C} P^m(x,y),
    /// ν proportional to the columnwise minima.
    pub fn extract_minorization(&self, c: &[usize], m: u32) -> Result<MinorizationSpec> {
        if c.is_empty() {
            return Err(Error::Domain("small set must be nonempty".into()));
        }
        if c.iter().any(|&x| x >= self.n) {
            return Err(Error::Dimension("small set references a state out of range".into()));
        }
        if m < 1 {
            return Err(Error::Domain("m must be >= 1".into()));
        }
        let q = self.kernel_power(m);
        let mins: Vec<f64> = (0..self.n)
            .map(|y| c.iter().map(|&x| q[(x, y)]).fold(f64::INFINITY, f64::min))
            .collect();
        let epsilon: f64 = mins.iter().sum();
        if epsilon <= 0.0 {
            return Err(Error::DegenerateMinorization(format!(
                "rows of P^{m} over C have disjoint support"
            )));
        }
        let nu: Vec<f64> = mins.iter().map(|&v| v / epsilon).collect();
        MinorizationSpec::new(m, epsilon.min(1.0), nu)
    }

    /// True iff P^m(x,y) ≥ ε ν(y) − 1e-12 for every x ∈ C and y.
    pub fn verify_minorization(&self, c: &[usize], spec: &MinorizationSpec) -> Result<bool> {
        if spec.nu.len() != self.n {
            return Err(Error::Dimension(format!(
                "nu has {} entries for {} states",
                spec.nu.len(),
                self.n
            )));
        }
        if c.is_empty() || c.iter().any(|&x| x >= self.n) {
            return Err(Error::Dimension("small set empty or out of range".into()));
        }
        let q = self.kernel_power(spec.m);
        for &x in c {
            for y in 0..self.n {
                if q[(x, y)] < spec.epsilon * spec.nu[y] - 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn spectral_report(&self) -> Result<SpectralReport> {
        self.spectral_report_with_tol(1e-10)
    }

    /// As `spectral_report`, with the detailed-balance tolerance exposed.
    pub fn spectral_report_with_tol(&self, balance_tol: f64) -> Result<SpectralReport> {
        if !self.is_irreducible() {
            return Err(Error::Reducible(
                "stationary distribution not unique for reducible chain".into(),
            ));
        }
        let pi = self.stationary_solve()?;
        let mut reversible = true;
        'outer: for x in 0..self.n {
            for y in (x + 1)..self.n {
                if (pi[x] * self.p[(x, y)] - pi[y] * self.p[(y, x)]).abs() > balance_tol {
                    reversible = false;
                    break 'outer;
                }
            }
        }
        // Symmetric part of D^{1/2} P D^{−1/2}; exact symmetrization makes
        // the eigensolve well-posed whether or not balance holds.
        let s = DMatrix::from_fn(self.n, self.n, |i, j| {
            let a = (pi[i] / pi[j]).sqrt() * self.p[(i, j)];
            let b = (pi[j] / pi[i]).sqrt() * self.p[(j, i)];
            0.5 * (a + b)
        });
        let eigs = s.symmetric_eigen().eigenvalues;
        let min_eigenvalue = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(SpectralReport { reversible, min_eigenvalue, stationary: pi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::nearly_periodic_chain;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_state(a: f64, b: f64) -> FiniteChain {
        FiniteChain::from_rows(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn rejects_malformed_kernels() {
        assert!(FiniteChain::from_rows(&[vec![1.0]]).is_err());
        assert!(FiniteChain::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(FiniteChain::from_rows(&[vec![-0.1, 1.1], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn parses_text_format_with_label_header() {
        let chain = FiniteChain::parse("# a b\n0.5 0.5\n0.25 0.75\n").unwrap();
        assert_eq!(chain.n(), 2);
        assert_eq!(chain.labels(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(chain.kernel()[(1, 0)], 0.25);
        assert!(FiniteChain::parse("# a b c\n0.5 0.5\n0.25 0.75\n").is_err());
        assert!(FiniteChain::parse("0.5 x\n0.25 0.75\n").is_err());
    }

    #[test]
    fn drift_holds_on_nearly_periodic_chain() {
        let (chain, spec, _) = nearly_periodic_chain(10).unwrap();
        let report = chain.verify_drift(&spec).unwrap();
        assert!(report.holds, "violation {} at {}", report.worst_violation, report.witness);
    }

    #[test]
    fn drift_fails_with_interior_witness_when_lambda_too_small() {
        let (chain, spec, _) = nearly_periodic_chain(10).unwrap();
        let bad = DriftSpec::new(spec.v.clone(), spec.c.clone(), 0.5, spec.k).unwrap();
        let report = chain.verify_drift(&bad).unwrap();
        assert!(!report.holds);
        assert!(report.witness > 0);
    }

    #[test]
    fn trivial_drift_always_holds() {
        let chain = two_state(0.3, 0.8);
        let spec = DriftSpec::new(vec![1.0, 1.0], vec![0, 1], 0.5, 1.0).unwrap();
        assert!(chain.verify_drift(&spec).unwrap().holds);
    }

    #[test]
    fn extraction_on_nearly_periodic_chain_is_full() {
        let (chain, _, _) = nearly_periodic_chain(10).unwrap();
        let spec = chain.extract_minorization(&[0], 1).unwrap();
        assert_eq!(spec.epsilon, 1.0);
        assert_eq!(spec.nu[0], 0.5);
        assert_eq!(spec.nu[9], 0.5);
    }

    #[test]
    fn extraction_two_state_formula() {
        let (a, b) = (0.3, 0.8);
        let spec = two_state(a, b).extract_minorization(&[0, 1], 1).unwrap();
        let want = (1.0f64 - a).min(b) + a.min(1.0 - b);
        assert_relative_eq!(spec.epsilon, want, max_relative = 1e-15);
    }

    #[test]
    fn extraction_singleton_gives_the_row() {
        let chain = two_state(0.3, 0.8);
        let spec = chain.extract_minorization(&[1], 1).unwrap();
        assert_eq!(spec.epsilon, 1.0);
        assert_relative_eq!(spec.nu[0], 0.8, max_relative = 1e-15);
        assert_relative_eq!(spec.nu[1], 0.2, max_relative = 1e-15);
    }

    #[test]
    fn extraction_degenerates_on_disjoint_support() {
        let chain =
            FiniteChain::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            chain.extract_minorization(&[0, 1], 1),
            Err(Error::DegenerateMinorization(_))
        ));
    }

    #[test]
    fn verification_tracks_epsilon_maximality() {
        let chain = two_state(0.3, 0.8);
        let c = [0usize, 1];
        let spec = chain.extract_minorization(&c, 1).unwrap();
        assert!(chain.verify_minorization(&c, &spec).unwrap());
        let inflated =
            MinorizationSpec::new(1, (spec.epsilon * 1.01).min(1.0), spec.nu.clone()).unwrap();
        assert!(!chain.verify_minorization(&c, &inflated).unwrap());
        let shrunk = MinorizationSpec::new(1, spec.epsilon * 0.99, spec.nu.clone()).unwrap();
        assert!(chain.verify_minorization(&c, &shrunk).unwrap());
    }

    #[test]
    fn lazy_transform_basics() {
        let flip = two_state(1.0, 1.0);
        let lazy = flip.make_lazy();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(lazy.kernel()[(i, j)], 0.5);
            }
        }
        let report = lazy.spectral_report().unwrap();
        assert!(report.reversible);
        assert!(report.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn nearly_periodic_chain_is_not_reversible() {
        let (chain, _, _) = nearly_periodic_chain(8).unwrap();
        let report = chain.spectral_report().unwrap();
        assert!(!report.reversible);
    }

    #[test]
    fn symmetric_kernel_is_reversible_with_uniform_pi() {
        let chain = FiniteChain::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.5, 0.1, 0.4],
            vec![0.3, 0.4, 0.3],
        ])
        .unwrap();
        let report = chain.spectral_report().unwrap();
        assert!(report.reversible);
        for &v in &report.stationary {
            assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let chain = FiniteChain::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(chain.spectral_report(), Err(Error::Reducible(_))));
    }

    prop_compose! {
        fn arb_chain(max_n: usize)(n in 2..=max_n)(
            rows in proptest::collection::vec(
                proptest::collection::vec(0.05f64..1.0, n), n),
        ) -> FiniteChain {
            // Strictly positive entries: irreducible and aperiodic.
            let normalized: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|v| v / s).collect()
                })
                .collect();
            FiniteChain::from_rows(&normalized).unwrap()
        }
    }

    proptest! {
        #[test]
        fn lazy_preserves_stationary(chain in arb_chain(7)) {
            let pi = chain.stationary_solve().unwrap();
            let pi_lazy = chain.make_lazy().stationary_solve().unwrap();
            let l1: f64 = pi.iter().zip(&pi_lazy).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(l1 <= 1e-12);
        }

        #[test]
        fn lazy_preserves_reversibility_and_shifts_spectrum(chain in arb_chain(6)) {
            let before = chain.spectral_report().unwrap();
            let after = chain.make_lazy().spectral_report().unwrap();
            prop_assert_eq!(before.reversible, after.reversible);
            if before.reversible {
                let want = (1.0 + before.min_eigenvalue) / 2.0;
                prop_assert!((after.min_eigenvalue - want).abs() <= 1e-10);
                prop_assert!(after.min_eigenvalue >= -1e-10);
            }
        }

        #[test]
        fn extracted_minorization_verifies_and_is_maximal(chain in arb_chain(6), m in 1u32..3) {
            let n = chain.n();
            let c: Vec<usize> = (0..n.min(3)).collect();
            let spec = chain.extract_minorization(&c, m).unwrap();
            prop_assert!(chain.verify_minorization(&c, &spec).unwrap());
            if spec.epsilon < 0.99 {
                let inflated = MinorizationSpec::new(m, spec.epsilon * 1.01, spec.nu.clone()).unwrap();
                prop_assert!(!chain.verify_minorization(&c, &inflated).unwrap());
            }
        }
    }
}
