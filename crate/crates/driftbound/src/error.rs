use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
///
/// Variants split into two families, which the CLI maps onto exit codes:
/// input/validation problems (bad parameters, unverifiable data, reducible
/// chains, horizons too small) and internal numeric failures (quadrature or
/// linear solves that did not converge).
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The chain's support graph is not strongly connected, so the
    /// stationary distribution is not unique.
    #[error("chain is not irreducible: {0}")]
    Reducible(String),

    /// Extracted minorization mass is zero; the rows of P^m over C have
    /// disjoint support.
    #[error("degenerate minorization: {0}")]
    DegenerateMinorization(String),

    /// Supplied data failed a verification step required by the operation.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The DP horizon left more residual mass than the operation tolerates.
    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),

    /// No t within the horizon certifies the requested target.
    #[error("target not reached: {0}")]
    TargetNotReached(String),

    /// The set {PV > lambda V} is not a single interval on the scan domain.
    #[error("small set is not a single interval: {0}")]
    NonIntervalSmallSet(String),

    /// The set {PV > lambda V} is empty on the scan domain.
    #[error("small set is empty: {0}")]
    EmptySmallSet(String),

    /// PV(x) > lambda V(x) still holds at the scan boundary, so the small
    /// set is unbounded at this lambda.
    #[error("small set unbounded at scan boundary: {0}")]
    UnboundedSmallSet(String),

    /// An iterative numeric routine (quadrature, series, root finder)
    /// failed to reach its tolerance.
    #[error("numeric routine did not converge: {0}")]
    NonConvergence(String),

    /// A linear system required by an exact computation was singular.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error reflects bad input rather than a numeric failure
    /// inside the computation. The CLI maps this to exit code 1 vs 2.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonConvergence(_) | Error::SingularSystem(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
