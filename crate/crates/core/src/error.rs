//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Polygon failed a structural invariant (orientation, simplicity, ...).
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    /// Flow image degenerated (area below the 1e-12 floor) or t outside the
    /// kind's admissible range.
    #[error("degenerate flow time t = {t}: {reason}")]
    DegenerateFlowTime { t: f64, reason: String },
    /// A theorem's side-length or angle ordering does not hold.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    /// Meshing requires a convex input polygon.
    #[error("non-convex input polygon: {0}")]
    NonConvexInput(String),
    /// Linear or eigenvalue solve did not converge.
    #[error("solve failure: {0}")]
    SolveFailure(String),
    /// Boundary side tag not present in a trace or polygon.
    #[error("unknown side tag `{0}`")]
    UnknownTag(String),
    /// Proof-form expression not defined for this flow kind.
    #[error("unsupported flow kind for this operation: {0}")]
    UnsupportedKind(String),
    /// Curvature flow step lost strict convexity (rho fell below the floor).
    #[error("convexity lost: min rho = {min_rho:.3e}")]
    ConvexityLost { min_rho: f64 },
    /// Support value crossed zero: the origin left the body.
    #[error("origin escaped body: min h = {min_h:.3e}")]
    OriginEscaped { min_h: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
