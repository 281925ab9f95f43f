use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bend limit exceeded: |Δθ| = {requested:.6} rad > {limit:.6} rad")]
    LimitExceeded { requested: f64, limit: f64 },

    #[error("cycle state error: {0}")]
    CycleState(String),

    #[error("target unreachable: required bend {required:.6} rad exceeds limit {limit:.6} rad + slack {slack:.6} rad")]
    TargetUnreachable { required: f64, limit: f64, slack: f64 },

    #[error("solver failure after {iterations} iterations: projected gradient {gradient_norm:.3e} > {threshold:.3e}")]
    SolverFailure {
        iterations: usize,
        gradient_norm: f64,
        threshold: f64,
    },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("trajectory too short: {length:.3} mm < {required:.3} mm")]
    TrajectoryTooShort { length: f64, required: f64 },

    #[error("grid too small: footprint reaches ({x:.3}, {y:.3}) mm outside the grid")]
    GridTooSmall { x: f64, y: f64 },

    #[error("degenerate footprint: final frame has no occupied cells")]
    DegenerateFootprint,

    #[error("mismatched metadata: {0}")]
    MismatchedMetadata(String),
}
