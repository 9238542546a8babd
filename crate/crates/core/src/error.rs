//! Error type shared by the analytic pipeline.

use thiserror::Error;

/// Errors produced by the analytic pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Cycle lengths of two processes or plans disagree.
    #[error("cycle length mismatch: {left} vs {right}")]
    CycleMismatch { left: usize, right: usize },

    /// A vector argument does not have the expected length.
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid parameter for a distribution or plan.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evaluation at a pole (z = 0 with a nonempty middle segment).
    #[error("evaluation at z = 0 is a pole here")]
    PoleAtZero,

    /// The queue is unstable: mean arrivals per cycle reach the green capacity.
    #[error("unstable queue `{queue}`: mean arrivals per cycle {mean_arrivals:.6} >= green slots {green} (rho = {rho:.4})")]
    Unstable {
        queue: String,
        mean_arrivals: f64,
        green: usize,
        rho: f64,
    },

    /// Root finding did not reach the expected root count.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// The boundary-probability linear system is numerically singular.
    #[error("singular linear system: |pivot| = {pivot:.3e} at column {column}")]
    SingularSystem { pivot: f64, column: usize },

    /// Solved boundary probabilities are too negative to be roundoff.
    #[error("boundary probability q[{index}] = {value:.3e} below tolerance")]
    NegativeProbability { index: usize, value: f64 },

    /// The network graph contains a cycle.
    #[error("network is not acyclic: cycle through node `{0}`")]
    CyclicNetwork(String),

    /// A network node references an unknown parent.
    #[error("unknown network node `{0}`")]
    UnknownNode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
