//! Error type shared by the numeric modules.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The linear part is not a node: `|gamma|` must exceed 1.
    #[error("not a node: |gamma| must exceed 1, got gamma = {0}")]
    NonNodeParams(f64),
    /// A parameter or query violates an operation precondition.
    #[error("domain error: {0}")]
    DomainError(String),
    /// The query point lies outside the open domain of the map.
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    /// An iterative solve did not reach its tolerance.
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),
    /// The orbit never crosses the switching line again.
    #[error("orbit does not return to the switching line")]
    NoReturn,
    /// The candidate does not satisfy the double-root residual bounds.
    #[error("not a double root: {0}")]
    NotADoubleRoot(String),
    /// The operation is defined only for the refracting case `b = 0`.
    #[error("requires b = 0, got b = {0}")]
    RequiresRefracting(f64),
    /// A cross-check residual exceeded its bound.
    #[error("residual too large: {0:e}")]
    ResidualTooLarge(f64),
    /// No small-amplitude cycle bifurcates for this sign of `b * Delta1`.
    #[error("no small cycle: b * Delta1 is not negative")]
    NoSmallCycle,
}

pub type Result<T> = std::result::Result<T, Error>;
