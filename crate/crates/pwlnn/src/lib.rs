//! Crossing limit cycles of discontinuous planar piecewise-linear systems
//! with two nodes.
//!
//! The system lives on the plane split by the switching line `x = 0`. Each
//! half-plane carries a linear vector field whose singularity is a node with
//! eigenvalues `gamma - 1` and `gamma + 1`, `|gamma| > 1`; the right field is
//! offset by `b` along the line. The crate provides
//!
//! - [`model`]: the canonical five-parameter system, closed-form subsystem
//!   flow, equilibria and invariant lines;
//! - [`halfmaps`]: the two Poincaré half maps in parametric form, their
//!   domains, numerical inversion and endpoint derivatives;
//! - [`successor`]: the successor function `d(y0; b)` whose zeros are the
//!   crossing limit cycles, its first two derivatives, cycle isolation with
//!   multiplicity and stability, regime classification and scans over `b`;
//! - [`oracle`]: an independent verification path built on event-located
//!   crossings of the closed-form flow and forward iteration of the full
//!   return map.
//!
//! All types are immutable after construction and every operation is pure,
//! so the API is safe to drive from parallel contexts.

pub mod error;
pub mod halfmaps;
pub mod model;
pub mod oracle;
pub mod successor;

pub use error::{Error, Result};
pub use model::{PlanarState, Side, Subsystem, SystemParams};
