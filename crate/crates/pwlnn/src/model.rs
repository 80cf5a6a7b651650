//! Canonical system representation and closed-form subsystem flow.
//!
//! The canonical system is
//!
//! ```text
//! (x', y') = (2*gamma_L*x - y,     (gamma_L^2 - 1)*x - alpha_L)   for x < 0,
//! (x', y') = (2*gamma_R*x - y + b, (gamma_R^2 - 1)*x - alpha_R)   for x > 0,
//! ```
//!
//! with `|gamma_{L,R}| > 1` so that each linear part is a node with real
//! eigenvalues `gamma - 1` and `gamma + 1`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Inputs with `|gamma|` this close to 1 are rejected rather than
/// regularized; the node hypothesis is strict.
pub const NODE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A point of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
}

impl PlanarState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// The five canonical parameters of the two-node system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub alpha_l: f64,
    pub alpha_r: f64,
    /// Offset of the right field along the switching line. `b = 0` is the
    /// refracting case (no sliding set).
    pub b: f64,
}

/// Validity of a parameter set with respect to the two standing hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    /// Both linear parts are nodes: `|gamma_{L,R}| > 1`.
    pub node: bool,
    /// `alpha_L > 0 > alpha_R`, the necessary condition for periodic orbits.
    pub cycle_ready: bool,
}

/// Outcome of the periodic-orbit feasibility check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleFeasibility {
    Ok,
    /// No periodic orbit can exist; the string names the violated inequality.
    NoCyclesPossible(String),
}

impl SystemParams {
    /// Validates the node condition on both sides. Finite parameters only.
    pub fn new(gamma_l: f64, gamma_r: f64, alpha_l: f64, alpha_r: f64, b: f64) -> Result<Self> {
        for v in [gamma_l, gamma_r, alpha_l, alpha_r, b] {
            if !v.is_finite() {
                return Err(Error::DomainError(format!("non-finite parameter {v}")));
            }
        }
        check_node(gamma_l)?;
        check_node(gamma_r)?;
        Ok(Self { gamma_l, gamma_r, alpha_l, alpha_r, b })
    }

    pub fn left(&self) -> Subsystem {
        Subsystem { gamma: self.gamma_l, alpha: self.alpha_l, b: 0.0, side: Side::Left }
    }

    pub fn right(&self) -> Subsystem {
        Subsystem { gamma: self.gamma_r, alpha: self.alpha_r, b: self.b, side: Side::Right }
    }

    pub fn subsystem(&self, side: Side) -> Subsystem {
        match side {
            Side::Left => self.left(),
            Side::Right => self.right(),
        }
    }

    pub fn validity(&self) -> Validity {
        Validity {
            node: self.gamma_l.abs() > 1.0 + NODE_MARGIN && self.gamma_r.abs() > 1.0 + NODE_MARGIN,
            cycle_ready: self.alpha_l > 0.0 && self.alpha_r < 0.0,
        }
    }

    /// `x`-components of the two vector fields on the switching line `x = 0`:
    /// `(-y, -y + b)`.
    pub fn boundary_field(&self, y: f64) -> (f64, f64) {
        (-y, -y + self.b)
    }

    /// Necessary condition for a periodic orbit: `alpha_L > 0 > alpha_R`.
    pub fn cycle_feasibility(&self) -> CycleFeasibility {
        if self.alpha_l <= 0.0 {
            CycleFeasibility::NoCyclesPossible(format!(
                "alpha_L > 0 violated (alpha_L = {})",
                self.alpha_l
            ))
        } else if self.alpha_r >= 0.0 {
            CycleFeasibility::NoCyclesPossible(format!(
                "alpha_R < 0 violated (alpha_R = {})",
                self.alpha_r
            ))
        } else {
            CycleFeasibility::Ok
        }
    }
}

fn check_node(gamma: f64) -> Result<()> {
    if gamma.abs() <= 1.0 + NODE_MARGIN {
        Err(Error::NonNodeParams(gamma))
    } else {
        Ok(())
    }
}

/// One linear subsystem, `(x', y') = (2*gamma*x - y + b, (gamma^2 - 1)*x - alpha)`.
/// The left subsystem carries `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subsystem {
    pub gamma: f64,
    pub alpha: f64,
    pub b: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineLabel {
    LeftMinus,
    LeftPlus,
    RightMinus,
    RightPlus,
}

/// An invariant straight line `y = slope * x + intercept` of one subsystem.
/// The `Minus` label carries slope `gamma - 1`, the `Plus` label `gamma + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantLine {
    pub slope: f64,
    pub intercept: f64,
    pub label: LineLabel,
}

impl InvariantLine {
    /// Signed residual of a point against the line equation.
    pub fn residual(&self, p: PlanarState) -> f64 {
        p.y - (self.slope * p.x + self.intercept)
    }
}

impl Subsystem {
    pub fn new(gamma: f64, alpha: f64, b: f64, side: Side) -> Result<Self> {
        check_node(gamma)?;
        Ok(Self { gamma, alpha, b, side })
    }

    /// Vector field at a point.
    pub fn field(&self, p: PlanarState) -> (f64, f64) {
        (
            2.0 * self.gamma * p.x - p.y + self.b,
            (self.gamma * self.gamma - 1.0) * p.x - self.alpha,
        )
    }

    /// The unique equilibrium `(alpha/(gamma^2-1), 2*alpha*gamma/(gamma^2-1) + b)`.
    pub fn equilibrium(&self) -> PlanarState {
        let den = self.gamma * self.gamma - 1.0;
        PlanarState::new(self.alpha / den, 2.0 * self.alpha * self.gamma / den + self.b)
    }

    /// The two invariant straight lines, slopes `gamma - 1` and `gamma + 1`.
    pub fn invariant_lines(&self) -> (InvariantLine, InvariantLine) {
        let (minus, plus) = match self.side {
            Side::Left => (LineLabel::LeftMinus, LineLabel::LeftPlus),
            Side::Right => (LineLabel::RightMinus, LineLabel::RightPlus),
        };
        (
            InvariantLine {
                slope: self.gamma - 1.0,
                intercept: self.alpha / (self.gamma - 1.0) + self.b,
                label: minus,
            },
            InvariantLine {
                slope: self.gamma + 1.0,
                intercept: self.alpha / (self.gamma + 1.0) + self.b,
                label: plus,
            },
        )
    }

    /// Closed-form flow of the subsystem after time `t` (any sign).
    ///
    /// The linear part has eigenvalues `gamma - 1` and `gamma + 1` with
    /// eigenvectors `(1, gamma + 1)` and `(1, gamma - 1)`; the flow is the
    /// matrix exponential applied to the displacement from the equilibrium.
    pub fn flow(&self, x0: PlanarState, t: f64) -> PlanarState {
        debug_assert!(t.is_finite());
        let g = self.gamma;
        let eq = self.equilibrium();
        let dx = x0.x - eq.x;
        let dy = x0.y - eq.y;
        let e1 = ((g - 1.0) * t).exp();
        let e2 = ((g + 1.0) * t).exp();
        let x = 0.5 * (((g + 1.0) * e2 - (g - 1.0) * e1) * dx + (e1 - e2) * dy) + eq.x;
        let y = 0.5
            * ((g * g - 1.0) * (e2 - e1) * dx + ((g + 1.0) * e1 - (g - 1.0) * e2) * dy)
            + eq.y;
        PlanarState::new(x, y)
    }
}
