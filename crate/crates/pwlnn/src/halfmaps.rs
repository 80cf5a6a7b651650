//! Poincaré half maps in parametric form, their domains and inversion.
//!
//! A transit through one half plane is parametrized by its transition time
//! `tau` (`t > 0` through the left half plane, `s < 0` through the right).
//! With `e1 = exp((gamma-1)tau)`, `e2 = exp((gamma+1)tau)` the crossing
//! ordinates are
//!
//! ```text
//! y0 = alpha ((gamma+1) e1 - (gamma-1) e2 - 2)              / ((gamma^2-1)(e1 - e2))
//! y1 = alpha ((gamma-1) e1 - (gamma+1) e2 + 2 exp(2 gamma tau)) / ((gamma^2-1)(e1 - e2))
//! ```
//!
//! (plus the offset `b` on the right side). The left map `P_L` sends
//! `y0 > 0` to `y1 < 0`; the inverse right map sends `y0 > b` to `y1 < b`.
//! Both closed forms are `0/0` at `tau = 0`; a fourth-order series supplies
//! the removable limit, and factored forms keep large `|tau|` stable.

use crate::error::{Error, Result};
use crate::model::{Side, SystemParams};
use serde::{Deserialize, Serialize};

/// Switch to the endpoint series below this transition time.
const SERIES_TAU: f64 = 1e-6;
/// Switch to overflow-safe factored forms once `(|gamma|+1)|tau|` exceeds
/// this bound; all midrange exponents then stay well inside binary64 range.
const FACTORED_EXPONENT: f64 = 200.0;
/// Hard cap on bracket expansion; `exp` overflows binary64 shortly after.
const TAU_CAP: f64 = 700.0;
/// Open-endpoint cushion: queries this close to a domain endpoint are
/// rejected as out of domain.
const ENDPOINT_CUSHION: f64 = 1e-12;

/// A point `(tau, y0, y1)` on a half-map graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfMapSample {
    /// Transition time: `t > 0` for the left map, `s < 0` for the right.
    pub tau: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Which constraint supplies the upper endpoint of the successor domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpperBranch {
    /// `alpha_L / (gamma_L + 1)`, the left-map asymptote.
    LeftAsymptote,
    /// `alpha_R / (gamma_R - 1) + b`, the right-map endpoint.
    RightAsymptote,
    Infinite,
}

/// Interval of admissible upper crossing ordinates for the successor
/// function. Both endpoints are open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessorDomain {
    pub y0_min: f64,
    /// `f64::INFINITY` when the domain is unbounded above.
    pub y0_max: f64,
    pub active_upper_branch: UpperBranch,
}

impl SuccessorDomain {
    pub fn is_empty(&self) -> bool {
        !(self.y0_min < self.y0_max)
    }
}

/// First four one-sided derivatives of a half map at its fixed endpoint
/// (`y0 = 0` for `P_L`, `y0 = b` for the inverse right map).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginSeries {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

/// `expm1(x) - x`, free of cancellation for small `|x|`.
fn em2(x: f64) -> f64 {
    if x.abs() < 0.02 {
        let h = 0.5 * x * x;
        h * (1.0
            + x / 3.0
                * (1.0 + x / 4.0 * (1.0 + x / 5.0 * (1.0 + x / 6.0 * (1.0 + x / 7.0 * (1.0 + x / 8.0))))))
    } else {
        x.exp_m1() - x
    }
}

/// Evaluates `(y0, y1)` for one subsystem at transition time `tau`,
/// without the `b` offset. Stable for any `|tau| <= TAU_CAP`.
///
/// The raw numerators cancel to second order at `tau = 0`, so the midrange
/// form rewrites them through `expm1(x) - x`, where the order-two terms
/// cancel exactly in the coefficients.
fn sample_base(gamma: f64, alpha: f64, tau: f64) -> (f64, f64) {
    let g = gamma;
    if tau.abs() < SERIES_TAU {
        let c = 0.5 * alpha * tau;
        let q = (g * g - 1.0) * tau * tau / 12.0;
        let y0 = c * (1.0 - g * tau / 3.0 + q);
        let y1 = -c * (1.0 + g * tau / 3.0 + q);
        (y0, y1)
    } else if (g.abs() + 1.0) * tau.abs() <= 2.0 {
        // the raw numerators cancel to O(tau^2) here; the em2 split removes
        // the cancelling constant and linear parts exactly
        let a = (g - 1.0) * tau;
        let b = (g + 1.0) * tau;
        // D = (g^2-1)(e^a - e^b) = -(g^2-1) e^a expm1(2 tau)
        let den = -(g * g - 1.0) * a.exp() * (2.0 * tau).exp_m1();
        let n0 = (g + 1.0) * em2(a) - (g - 1.0) * em2(b);
        let n1 = (g - 1.0) * em2(a) - (g + 1.0) * em2(b) + 2.0 * em2(2.0 * g * tau);
        (alpha * n0 / den, alpha * n1 / den)
    } else if (g.abs() + 1.0) * tau.abs() <= FACTORED_EXPONENT {
        let e1 = ((g - 1.0) * tau).exp();
        let e2 = ((g + 1.0) * tau).exp();
        let den = (g * g - 1.0) * (e1 - e2);
        let y0 = alpha * ((g + 1.0) * e1 - (g - 1.0) * e2 - 2.0) / den;
        let y1 = alpha * ((g - 1.0) * e1 - (g + 1.0) * e2 + 2.0 * (2.0 * g * tau).exp()) / den;
        (y0, y1)
    } else if tau > 0.0 {
        // divide numerator and denominator by e2
        let w = (-2.0 * tau).exp();
        let den = (g * g - 1.0) * (w - 1.0);
        let y0 = alpha * ((g + 1.0) * w - (g - 1.0) - 2.0 * (-(g + 1.0) * tau).exp()) / den;
        let y1 = alpha * ((g - 1.0) * w - (g + 1.0) + 2.0 * ((g - 1.0) * tau).exp()) / den;
        (y0, y1)
    } else {
        // divide numerator and denominator by e1
        let w = (2.0 * tau).exp();
        let den = (g * g - 1.0) * (1.0 - w);
        let y0 = alpha * ((g + 1.0) - (g - 1.0) * w - 2.0 * (-(g - 1.0) * tau).exp()) / den;
        let y1 = alpha * ((g - 1.0) - (g + 1.0) * w + 2.0 * ((g + 1.0) * tau).exp()) / den;
        (y0, y1)
    }
}

/// `d y0 / d tau`, using `y0' = alpha - y0 * D'/D` with the exponential
/// ratio `D'/D` evaluated in overflow-safe form.
fn dy0_dtau(gamma: f64, alpha: f64, tau: f64, y0: f64) -> f64 {
    let g = gamma;
    let r = if tau.abs() < SERIES_TAU {
        // D'/D = 1/tau + gamma + tau/3 + O(tau^2); combine with the y0 series
        return 0.5 * alpha * (1.0 - 2.0 * g * tau / 3.0);
    } else if tau > 0.0 {
        let em = (-2.0 * tau).exp_m1();
        ((g - 1.0) * em - 2.0) / em
    } else {
        let em = (2.0 * tau).exp_m1();
        ((g + 1.0) * em + 2.0) / em
    };
    alpha - y0 * r
}

/// Left half-map graph point at transition time `t > 0`.
pub fn left_sample(p: &SystemParams, t: f64) -> Result<HalfMapSample> {
    if !(t > 0.0) {
        return Err(Error::DomainError(format!("left transition time must be positive, got {t}")));
    }
    if p.alpha_l <= 0.0 {
        return Err(Error::DomainError("left map requires alpha_L > 0".into()));
    }
    let (y0, y1) = sample_base(p.gamma_l, p.alpha_l, t);
    Ok(HalfMapSample { tau: t, y0, y1 })
}

/// Inverse right half-map graph point at transition time `s < 0`.
pub fn right_sample(p: &SystemParams, s: f64) -> Result<HalfMapSample> {
    if !(s < 0.0) {
        return Err(Error::DomainError(format!("right transition time must be negative, got {s}")));
    }
    if p.alpha_r >= 0.0 {
        return Err(Error::DomainError("right map requires alpha_R < 0".into()));
    }
    let (y0, y1) = sample_base(p.gamma_r, p.alpha_r, s);
    Ok(HalfMapSample { tau: s, y0: y0 + p.b, y1: y1 + p.b })
}

/// Open domain of `P_L`: `(0, alpha_L/(gamma_L+1))` for `gamma_L > 0`,
/// `(0, +inf)` for `gamma_L < 0`.
pub fn left_domain_upper(p: &SystemParams) -> f64 {
    if p.gamma_l > 0.0 {
        p.alpha_l / (p.gamma_l + 1.0)
    } else {
        f64::INFINITY
    }
}

/// Open domain of the inverse right map: `(b, +inf)` for `gamma_R > 0`,
/// `(b, alpha_R/(gamma_R-1) + b)` for `gamma_R < 0`.
pub fn right_domain_upper(p: &SystemParams) -> f64 {
    if p.gamma_r < 0.0 {
        p.alpha_r / (p.gamma_r - 1.0) + p.b
    } else {
        f64::INFINITY
    }
}

/// Monotone solve of `y0(tau) = target` in the transit duration `m = |tau|`.
/// `dir` is `+1.0` for the left map, `-1.0` for the right. `target` excludes
/// the `b` offset. Returns the signed `tau`.
fn solve_transit(gamma: f64, alpha: f64, dir: f64, target: f64, hint: Option<f64>) -> Result<f64> {
    let f = |m: f64| sample_base(gamma, alpha, dir * m).0 - target;

    // Bracket [lo, hi] with f(lo) < 0 <= f(hi). y0 -> 0 as m -> 0, so the
    // lower end always contracts successfully.
    let mut hi = hint
        .filter(|h| h.is_finite() && *h > 0.0)
        .unwrap_or_else(|| (2.0 * target / alpha).clamp(1e-6, 1.0));
    let mut lo;
    if f(hi) >= 0.0 {
        let mut shrink = hi;
        loop {
            shrink *= 0.5;
            if shrink < 1e-300 {
                lo = 0.0;
                break;
            }
            if f(shrink) < 0.0 {
                lo = shrink;
                break;
            }
            hi = shrink;
        }
    } else {
        loop {
            let next = hi * 2.0;
            if next > TAU_CAP {
                return Err(Error::ConvergenceFailure(format!(
                    "bracket expansion exceeded tau = {TAU_CAP} (asymptote proximity)"
                )));
            }
            if f(next) >= 0.0 {
                lo = hi;
                hi = next;
                break;
            }
            hi = next;
        }
    }

    // Safeguarded Newton inside the bracket.
    let mut m = 0.5 * (lo + hi);
    if let Some(h) = hint {
        if h > lo && h < hi {
            m = h;
        }
    }
    let tol = 1e-14 * target.abs().max(1.0);
    let mut fm = f(m);
    for _ in 0..120 {
        if fm < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        if fm.abs() <= tol || hi - lo <= f64::EPSILON * m.abs() {
            break;
        }
        let y0m = fm + target;
        let deriv = dir * dy0_dtau(gamma, alpha, dir * m, y0m);
        let mut next = if deriv > 0.0 { m - fm / deriv } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        m = next;
        fm = f(m);
    }
    let residual = f(m).abs();
    if residual > 1e-12 * target.abs().max(1.0) {
        return Err(Error::ConvergenceFailure(format!(
            "inversion residual {residual:e} at tau = {}",
            dir * m
        )));
    }
    Ok(dir * m)
}

pub(crate) fn invert_left(p: &SystemParams, y0: f64, hint: Option<f64>) -> Result<f64> {
    if y0 == 0.0 {
        return Ok(0.0);
    }
    let upper = left_domain_upper(p);
    if y0 < ENDPOINT_CUSHION || y0 > upper - ENDPOINT_CUSHION {
        return Err(Error::OutOfDomain(format!(
            "y0 = {y0} outside the left-map domain (0, {upper})"
        )));
    }
    solve_transit(p.gamma_l, p.alpha_l, 1.0, y0, hint.map(f64::abs))
}

pub(crate) fn invert_right(p: &SystemParams, y0: f64, hint: Option<f64>) -> Result<f64> {
    if y0 == p.b {
        return Ok(0.0);
    }
    let upper = right_domain_upper(p);
    if y0 < p.b + ENDPOINT_CUSHION || y0 > upper - ENDPOINT_CUSHION {
        return Err(Error::OutOfDomain(format!(
            "y0 = {y0} outside the inverse-right-map domain ({}, {upper})",
            p.b
        )));
    }
    solve_transit(p.gamma_r, p.alpha_r, -1.0, y0 - p.b, hint.map(f64::abs))
}

/// `P_L(y0)`: inverts the monotone parametrization and returns
/// `(y1, t)`. `y0 = 0` maps to `(0, 0)` by the continuous extension.
pub fn left_map(p: &SystemParams, y0: f64) -> Result<(f64, f64)> {
    if p.alpha_l <= 0.0 {
        return Err(Error::DomainError("left map requires alpha_L > 0".into()));
    }
    if y0 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let t = invert_left(p, y0, None)?;
    Ok((sample_base(p.gamma_l, p.alpha_l, t).1, t))
}

/// `P_R^{-1}(y0; b)`: returns `(y1, s)`. `y0 = b` maps to `(b, 0)` by the
/// continuous extension.
pub fn right_inverse_map(p: &SystemParams, y0: f64) -> Result<(f64, f64)> {
    if p.alpha_r >= 0.0 {
        return Err(Error::DomainError("right map requires alpha_R < 0".into()));
    }
    if y0 == p.b {
        return Ok((p.b, 0.0));
    }
    let s = invert_right(p, y0, None)?;
    Ok((sample_base(p.gamma_r, p.alpha_r, s).1 + p.b, s))
}

/// Domain `(y0_min, y0_max)` of the successor function. The lower endpoint
/// is `max(0, b)`; the upper endpoint depends on the signs of the gammas.
/// An empty interval is a value, not an error.
pub fn domain(p: &SystemParams) -> SuccessorDomain {
    let y0_min = p.b.max(0.0);
    let left_up = left_domain_upper(p);
    let right_up = right_domain_upper(p);
    let (y0_max, branch) = if left_up.is_finite() && right_up.is_finite() {
        if left_up <= right_up {
            (left_up, UpperBranch::LeftAsymptote)
        } else {
            (right_up, UpperBranch::RightAsymptote)
        }
    } else if left_up.is_finite() {
        (left_up, UpperBranch::LeftAsymptote)
    } else if right_up.is_finite() {
        (right_up, UpperBranch::RightAsymptote)
    } else {
        (f64::INFINITY, UpperBranch::Infinite)
    };
    SuccessorDomain { y0_min, y0_max, active_upper_branch: branch }
}

/// One-sided derivatives of the chosen half map at its fixed endpoint:
/// `(-1, -8g/(3a), -32g^2/(3a^2), -32g(79g^2+9)/(45a^3))`.
pub fn origin_series(p: &SystemParams, side: Side) -> OriginSeries {
    let (g, a) = match side {
        Side::Left => (p.gamma_l, p.alpha_l),
        Side::Right => (p.gamma_r, p.alpha_r),
    };
    OriginSeries {
        d1: -1.0,
        d2: -8.0 * g / (3.0 * a),
        d3: -32.0 * g * g / (3.0 * a * a),
        d4: -32.0 * g * (79.0 * g * g + 9.0) / (45.0 * a * a * a),
    }
}

/// Internal access to the raw parametric point, shared with the successor
/// module (the `b` offset is not applied).
pub(crate) fn raw_sample(gamma: f64, alpha: f64, tau: f64) -> (f64, f64) {
    sample_base(gamma, alpha, tau)
}
