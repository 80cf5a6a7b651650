//! Independent verification path: event-located crossings of the
//! closed-form flow, the full return map, and forward-iteration stability.
//!
//! Nothing here touches the parametric half maps; crossings are located
//! directly on the matrix-exponential flow, so agreement between the two
//! routes is a genuine cross-check.

use crate::error::{Error, Result};
use crate::halfmaps;
use crate::model::{PlanarState, Side, Subsystem, SystemParams};
use serde::{Deserialize, Serialize};

/// Bisection tolerance on the crossing time.
const TIME_TOL: f64 = 1e-13;
/// Cap on the searched return time.
const TIME_CAP: f64 = 700.0;

/// A located return of an orbit to the switching line `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub state: PlanarState,
    pub side_entered: Side,
}

/// Scale-free evaluation of `x(tau) = c1 e^{a tau} + c2 e^{b tau} + k`:
/// the returned value is a positive multiple of `x(tau)`, safe from
/// overflow for any `tau`.
fn x_scaled(c1: f64, c2: f64, k: f64, a: f64, b: f64, tau: f64) -> f64 {
    let ea = a * tau;
    let eb = b * tau;
    let m = ea.max(eb).max(0.0);
    c1 * (ea - m).exp() + c2 * (eb - m).exp() + k * (-m).exp()
}

/// Smallest `tau > 0` with `x(tau) = 0` for the orbit of `sub` starting at
/// `(0, y_start)`.
///
/// The `x`-component along the flow is a two-exponential expression, so its
/// derivative vanishes at most once; the first return, when it exists, is
/// bracketed by that critical time and located by bisection.
pub fn cross_time(sub: &Subsystem, y_start: f64) -> Result<CrossingEvent> {
    let g = sub.gamma;
    let start = PlanarState::new(0.0, y_start);
    let (x_dot, _) = sub.field(start);
    let interior: f64 = match sub.side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    if x_dot * interior <= 0.0 {
        return Err(Error::DomainError(format!(
            "start point (0, {y_start}) does not enter the half plane (x'(0) = {x_dot})"
        )));
    }

    let eq = sub.equilibrium();
    let dx = -eq.x;
    let dy = y_start - eq.y;
    let a = g - 1.0;
    let b = g + 1.0;
    let c1 = 0.5 * (dy - a * dx);
    let c2 = 0.5 * (b * dx - dy);
    let k = eq.x;
    let xs = |tau: f64| x_scaled(c1, c2, k, a, b, tau);

    // unique critical time of x(tau), if any
    let ratio = -(c1 * a) / (c2 * b);
    let t_star = if c2 == 0.0 || c1 == 0.0 || ratio <= 0.0 { None } else { Some(0.5 * ratio.ln()) };
    let t_star = match t_star {
        Some(t) if t > 0.0 => t,
        // x is strictly monotone on (0, inf): it left zero and never returns
        _ => return Err(Error::NoReturn),
    };

    let x_at_star = xs(t_star);
    if x_at_star == 0.0 {
        // tangent return exactly at the extremum
        let state = sub.flow(start, t_star);
        return Ok(CrossingEvent { time: t_star, state, side_entered: sub.side });
    }
    // the orbit is monotone up to t_star, so it is still interior there;
    // the return crossing, if any, lies beyond the extremum
    debug_assert!(x_at_star * interior > 0.0);

    let mut lo = t_star;
    let mut hi = t_star;
    let mut step = t_star.max(1e-3);
    loop {
        hi += step;
        if hi > TIME_CAP {
            return Err(Error::NoReturn);
        }
        if xs(hi) * interior <= 0.0 {
            break;
        }
        lo = hi;
        step *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= TIME_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if xs(mid) * interior > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let time = 0.5 * (lo + hi);
    let mut state = sub.flow(start, time);
    debug_assert!(state.x.abs() <= 1e-9, "crossing residual {}", state.x);
    state.x = 0.0;
    Ok(CrossingEvent { time, state, side_entered: sub.side })
}

/// Full return map `P = P_R o P_L` through two event-located transits.
pub fn poincare_map(p: &SystemParams, y0: f64) -> Result<f64> {
    let left = cross_time(&p.left(), y0)?;
    let y1 = left.state.y;
    if y1 >= p.b {
        // the forward orbit lands in the sliding region and cannot cross
        return Err(Error::NoReturn);
    }
    let right = cross_time(&p.right(), y1)?;
    Ok(right.state.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVerdict {
    Attracting,
    Repelling,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideBehavior {
    Approaches,
    Escapes,
    Undecided,
}

/// Forward iteration of the return map from one offset start point.
pub fn iterate_from(p: &SystemParams, start: f64, y0_star: f64) -> SideBehavior {
    let delta0 = (start - y0_star).abs();
    if delta0 == 0.0 {
        return SideBehavior::Undecided;
    }
    let dom = halfmaps::domain(p);
    let mut y = start;
    let mut dist = delta0;
    for _ in 0..200 {
        y = match poincare_map(p, y) {
            Ok(v) => v,
            Err(_) => return SideBehavior::Escapes,
        };
        if y <= dom.y0_min || y >= dom.y0_max {
            return SideBehavior::Escapes;
        }
        dist = (y - y0_star).abs();
        if dist <= 1e-3 * delta0 {
            return SideBehavior::Approaches;
        }
        if dist >= 100.0 * delta0 {
            return SideBehavior::Escapes;
        }
    }
    let ratio = (dist / delta0).powf(1.0 / 200.0);
    if ratio < 0.99 {
        SideBehavior::Approaches
    } else if ratio > 1.01 {
        SideBehavior::Escapes
    } else {
        SideBehavior::Undecided
    }
}

/// Iterates the return map from `y0_star * (1 ± 1e-3)` and classifies the
/// cycle. Mixed behaviour (a semi-stable cycle) comes back `Inconclusive`.
pub fn iterate_stability(p: &SystemParams, y0_star: f64) -> StabilityVerdict {
    let inner = iterate_from(p, y0_star * (1.0 - 1e-3), y0_star);
    let outer = iterate_from(p, y0_star * (1.0 + 1e-3), y0_star);
    match (inner, outer) {
        (SideBehavior::Approaches, SideBehavior::Approaches) => StabilityVerdict::Attracting,
        (SideBehavior::Escapes, SideBehavior::Escapes) => StabilityVerdict::Repelling,
        _ => StabilityVerdict::Inconclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::successor;

    fn params(gl: f64, gr: f64, al: f64, ar: f64, b: f64) -> SystemParams {
        SystemParams::new(gl, gr, al, ar, b).unwrap()
    }

    #[test]
    fn left_transit_lands_below() {
        let p = params(2.0, -3.0, 3.0, -1.4, 0.0);
        let ev = cross_time(&p.left(), 0.5).unwrap();
        assert!(ev.time > 0.0);
        assert!(ev.state.y < 0.0);
        assert_eq!(ev.state.x, 0.0);
    }

    #[test]
    fn tangency_is_rejected() {
        let p = params(2.0, -3.0, 3.0, -1.4, 0.0);
        assert!(matches!(cross_time(&p.left(), 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn no_return_without_the_necessary_condition() {
        // alpha_L < 0: the left equilibrium is real and attracts the orbit
        let s = Subsystem::new(-2.0, -1.0, 0.0, Side::Left).unwrap();
        assert!(matches!(cross_time(&s, 1.0), Err(Error::NoReturn)));
    }

    #[test]
    fn crossing_matches_left_sample() {
        let p = params(2.0, -3.0, 3.0, -1.4, 0.0);
        let t = std::f64::consts::LN_2;
        let smp = halfmaps::left_sample(&p, t).unwrap();
        let ev = cross_time(&p.left(), smp.y0).unwrap();
        assert!((ev.time - t).abs() <= 1e-9 * t, "time {} vs {t}", ev.time);
        assert!((ev.state.y - smp.y1).abs() <= 1e-9 * smp.y1.abs());
    }

    #[test]
    fn return_map_fixed_point_at_cycle() {
        let p = params(2.0, -3.0, 1.0, -1.4, 0.005);
        let scan = successor::find_cycles(&p).unwrap();
        assert_eq!(scan.roots.len(), 2);
        for r in &scan.roots {
            let py = poincare_map(&p, r.y0_star).unwrap();
            assert!(
                (py - r.y0_star).abs() <= 1e-9 * r.y0_star.max(1.0),
                "P({}) = {py}",
                r.y0_star
            );
        }
    }

    #[test]
    fn center_return_map_is_identity() {
        let p = params(2.0, -2.0, 1.0, -1.0, 0.0);
        for k in 1..10 {
            let y = k as f64 * 0.03;
            let py = poincare_map(&p, y).unwrap();
            assert!((py - y).abs() <= 1e-10, "P({y}) = {py}");
        }
    }

    #[test]
    fn sign_equivalence_with_successor() {
        let p = params(2.0, -3.0, 1.0, -1.4, 0.02);
        for k in 1..40 {
            let y = 0.025 + k as f64 * 0.007;
            if y >= 1.0 / 3.0 {
                break;
            }
            let dv = successor::d(&p, y).unwrap();
            let pv = poincare_map(&p, y).unwrap() - y;
            if dv.abs() > 1e-12 && pv.abs() > 1e-12 {
                assert_eq!(dv.signum(), pv.signum(), "at y = {y}: d = {dv}, P - id = {pv}");
            }
        }
    }

    #[test]
    fn iteration_confirms_hyperbolic_stability() {
        // same-sign gammas with b*gamma_R < 0: stable for b > 0, unstable for b < 0
        let stable = params(-2.0, -3.0, 1.0, -1.0, 0.05);
        let scan = successor::find_cycles(&stable).unwrap();
        assert_eq!(scan.roots.len(), 1);
        assert_eq!(iterate_stability(&stable, scan.roots[0].y0_star), StabilityVerdict::Attracting);

        let unstable = params(2.0, 3.0, 1.0, -1.0, -0.05);
        let scan = successor::find_cycles(&unstable).unwrap();
        assert_eq!(scan.roots.len(), 1);
        assert_eq!(
            iterate_stability(&unstable, scan.roots[0].y0_star),
            StabilityVerdict::Repelling
        );
    }
}
