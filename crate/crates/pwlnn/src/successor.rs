//! Successor function, its derivatives, cycle isolation and `b`-scans.
//!
//! The successor function is `d(y0; b) = P_R^{-1}(y0; b) - P_L(y0)` on the
//! open interval returned by [`halfmaps::domain`]. Its zeros are the
//! crossing limit cycles; the sign of `d'` at a simple zero gives the
//! stability, and at a double zero the sign of `d''` separates the
//! internally stable from the internally unstable semi-stable cycle.
//!
//! Derivatives are evaluated through the section coordinates
//! `v = exp(tau)`, `u = v^gamma` of the two transits:
//!
//! ```text
//! d'  = F(v_R, gamma_R) - F(v_L, gamma_L)
//! d'' = (G(v_R, gamma_R) - G(v_L, gamma_L)) / M      (at a zero of d)
//! ```
//!
//! with `F`, `G`, `M` the rational section functions defined below.

use crate::error::{Error, Result};
use crate::halfmaps::{self, SuccessorDomain};
use crate::model::{CycleFeasibility, SystemParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The three sign discriminants controlling cycle existence at `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discriminants {
    /// `gamma_L/alpha_L - gamma_R/alpha_R`
    pub delta1: f64,
    /// `alpha_R/(gamma_R-1) - alpha_L/(gamma_L+1)`
    pub delta2: f64,
    /// `alpha_R/(gamma_R+1) - alpha_L/(gamma_L-1)`
    pub delta3: f64,
}

pub fn discriminants(p: &SystemParams) -> Discriminants {
    Discriminants {
        delta1: p.gamma_l / p.alpha_l - p.gamma_r / p.alpha_r,
        delta2: p.alpha_r / (p.gamma_r - 1.0) - p.alpha_l / (p.gamma_l + 1.0),
        delta3: p.alpha_r / (p.gamma_r + 1.0) - p.alpha_l / (p.gamma_l - 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    /// Double root with `d'' > 0`: attracting from inside, repelling outside.
    SemiStableInnerStable,
    /// Double root with `d'' < 0`: repelling from inside, attracting outside.
    SemiStableInnerUnstable,
}

/// An isolated zero of the successor function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRoot {
    pub y0_star: f64,
    /// 1 for a hyperbolic cycle, 2 for a semi-stable one.
    pub multiplicity: u8,
    pub stability: Stability,
    /// `|d(y0_star)|` after refinement.
    pub d_residual: f64,
    pub dprime: f64,
}

/// Section coordinates of a cycle: `v = exp(tau)` and `u = v^gamma` for the
/// two transits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionCoords {
    pub v_l: f64,
    pub v_r: f64,
    pub u_l: f64,
    pub u_r: f64,
}

// ---------------------------------------------------------------------------
// section functions F, G, M and psi
// ---------------------------------------------------------------------------

/// `psi(v, gamma) = (gamma-1) v^{gamma+1} - (gamma+1) v^{gamma-1} + 2`;
/// positive on both sides of `v = 1` for `|gamma| > 1`.
pub fn psi(v: f64, gamma: f64) -> f64 {
    (gamma - 1.0) * v.powf(gamma + 1.0) - (gamma + 1.0) * v.powf(gamma - 1.0) + 2.0
}

/// Slope function: `dy1/dy0 - 1` of one transit, as a function of the
/// transition time. `F -> -2` as `tau -> 0`.
fn slope_f(tau: f64, g: f64) -> Result<f64> {
    if tau.abs() < 1e-4 {
        return Ok(-2.0
            - 4.0 * g / 3.0 * tau
            - 8.0 * g * g / 9.0 * tau * tau
            - g * (53.0 * g * g + 3.0) / 135.0 * tau * tau * tau);
    }
    let v = tau.exp();
    let u = (g * tau).exp();
    let num = (g - 1.0) * (u * u * v * v + 1.0) - g * (u * u + v * v) + 4.0 * u * v
        - u * u
        - v * v;
    let den = g * v * v - 2.0 * u * v + v * v - g + 1.0;
    let f = num / den;
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::ConvergenceFailure(format!(
            "transition time {tau} too large for slope evaluation"
        )))
    }
}

/// Curvature function of one transit; `G -> 0` as `tau -> 0`.
fn curvature_g(tau: f64, g: f64) -> Result<f64> {
    if tau.abs() < 1e-4 {
        return Ok(8.0 * g / 3.0 * tau
            + 16.0 * g * g / 3.0 * tau * tau
            + 2.0 * g * (123.0 * g * g + 13.0) / 45.0 * tau * tau * tau);
    }
    let v = tau.exp();
    let u = (g * tau).exp();
    let den = g * v * v - 2.0 * u * v + v * v - g + 1.0;
    let num = 2.0
        * u
        * (v * v - 1.0).powi(2)
        * (g * g - 1.0)
        * (g * u * v * v - u * u * v - g * u + v)
        * (u * v - 1.0)
        * (u - v);
    let val = num / (v * den.powi(3));
    if val.is_finite() {
        Ok(val)
    } else {
        Err(Error::ConvergenceFailure(format!(
            "transition time {tau} too large for curvature evaluation"
        )))
    }
}

/// `M = y1 - y0` of one transit: `2 alpha (uv-1)(u-v) / (u (gamma^2-1)(1-v^2))`.
fn chord_m(tau: f64, g: f64, alpha: f64) -> f64 {
    if tau.abs() < 1e-4 {
        return alpha * (-tau - (g * g - 1.0) / 12.0 * tau * tau * tau);
    }
    let v = tau.exp();
    let u = (g * tau).exp();
    2.0 * alpha * (u * v - 1.0) * (u - v) / (u * (g * g - 1.0) * (1.0 - v * v))
}

// ---------------------------------------------------------------------------
// d and its derivatives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
struct TimeHints {
    t: Option<f64>,
    s: Option<f64>,
}

/// `d(y0)` together with the two transition times.
fn d_with_times(p: &SystemParams, y0: f64, hints: TimeHints) -> Result<(f64, f64, f64)> {
    let t = if y0 == 0.0 { 0.0 } else { halfmaps::invert_left(p, y0, hints.t)? };
    let s = if y0 == p.b { 0.0 } else { halfmaps::invert_right(p, y0, hints.s)? };
    let y1_l = halfmaps::raw_sample(p.gamma_l, p.alpha_l, t).1;
    let y1_r = halfmaps::raw_sample(p.gamma_r, p.alpha_r, s).1 + p.b;
    Ok((y1_r - y1_l, t, s))
}

/// The successor function `d(y0; b) = P_R^{-1}(y0; b) - P_L(y0)`.
///
/// `y0` must lie strictly inside the successor domain, except that the lower
/// endpoint itself is admitted through the continuous extensions of the two
/// half maps.
pub fn d(p: &SystemParams, y0: f64) -> Result<f64> {
    check_successor_args(p, y0)?;
    d_with_times(p, y0, TimeHints::default()).map(|(v, _, _)| v)
}

/// First derivative of `d` with respect to `y0`.
pub fn d_prime(p: &SystemParams, y0: f64) -> Result<f64> {
    check_successor_args(p, y0)?;
    let (_, t, s) = d_with_times(p, y0, TimeHints::default())?;
    Ok(slope_f(s, p.gamma_r)? - slope_f(t, p.gamma_l)?)
}

fn d_prime_with_times(p: &SystemParams, y0: f64, hints: TimeHints) -> Result<(f64, f64, f64)> {
    let t = if y0 == 0.0 { 0.0 } else { halfmaps::invert_left(p, y0, hints.t)? };
    let s = if y0 == p.b { 0.0 } else { halfmaps::invert_right(p, y0, hints.s)? };
    Ok((slope_f(s, p.gamma_r)? - slope_f(t, p.gamma_l)?, t, s))
}

fn check_successor_args(p: &SystemParams, y0: f64) -> Result<()> {
    let dom = halfmaps::domain(p);
    if dom.is_empty() {
        return Err(Error::OutOfDomain("successor domain is empty".into()));
    }
    if y0 < dom.y0_min || y0 >= dom.y0_max {
        return Err(Error::OutOfDomain(format!(
            "y0 = {y0} outside the successor domain [{}, {})",
            dom.y0_min, dom.y0_max
        )));
    }
    Ok(())
}

/// Second derivative of `d` at a (candidate) double root, through the
/// curvature functions. Requires `|d| <= 1e-9` and `|d'| <= 1e-7` at the
/// root; the chord values of the two transits must agree there.
pub fn d_second_at_root(p: &SystemParams, root: &CycleRoot) -> Result<f64> {
    let y0 = root.y0_star;
    check_successor_args(p, y0)?;
    let (dval, t, s) = d_with_times(p, y0, TimeHints::default())?;
    if dval.abs() > 1e-9 {
        return Err(Error::NotADoubleRoot(format!("|d| = {:e} exceeds 1e-9", dval.abs())));
    }
    let dp = slope_f(s, p.gamma_r)? - slope_f(t, p.gamma_l)?;
    if dp.abs() > 1e-7 {
        return Err(Error::NotADoubleRoot(format!("|d'| = {:e} exceeds 1e-7", dp.abs())));
    }
    second_derivative_at(p, t, s)
}

fn second_derivative_at(p: &SystemParams, t: f64, s: f64) -> Result<f64> {
    let m_l = chord_m(t, p.gamma_l, p.alpha_l);
    let m_r = chord_m(s, p.gamma_r, p.alpha_r);
    let m = 0.5 * (m_l + m_r);
    if m == 0.0 {
        return Err(Error::NotADoubleRoot("degenerate chord at the endpoint".into()));
    }
    Ok((curvature_g(s, p.gamma_r)? - curvature_g(t, p.gamma_l)?) / m)
}

/// Leading Taylor coefficients `(c2, c3, c4)` of `d(y0; 0)` at `y0 = 0`.
/// Defined only for the refracting case.
pub fn taylor_d0(p: &SystemParams) -> Result<(f64, f64, f64)> {
    if p.b != 0.0 {
        return Err(Error::RequiresRefracting(p.b));
    }
    let (gl, gr, al, ar) = (p.gamma_l, p.gamma_r, p.alpha_l, p.alpha_r);
    let c2 = 4.0 / 3.0 * (gl / al - gr / ar);
    let c3 = 16.0 / 9.0 * (gl * gl / (al * al) - gr * gr / (ar * ar));
    let c4 = 4.0 / 135.0
        * (gl * (79.0 * gl * gl + 9.0) / (al * al * al)
            - gr * (79.0 * gr * gr + 9.0) / (ar * ar * ar));
    Ok((c2, c3, c4))
}

// ---------------------------------------------------------------------------
// cycle isolation
// ---------------------------------------------------------------------------

/// Result of a cycle scan. `roots` is ordered by position; per-point solver
/// failures are collected in `issues` and are not fatal.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CycleScan {
    pub roots: Vec<CycleRoot>,
    /// `d` vanished identically over the scan grid (center-like family).
    pub identically_zero: bool,
    pub issues: Vec<String>,
}

impl CycleScan {
    /// Root count with multiplicity.
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity as usize).sum()
    }
}

/// Cap on the scan window when the successor domain is unbounded above.
/// Beyond roughly `1e9` the granularity of binary64 in `y0` already maps to
/// a larger spread in `y1` than the residual variation of the successor, so
/// scanning further only produces noise.
fn unbounded_cap(p: &SystemParams) -> f64 {
    let scale = 1.0_f64.max(p.alpha_l.abs()).max(p.alpha_r.abs()).max(p.b.abs());
    halfmaps::raw_sample(p.gamma_l, p.alpha_l, 45.0).0.min(1e9 * scale)
}

/// Scan grid over the open domain, `n` points clustered toward both open
/// endpoints (the successor blows up at the upper one). The clustering
/// depth adapts so that the first point sits about `1e-9` above the lower
/// endpoint regardless of the span.
fn scan_grid(dom: &SuccessorDomain, cap: f64, n: usize) -> Vec<f64> {
    let lo = dom.y0_min;
    let hi = if dom.y0_max.is_finite() { dom.y0_max } else { cap };
    let span = hi - lo;
    let lowest = (span * 1e-9).min(1e-9 * (1.0 + lo.abs())).max(span * 1e-15);
    let decades = (span / lowest).log10();
    let half = n / 2;
    let mut pts = Vec::with_capacity(2 * half);
    for k in 0..half {
        let u = (k as f64 + 0.5) / half as f64;
        let frac = 0.5 * 10f64.powf(-decades * (1.0 - u));
        pts.push(lo + span * frac);
        pts.push(hi - span * frac);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

const SCAN_POINTS: usize = 2048;

/// Isolates the zeros of `d` on the open successor domain.
///
/// Sign changes over a 2048-point grid clustered at both endpoints are
/// refined by bisection; local dips of `|d|` without a sign change are
/// probed by Newton on `d'` for double roots (skipped when
/// `gamma_L + gamma_R = 0`, where only hyperbolic cycles exist). Reported
/// multiplicity is capped at 2.
pub fn find_cycles(p: &SystemParams) -> Result<CycleScan> {
    let mut scan = CycleScan::default();
    if p.cycle_feasibility() != CycleFeasibility::Ok {
        return Ok(scan);
    }
    let dom = halfmaps::domain(p);
    if dom.is_empty() {
        return Ok(scan);
    }
    let grid = scan_grid(&dom, unbounded_cap(p), SCAN_POINTS);

    // sequential sweep with warm-started inversions
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    let margin = 1e-4 * (hi - lo);
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    let mut flat_interior = true;
    let mut hints = TimeHints::default();
    for &y in &grid {
        match d_with_times(p, y, hints) {
            Ok((dv, t, s)) => {
                hints = TimeHints { t: Some(t), s: Some(s) };
                if dv.is_finite() {
                    if y - lo >= margin && hi - y >= margin {
                        let y1l = halfmaps::raw_sample(p.gamma_l, p.alpha_l, t).1;
                        if dv.abs() > 1e-9 * (1.0 + y1l.abs()) {
                            flat_interior = false;
                        }
                    }
                    samples.push((y, dv));
                }
            }
            Err(e) => scan.issues.push(format!("d({y}) failed: {e}")),
        }
    }
    if samples.len() < 4 {
        return Ok(scan);
    }

    if flat_interior {
        scan.identically_zero = true;
        return Ok(scan);
    }

    // sign changes -> simple roots
    let mut roots: Vec<CycleRoot> = Vec::new();
    for w in samples.windows(2) {
        let (ya, da) = w[0];
        let (yb, db) = w[1];
        if da == 0.0 || da.signum() == db.signum() {
            continue;
        }
        match refine_simple_root(p, ya, da, yb) {
            Ok(Some(r)) => roots.push(r),
            Ok(None) => {}
            Err(e) => scan.issues.push(format!("root in ({ya}, {yb}) lost: {e}")),
        }
    }

    // |d|-minimum probing for double roots / barely-resolved pairs
    if (p.gamma_l + p.gamma_r).abs() > 1e-12 {
        let mut dips: Vec<usize> = Vec::new();
        for i in 1..samples.len() - 1 {
            let (_, dm) = samples[i - 1];
            let (_, d0) = samples[i];
            let (_, dp) = samples[i + 1];
            if d0.abs() < dm.abs()
                && d0.abs() < dp.abs()
                && d0.signum() == dm.signum()
                && d0.signum() == dp.signum()
            {
                dips.push(i);
            }
        }
        dips.sort_by(|&a, &b| samples[a].1.abs().partial_cmp(&samples[b].1.abs()).unwrap());
        for &i in dips.iter().take(20) {
            match probe_dip(p, &samples, i) {
                Ok(mut found) => roots.append(&mut found),
                Err(e) => scan.issues.push(format!("dip probe near {} failed: {e}", samples[i].0)),
            }
        }
    }

    roots.sort_by(|a, b| a.y0_star.partial_cmp(&b.y0_star).unwrap());
    roots.dedup_by(|a, b| {
        (a.y0_star - b.y0_star).abs() <= 1e-9 * a.y0_star.abs().max(1.0)
    });
    scan.roots = roots;
    Ok(scan)
}

/// Bisects a sign change down to relative width `1e-12` and classifies the
/// root. Returns `None` when the residual is inconsistent with the local
/// slope: such "roots" are rounding noise (the successor near an endpoint
/// cannot be resolved to better than `slope * ulp(y0)`).
fn refine_simple_root(p: &SystemParams, mut a: f64, da: f64, mut b: f64) -> Result<Option<CycleRoot>> {
    let sign_a = da.signum();
    let mut hints = TimeHints::default();
    for _ in 0..90 {
        let mid = 0.5 * (a + b);
        if b - a <= 1e-12 * mid.abs().max(1.0) {
            break;
        }
        let (dv, t, s) = d_with_times(p, mid, hints)?;
        hints = TimeHints { t: Some(t), s: Some(s) };
        if dv.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    let y = 0.5 * (a + b);
    let (dv, t, s) = d_with_times(p, y, hints)?;
    let dp = slope_f(s, p.gamma_r)? - slope_f(t, p.gamma_l)?;
    if dv.abs() > 1e-6 * dp.abs() * y.abs().max(1e-3) + 1e-12 {
        return Ok(None);
    }
    let stability = if dp < 0.0 { Stability::Stable } else { Stability::Unstable };
    Ok(Some(CycleRoot {
        y0_star: y,
        multiplicity: 1,
        stability,
        d_residual: dv.abs(),
        dprime: dp,
    }))
}

/// Newton on `d'` from a dip of `|d|`. Depending on `d` at the critical
/// point this yields nothing (the dip misses zero), a genuine double root,
/// or a pair of simple roots too close for the grid.
fn probe_dip(p: &SystemParams, samples: &[(f64, f64)], i: usize) -> Result<Vec<CycleRoot>> {
    let (mut y, _) = samples[i];
    let (lo, _) = samples[i - 1];
    let (hi, _) = samples[i + 1];
    let flank_sign = samples[i].1.signum();
    let mut hints = TimeHints::default();
    let mut converged = false;
    for _ in 0..60 {
        let (dp, t, s) = d_prime_with_times(p, y, hints)?;
        hints = TimeHints { t: Some(t), s: Some(s) };
        let h = 1e-6 * y.abs().max(1e-3);
        let dpp = (d_prime_with_times(p, y + h, hints)?.0
            - d_prime_with_times(p, y - h, hints)?.0)
            / (2.0 * h);
        if dpp == 0.0 || !dpp.is_finite() {
            break;
        }
        let step = dp / dpp;
        let next = (y - step).clamp(lo, hi);
        let moved = (next - y).abs();
        y = next;
        if dp.abs() <= 1e-11 || moved <= 1e-15 * y.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(Vec::new());
    }
    let (dv, t, s) = d_with_times(p, y, hints)?;
    if dv.abs() <= 1e-9 {
        let d2 = second_derivative_at(p, t, s)?;
        let stability = if d2 > 0.0 {
            Stability::SemiStableInnerStable
        } else {
            Stability::SemiStableInnerUnstable
        };
        let dp = slope_f(s, p.gamma_r)? - slope_f(t, p.gamma_l)?;
        return Ok(vec![CycleRoot {
            y0_star: y,
            multiplicity: 2,
            stability,
            d_residual: dv.abs(),
            dprime: dp,
        }]);
    }
    if dv.signum() != flank_sign {
        // the dip crosses zero twice between the flanking grid points
        let mut found = Vec::new();
        if let Some(r) = refine_simple_root(p, lo, flank_sign, y)? {
            found.push(r);
        }
        if let Some(r) = refine_simple_root(p, y, dv, hi)? {
            found.push(r);
        }
        return Ok(found);
    }
    Ok(Vec::new())
}

// ---------------------------------------------------------------------------
// regime classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimePrediction {
    /// The successor domain is empty; no periodic orbit.
    EmptyDomain,
    NoCycle,
    UniqueCycle { stable: bool },
    /// One-parameter family of closed orbits around the origin.
    Center,
    AtMostOne { stable_if_exists: bool },
    AtMostTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClassification {
    pub prediction: RegimePrediction,
    /// Which case of the classification fired.
    pub rule: String,
}

/// Exact cycle-count prediction where one of the closed-form cases applies
/// (`b = 0`; `gamma_L gamma_R > 0`; `gamma_L + gamma_R = 0`), otherwise the
/// general two-cycle bound.
pub fn classify_regime(p: &SystemParams) -> RegimeClassification {
    let mk = |prediction, rule: &str| RegimeClassification { prediction, rule: rule.into() };
    if p.cycle_feasibility() != CycleFeasibility::Ok {
        return mk(RegimePrediction::NoCycle, "necessary condition alpha_L > 0 > alpha_R fails");
    }
    if halfmaps::domain(p).is_empty() {
        return mk(RegimePrediction::EmptyDomain, "empty successor domain");
    }
    let ds = discriminants(p);
    if p.b == 0.0 {
        if p.gamma_l * p.gamma_r > 0.0 {
            return mk(RegimePrediction::NoCycle, "refracting, same-sign gammas");
        }
        let dsgn = if p.gamma_l > 0.0 { ds.delta2 } else { ds.delta3 };
        let which = if p.gamma_l > 0.0 { "Delta2" } else { "Delta3" };
        if ds.delta1 == 0.0 && dsgn == 0.0 {
            return mk(RegimePrediction::Center, "refracting, Delta1 = Delta2 = 0");
        }
        if ds.delta1 * dsgn < 0.0 {
            return mk(
                RegimePrediction::UniqueCycle { stable: dsgn < 0.0 },
                &format!("refracting, opposite gammas, Delta1*{which} < 0"),
            );
        }
        return mk(
            RegimePrediction::NoCycle,
            &format!("refracting, opposite gammas, Delta1*{which} >= 0"),
        );
    }
    if p.gamma_l * p.gamma_r > 0.0 {
        if p.b * p.gamma_r > 0.0 {
            return mk(RegimePrediction::NoCycle, "same-sign gammas, b*gamma_R > 0");
        }
        return mk(
            RegimePrediction::UniqueCycle { stable: p.b > 0.0 },
            "same-sign gammas, b*gamma_R < 0",
        );
    }
    if (p.gamma_l + p.gamma_r).abs() <= 1e-12 {
        return mk(
            RegimePrediction::AtMostOne { stable_if_exists: p.b > 0.0 },
            "zero trace sum: only hyperbolic cycles, at most one",
        );
    }
    mk(RegimePrediction::AtMostTwo, "general bound: at most two cycles with multiplicity")
}

/// Small-cycle amplitude born near the origin for `b * Delta1 < 0`;
/// asymptotically `b = -(2/3) Delta1 y0^2`.
pub fn pseudo_hopf_amplitude(p: &SystemParams) -> Result<f64> {
    if !(p.gamma_l > 0.0 && p.gamma_r < 0.0) {
        return Err(Error::DomainError("small-cycle bifurcation requires gamma_L > 0 > gamma_R".into()));
    }
    let d1 = discriminants(p).delta1;
    if p.b * d1 >= 0.0 {
        return Err(Error::NoSmallCycle);
    }
    let scan = find_cycles(p)?;
    scan.roots
        .first()
        .map(|r| r.y0_star)
        .ok_or_else(|| Error::ConvergenceFailure("no small cycle located by the scan".into()))
}

// ---------------------------------------------------------------------------
// scan over b
// ---------------------------------------------------------------------------

/// One grid row of a `b`-scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub b: f64,
    pub roots: Vec<CycleRoot>,
    pub identically_zero: bool,
    pub error: Option<String>,
}

/// A located simultaneous zero of `d` and `d'`: two cycles collide here.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Collision {
    pub b: f64,
    pub y0: f64,
    pub d_second: f64,
    pub residual_d: f64,
    pub residual_dprime: f64,
}

/// A maximal run of grid points with one cycle count and stability pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSegment {
    pub b_lo: f64,
    pub b_hi: f64,
    pub count: usize,
    pub signature: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationReport {
    /// Lower feasibility threshold `alpha_R / (1 - gamma_R)`.
    pub b_m: f64,
    /// Branch-switch value of the upper domain endpoint,
    /// `alpha_L/(gamma_L+1) - alpha_R/(gamma_R-1)`.
    pub b_bar: f64,
    /// Upper feasibility threshold `alpha_L / (gamma_L + 1)`.
    pub b_big_m: f64,
    /// Collision value where the two-cycle band closes, when observed.
    pub b_tilde: Option<f64>,
    /// Every collision the scan located (the two-node system admits one).
    pub collisions: Vec<Collision>,
    pub regimes: Vec<RegimeSegment>,
    pub rows: Vec<ScanRow>,
}

fn signature(roots: &[CycleRoot]) -> String {
    let mut parts: Vec<&str> = roots
        .iter()
        .map(|r| match r.stability {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::SemiStableInnerStable => "semi-stable(inner-stable)",
            Stability::SemiStableInnerUnstable => "semi-stable(inner-unstable)",
        })
        .collect();
    parts.sort_unstable();
    parts.join("+")
}

/// Runs [`find_cycles`] over an inclusive grid of `steps` values of `b` and
/// assembles the regime map. Where the count with multiplicity drops from
/// 2 to 0 between neighbours, the collision point is located by a damped
/// two-variable Newton iteration on `(d, d') = 0`.
pub fn scan_b(family: &SystemParams, b_from: f64, b_to: f64, steps: usize) -> Result<BifurcationReport> {
    if steps < 2 || !b_from.is_finite() || !b_to.is_finite() || b_from >= b_to {
        return Err(Error::DomainError(format!(
            "invalid scan range [{b_from}, {b_to}] with {steps} steps"
        )));
    }
    let bs: Vec<f64> = (0..steps)
        .map(|k| b_from + (b_to - b_from) * k as f64 / (steps - 1) as f64)
        .collect();
    let rows: Vec<ScanRow> = bs
        .par_iter()
        .map(|&b| {
            let mut q = *family;
            q.b = b;
            match find_cycles(&q) {
                Ok(scan) => ScanRow {
                    b,
                    roots: scan.roots,
                    identically_zero: scan.identically_zero,
                    error: None,
                },
                Err(e) => ScanRow {
                    b,
                    roots: Vec::new(),
                    identically_zero: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let ds = discriminants(family);
    let mut report = BifurcationReport {
        b_m: family.alpha_r / (1.0 - family.gamma_r),
        b_bar: -ds.delta2,
        b_big_m: family.alpha_l / (family.gamma_l + 1.0),
        b_tilde: None,
        collisions: Vec::new(),
        regimes: Vec::new(),
        rows,
    };

    // merge rows into regime segments
    for row in &report.rows {
        let count = row.roots.iter().map(|r| r.multiplicity as usize).sum();
        let sig = signature(&row.roots);
        match report.regimes.last_mut() {
            Some(seg) if seg.count == count && seg.signature == sig => seg.b_hi = row.b,
            _ => report.regimes.push(RegimeSegment { b_lo: row.b, b_hi: row.b, count, signature: sig }),
        }
    }

    // locate collisions at 2 -> 0 transitions
    let pairs: Vec<(usize, usize)> = report
        .rows
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let c0: usize = w[0].roots.iter().map(|r| r.multiplicity as usize).sum();
            let c1: usize = w[1].roots.iter().map(|r| r.multiplicity as usize).sum();
            if c0 >= 2 && c1 == 0 {
                Some((i, i + 1))
            } else {
                None
            }
        })
        .collect();
    for (i, j) in pairs {
        let row = &report.rows[i];
        if row.roots.len() < 2 {
            continue;
        }
        let y_init = 0.5 * (row.roots[0].y0_star + row.roots[row.roots.len() - 1].y0_star);
        let b_init = 0.5 * (row.b + report.rows[j].b);
        if let Ok(col) = locate_collision(family, y_init, b_init) {
            report.collisions.push(col);
        }
    }
    report.b_tilde = report.collisions.first().map(|c| c.b);
    Ok(report)
}

/// Damped Newton on `(d, d')(y0, b) = 0` with a finite-difference Jacobian.
pub fn locate_collision(family: &SystemParams, mut y: f64, mut b: f64) -> Result<Collision> {
    let mut q = *family;
    let eval = |q: &SystemParams, y: f64| -> Result<(f64, f64)> {
        let (dv, t, s) = d_with_times(q, y, TimeHints::default())?;
        let dp = slope_f(s, q.gamma_r)? - slope_f(t, q.gamma_l)?;
        Ok((dv, dp))
    };
    let mut converged = false;
    for _ in 0..80 {
        q.b = b;
        let (f1, f2) = eval(&q, y)?;
        let hy = 1e-7 * y.abs().max(1e-3);
        let hb = 1e-7 * b.abs().max(1e-3);
        let (f1y, f2y) = eval(&q, y + hy)?;
        q.b = b + hb;
        let (f1b, f2b) = eval(&q, y)?;
        let j11 = (f1y - f1) / hy;
        let j12 = (f1b - f1) / hb;
        let j21 = (f2y - f2) / hy;
        let j22 = (f2b - f2) / hb;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::ConvergenceFailure("singular Jacobian in collision solve".into()));
        }
        let mut dy = (f1 * j22 - f2 * j12) / det;
        let mut db = (j11 * f2 - j21 * f1) / det;
        let cap_y = 0.05 * y.abs().max(1e-2);
        let cap_b = 0.05 * b.abs().max(1e-2);
        let lambda = (cap_y / dy.abs()).min(cap_b / db.abs()).min(1.0);
        dy *= lambda;
        db *= lambda;
        y -= dy;
        b -= db;
        if dy.abs() <= 1e-13 * y.abs().max(1.0) && db.abs() <= 1e-11 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure("collision solve did not converge".into()));
    }
    q.b = b;
    let (dv, t, s) = d_with_times(&q, y, TimeHints::default())?;
    let dp = slope_f(s, q.gamma_r)? - slope_f(t, q.gamma_l)?;
    if dv.abs() > 1e-9 || dp.abs() > 1e-9 {
        return Err(Error::ConvergenceFailure(format!(
            "collision residuals too large: |d| = {:e}, |d'| = {:e}",
            dv.abs(),
            dp.abs()
        )));
    }
    Ok(Collision {
        b,
        y0: y,
        d_second: second_derivative_at(&q, t, s)?,
        residual_d: dv.abs(),
        residual_dprime: dp.abs(),
    })
}

// ---------------------------------------------------------------------------
// section coordinates
// ---------------------------------------------------------------------------

/// Section coordinates of a verified cycle, with the chord-agreement and
/// positivity checks.
pub fn section_coords(p: &SystemParams, root: &CycleRoot) -> Result<SectionCoords> {
    let y0 = root.y0_star;
    check_successor_args(p, y0)?;
    let t = halfmaps::invert_left(p, y0, None)?;
    let s = halfmaps::invert_right(p, y0, None)?;
    let m_l = chord_m(t, p.gamma_l, p.alpha_l);
    let m_r = chord_m(s, p.gamma_r, p.alpha_r);
    let gap = (m_l - m_r).abs();
    if gap > 1e-8 * m_l.abs().max(1.0) {
        return Err(Error::ResidualTooLarge(gap));
    }
    let coords = SectionCoords {
        v_l: t.exp(),
        v_r: s.exp(),
        u_l: (p.gamma_l * t).exp(),
        u_r: (p.gamma_r * s).exp(),
    };
    if !(psi(coords.v_l, p.gamma_l) > 0.0) || !(psi(coords.v_r, p.gamma_r) > 0.0) {
        return Err(Error::ResidualTooLarge(f64::NAN));
    }
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gl: f64, gr: f64, al: f64, ar: f64, b: f64) -> SystemParams {
        SystemParams::new(gl, gr, al, ar, b).unwrap()
    }

    fn family(b: f64) -> SystemParams {
        params(2.0, -3.0, 1.0, -1.4, b)
    }

    #[test]
    fn discriminant_values() {
        let ds = discriminants(&family(0.0));
        assert!((ds.delta1 - (-1.0 / 7.0)).abs() < 1e-15);
        assert!((ds.delta2 - 1.0 / 60.0).abs() < 1e-15);
        assert!((ds.delta3 - (-0.3)).abs() < 1e-15);

        let sym = discriminants(&params(2.0, -2.0, 1.0, -1.0, 0.0));
        assert_eq!(sym.delta1, 0.0);
        assert_eq!(sym.delta2, 0.0);
    }

    #[test]
    fn delta2_alternative_form_on_the_degenerate_manifold() {
        // on Delta1 = 0 (gamma_L/alpha_L = gamma_R/alpha_R) the second
        // discriminant collapses to (alpha_L + alpha_R)/((gamma_R-1)(gamma_L+1))
        for (gl, gr, al) in [(2.0, -3.0, 1.0), (4.5, -1.7, 0.3), (1.3, -6.0, 2.0)] {
            let ar = al * gr / gl;
            let p = params(gl, gr, al, ar, 0.0);
            let ds = discriminants(&p);
            assert!(ds.delta1.abs() <= 1e-13);
            let alt = (al + ar) / ((gr - 1.0) * (gl + 1.0));
            assert!((ds.delta2 - alt).abs() <= 1e-12 * alt.abs().max(1.0), "{} vs {alt}", ds.delta2);
        }
    }

    #[test]
    fn symmetric_center_is_flat() {
        let p = params(2.0, -2.0, 1.0, -1.0, 0.0);
        for k in 1..50 {
            let y = k as f64 / 50.0 * 0.3;
            assert!(d(&p, y).unwrap().abs() < 1e-12, "d({y}) not ~0");
        }
        let scan = find_cycles(&p).unwrap();
        assert!(scan.identically_zero);
        assert!(scan.roots.is_empty());
    }

    #[test]
    fn d_prime_matches_finite_differences() {
        let p = family(0.1);
        for y in [0.05, 0.2, 0.28, 0.32] {
            let h = 1e-6;
            let fd = (d(&p, y + h).unwrap() - d(&p, y - h).unwrap()) / (2.0 * h);
            let an = d_prime(&p, y).unwrap();
            assert!(
                (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                "y={y}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn d_prime_vanishes_at_origin_limit() {
        let p = family(0.0);
        let dp = d_prime(&p, 1e-8).unwrap();
        assert!(dp.abs() < 1e-6, "d'({:e}) = {dp}", 1e-8);
    }

    #[test]
    fn slope_function_symmetry() {
        // F(1/v, -gamma) = F(v, gamma): the zero-trace-sum reduction
        for (tau, g) in [(0.3, 2.0), (1.2, 1.5), (0.7, 3.0)] {
            let a = slope_f(tau, g).unwrap();
            let b = slope_f(-tau, -g).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "tau={tau} g={g}");
        }
    }

    #[test]
    fn taylor_coefficients() {
        let (c2, _c3, _c4) = taylor_d0(&family(0.0)).unwrap();
        assert!((c2 - (-4.0 / 21.0)).abs() < 1e-14);
        let sym = taylor_d0(&params(2.0, -2.0, 1.0, -1.0, 0.0)).unwrap();
        assert_eq!(sym, (0.0, 0.0, 0.0));
        assert!(matches!(taylor_d0(&family(0.1)), Err(Error::RequiresRefracting(_))));
    }

    #[test]
    fn two_cycles_in_the_band() {
        let scan = find_cycles(&family(0.005)).unwrap();
        assert_eq!(scan.roots.len(), 2, "roots: {:?}", scan.roots);
        let inner = &scan.roots[0];
        let outer = &scan.roots[1];
        assert!((inner.y0_star - 0.192800584330762).abs() < 1e-9);
        assert!((outer.y0_star - 0.31056717455683).abs() < 1e-9);
        assert_eq!(inner.stability, Stability::Stable);
        assert_eq!(outer.stability, Stability::Unstable);
    }

    #[test]
    fn no_cycles_when_b_kills_the_band() {
        // same-sign gammas with b*gamma_R > 0
        let scan = find_cycles(&params(2.0, 3.0, 1.0, -1.0, 0.05)).unwrap();
        assert!(scan.roots.is_empty(), "{:?}", scan.roots);
        // symmetric family perturbed in b has no periodic orbit
        let scan = find_cycles(&params(2.0, -2.0, 1.0, -1.0, 0.1)).unwrap();
        assert!(scan.roots.is_empty(), "{:?}", scan.roots);
    }

    #[test]
    fn unique_unstable_cycle_same_sign_gammas() {
        let p = params(2.0, 3.0, 1.0, -1.0, -0.05);
        let scan = find_cycles(&p).unwrap();
        assert_eq!(scan.roots.len(), 1);
        let r = &scan.roots[0];
        assert!((r.y0_star - 0.104838978337).abs() < 1e-9);
        assert_eq!(r.stability, Stability::Unstable);
        assert!(r.dprime > 0.0);
    }

    #[test]
    fn unbounded_domain_cycle() {
        // opposite orientation: domain (0, inf), unique stable cycle
        let p = params(-2.0, 3.0, 1.0, -1.4, 0.0);
        let scan = find_cycles(&p).unwrap();
        assert_eq!(scan.roots.len(), 1, "{:?}", scan.roots);
        let r = &scan.roots[0];
        assert!((r.y0_star - 4.32379000772).abs() < 1e-7 * 4.3);
        assert_eq!(r.stability, Stability::Stable);
    }

    #[test]
    fn classify_regime_cases() {
        use RegimePrediction::*;
        let c = classify_regime(&family(0.0));
        assert_eq!(c.prediction, UniqueCycle { stable: false }); // Delta2 > 0
        let c = classify_regime(&params(2.0, -2.0, 1.0, -1.0, 0.0));
        assert_eq!(c.prediction, Center);
        let c = classify_regime(&params(2.0, 3.0, 1.0, -1.0, 0.0));
        assert_eq!(c.prediction, NoCycle);
        let c = classify_regime(&params(2.0, 3.0, 1.0, -1.0, 0.05));
        assert_eq!(c.prediction, NoCycle);
        let c = classify_regime(&params(2.0, 3.0, 1.0, -1.0, -0.05));
        assert_eq!(c.prediction, UniqueCycle { stable: false });
        let c = classify_regime(&params(2.0, -2.0, 1.0, -1.4, 0.01));
        assert_eq!(c.prediction, AtMostOne { stable_if_exists: true });
        let c = classify_regime(&family(0.005));
        assert_eq!(c.prediction, AtMostTwo);
        let c = classify_regime(&family(-0.39));
        assert_eq!(c.prediction, EmptyDomain);
        // beq0lc (iii)(a): product >= 0, sum != 0
        let c = classify_regime(&params(2.0, -3.0, 1.0, -1.0, 0.0));
        assert_eq!(c.prediction, NoCycle);
    }

    #[test]
    fn small_cycle_amplitude() {
        let p = family(1e-5);
        let a = pseudo_hopf_amplitude(&p).unwrap();
        let predicted = (21.0 * 1e-5 / 2.0_f64).sqrt();
        assert!((a / predicted - 1.0).abs() < 0.1, "amplitude {a} vs {predicted}");
        assert!(matches!(pseudo_hopf_amplitude(&family(-1e-5)), Err(Error::NoSmallCycle)));
    }

    #[test]
    fn collision_location() {
        let col = locate_collision(&family(0.0), 0.25, 0.01).unwrap();
        assert!((col.b - 0.008161423323839).abs() < 1e-10, "b~ = {}", col.b);
        assert!((col.y0 - 0.2717602482216).abs() < 1e-8);
        assert!(col.d_second > 0.0); // gamma_L + gamma_R = -1 < 0
        assert!((col.d_second - 39.5041177568).abs() < 1e-4 * 39.5);
    }

    #[test]
    fn double_root_second_derivative_preconditions() {
        let fake = CycleRoot {
            y0_star: 0.2,
            multiplicity: 2,
            stability: Stability::SemiStableInnerStable,
            d_residual: 0.0,
            dprime: 0.0,
        };
        assert!(matches!(
            d_second_at_root(&family(0.005), &fake),
            Err(Error::NotADoubleRoot(_))
        ));
        let col = locate_collision(&family(0.0), 0.25, 0.01).unwrap();
        let root = CycleRoot {
            y0_star: col.y0,
            multiplicity: 2,
            stability: Stability::SemiStableInnerStable,
            d_residual: col.residual_d,
            dprime: col.residual_dprime,
        };
        let mut q = family(0.0);
        q.b = col.b;
        let d2 = d_second_at_root(&q, &root).unwrap();
        assert!((d2 - col.d_second).abs() < 1e-6 * col.d_second.abs());
    }

    #[test]
    fn section_coordinates_at_a_cycle() {
        let p = family(0.005);
        let scan = find_cycles(&p).unwrap();
        for r in &scan.roots {
            let c = section_coords(&p, r).unwrap();
            assert!(c.v_l > 1.0 && c.v_r > 0.0 && c.v_r < 1.0);
        }
    }

    #[test]
    fn psi_endpoint_identity() {
        for g in [2.0, -3.0, 1.4, -1.2, 7.0] {
            assert_eq!(psi(1.0, g), 0.0);
        }
    }

    #[test]
    fn zero_trace_sum_critical_point_has_reciprocal_sections() {
        // gamma_L = -gamma_R: d' = 0 exactly where v_L * v_R = 1
        let p = params(2.0, -2.0, 1.0, -1.4, -0.01);
        let dom = halfmaps::domain(&p);
        let mut lo = dom.y0_min + 1e-6;
        let mut hi = dom.y0_max * 0.999;
        let f = |y: f64| d_prime(&p, y).unwrap();
        assert!(f(lo) < 0.0 && f(hi) > 0.0, "{} {}", f(lo), f(hi));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y = 0.5 * (lo + hi);
        let t = halfmaps::invert_left(&p, y, None).unwrap();
        let s = halfmaps::invert_right(&p, y, None).unwrap();
        let prod = t.exp() * s.exp();
        assert!((prod - 1.0).abs() <= 1e-8, "v_L*v_R = {prod}");
    }

    #[test]
    fn scan_b_structure() {
        let report = scan_b(&family(0.0), -0.4, 0.4, 200).unwrap();
        assert!((report.b_m + 0.35).abs() < 1e-15);
        assert!((report.b_bar + 1.0 / 60.0).abs() < 1e-15);
        assert!((report.b_big_m - 1.0 / 3.0).abs() < 1e-15);
        let bt = report.b_tilde.expect("collision located");
        assert!((bt - 0.008161423323839).abs() < 1e-9);
        // regime counts: 0 (empty), 0, 1, 2, 0
        let counts: Vec<usize> = report.regimes.iter().map(|s| s.count).collect();
        assert!(counts.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(counts.iter().copied().max().unwrap(), 2);
    }
}
