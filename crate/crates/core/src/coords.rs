//! Action-angle coordinates for fast balls and the first-return map to the
//! strip just after the discontinuity.
//!
//! The angle is `ϑ(t) = 𝒥⁻¹∫₀ᵗ ℓ⁻²`. Two actions appear: the implicit one,
//! `I = 𝒥 [∫ₜ^{t'} ℓ⁻²]⁻¹`, and the explicit adiabatic invariant
//! `J = (𝒥/2)(vℓ + ℓℓ̇ + ℓ²ℓ̈/(3v))`. They agree to `O(v⁻²)`. Return
//! coordinates are `(τ, J)` with `τ = Jϑ`.

use serde::Serialize;

use crate::collision::{CollisionState, Dynamics, FlightSolver};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, gauss_legendre};
use crate::wall::{phase_of, WallProfile};

/// Uniform knots in the angle table (breaks of a spline are added on top).
pub const THETA_KNOTS: usize = 4096;

/// Longest sub-interval handed to one 8-point Gauss-Legendre rule.
const GL_PANEL: f64 = 0.01;

/// Slack allowed on `Jϑ < 1` when checking strip membership.
const STRIP_SLACK: f64 = 0.05;

#[inline]
fn inv_l2(profile: &WallProfile, ph: f64) -> f64 {
    let l = profile.derivs_at_phase(ph)[0];
    1.0 / (l * l)
}

/// `∫ₐᵇ ℓ⁻²` for phases `0 ≤ a ≤ b ≤ 1` lying in a single smooth piece.
fn piece_integral(profile: &WallProfile, a: f64, b: f64) -> f64 {
    let len = b - a;
    if len <= 0.0 {
        return 0.0;
    }
    let panels = (len / GL_PANEL).ceil().max(1.0) as usize;
    let h = len / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { lo + h };
        acc += gauss_legendre(|s| inv_l2(profile, s.min(1.0)), lo, hi);
    }
    acc
}

/// `∫ₚ^{p+len} ℓ⁻²` for a phase `p ∈ [0,1)` and `0 ≤ len ≤ 1 − p`,
/// split at the spline breaks.
fn phase_integral(profile: &WallProfile, p: f64, len: f64) -> f64 {
    let end = p + len;
    let mut lo = p;
    let mut acc = 0.0;
    for &b in profile.breaks() {
        if b > lo && b < end {
            acc += piece_integral(profile, lo, b);
            lo = b;
        }
    }
    acc + piece_integral(profile, lo, end)
}

/// `∫ₜ^{t+dt} ℓ⁻²(s) ds` for `dt ≥ 0`, split at integer times and spline
/// breaks so that every panel sees a smooth integrand.
pub fn phase_advance(profile: &WallProfile, t: f64, dt: f64) -> f64 {
    let mut p = phase_of(t);
    let mut rest = dt;
    let mut acc = 0.0;
    // whole periods contribute 𝒥 each
    if rest >= 1.0 {
        let whole = rest.floor();
        acc += whole * profile.j_int();
        rest -= whole;
    }
    while rest > 0.0 {
        let room = 1.0 - p;
        if rest <= room {
            acc += phase_integral(profile, p, rest);
            break;
        }
        acc += phase_integral(profile, p, room);
        rest -= room;
        p = 0.0;
    }
    acc
}

/// `ϑ(t) = 𝒥⁻¹∫₀ᵗ ℓ⁻²` by adaptive quadrature. Direct and slow; the table
/// is for bulk use.
pub fn theta_of(profile: &WallProfile, t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("theta_of needs t in [0,1), got {t}")));
    }
    let mut edges = vec![0.0];
    edges.extend(profile.breaks().iter().copied().filter(|&b| b < t));
    edges.push(t);
    let mut acc = 0.0;
    for w in edges.windows(2) {
        acc += adaptive_simpson(|s| inv_l2(profile, s), w[0], w[1], 1e-14)?;
    }
    Ok(acc / profile.j_int())
}

/// Precomputed angle `ϑ` on a fine grid. Between knots the integral is
/// finished by one Gauss-Legendre rule, so values are quadrature-exact.
#[derive(Debug, Clone)]
pub struct ThetaTable {
    profile: WallProfile,
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl ThetaTable {
    pub fn new(profile: &WallProfile) -> Self {
        let mut knots: Vec<f64> = (0..THETA_KNOTS).map(|i| i as f64 / THETA_KNOTS as f64).collect();
        knots.extend_from_slice(profile.breaks());
        knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        knots.dedup();
        let j = profile.j_int();
        let mut values = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        values.push(0.0);
        for w in knots.windows(2) {
            acc += gauss_legendre(|s| inv_l2(profile, s), w[0], w[1]);
            values.push(acc / j);
        }
        ThetaTable {
            profile: profile.clone(),
            knots,
            values,
        }
    }

    pub fn profile(&self) -> &WallProfile {
        &self.profile
    }

    /// `ϑ` at a phase in `[0, 1]`.
    pub fn theta(&self, t: f64) -> f64 {
        let i = match self.knots.binary_search_by(|k| k.partial_cmp(&t).expect("finite")) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let extra = gauss_legendre(|s| inv_l2(&self.profile, s), self.knots[i], t);
        self.values[i] + extra / self.profile.j_int()
    }

    /// The phase with `ϑ(t) = theta`, for `theta ∈ [0, 1)`.
    pub fn inverse(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        let i = match self.values.binary_search_by(|v| v.partial_cmp(&theta).expect("finite")) {
            Ok(i) => return self.knots[i],
            Err(i) => i - 1,
        };
        let mut lo = self.knots[i];
        let mut hi = self.knots.get(i + 1).copied().unwrap_or(1.0);
        let j = self.profile.j_int();
        let mut t = lo + (hi - lo) * (theta - self.values[i])
            / (self.values.get(i + 1).copied().unwrap_or(1.0) - self.values[i]);
        for _ in 0..60 {
            let g = self.theta(t) - theta;
            if g == 0.0 {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - g * j / inv_l2(&self.profile, t);
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - t).abs() <= 1e-17 + 2.0 * f64::EPSILON * t.abs() {
                t = next;
                break;
            }
            t = next;
        }
        t
    }
}

/// Explicit adiabatic invariant at a phase, using right limits at phase 0.
pub(crate) fn adiabatic_j_at(profile: &WallProfile, phase: f64, v: f64) -> f64 {
    let [l, dl, ddl, _] = profile.derivs_at_phase(phase);
    0.5 * profile.j_int() * (v * l + l * dl + l * l * ddl / (3.0 * v))
}

/// `J = (𝒥/2)(vℓ + ℓℓ̇ + ℓ²ℓ̈/(3v))`. Undefined on the jump itself.
pub fn adiabatic_j(profile: &WallProfile, state: &CollisionState) -> Result<f64> {
    if state.phase == 0.0 {
        return Err(Error::AtDiscontinuity);
    }
    if !(state.v > 0.0) {
        return Err(Error::InvalidArgument(format!("adiabatic J needs v > 0, got {}", state.v)));
    }
    Ok(adiabatic_j_at(profile, state.phase, state.v))
}

/// Implicit action `I = 𝒥 [∫ₜ^{t'} ℓ⁻²]⁻¹` over the next flight.
pub fn i_implicit(profile: &WallProfile, state: &CollisionState, tol: f64) -> Result<f64> {
    let flight = FlightSolver::with_tol(tol).solve(profile, state.phase, state.v)?;
    Ok(profile.j_int() / phase_advance(profile, state.phase, flight.dt))
}

/// A point of the integrable reference dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleAction {
    pub theta: f64,
    #[serde(rename = "J")]
    pub jadiab: f64,
}

/// `g: (ϑ, J) ↦ (ϑ + J⁻¹ mod 1, J)`.
pub fn reference_map(point: AngleAction) -> AngleAction {
    AngleAction {
        theta: phase_of(point.theta + 1.0 / point.jadiab),
        jadiab: point.jadiab,
    }
}

/// Coordinates `(τ, I)` on the return strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnPoint {
    pub tau: f64,
    #[serde(rename = "I")]
    pub action: f64,
    /// `⌊I⌋`, the integer part of the action lift.
    pub level: i64,
}

impl ReturnPoint {
    pub fn new(tau: f64, action: f64) -> Self {
        ReturnPoint {
            tau: phase_of(tau),
            action,
            level: action.floor() as i64,
        }
    }
}

/// First return of `g` to `{0 ≤ ϑ < J⁻¹}`, written in `(τ, J)` with
/// `τ = Jϑ`. Returns the image and the number of applications of `g` used.
pub fn reference_first_return(point: ReturnPoint) -> Result<(ReturnPoint, u64)> {
    let j = point.action;
    if !(j > 0.0) || !(0.0..1.0).contains(&point.tau) {
        return Err(Error::OutsideStrip(format!("(τ={}, J={j})", point.tau)));
    }
    if j < 1.0 {
        return Err(Error::InvalidArgument(format!("reference return needs J ≥ 1, got {j}")));
    }
    let k = j.floor();
    let frac = j - k;
    let (n, tau) = if point.tau >= frac {
        (k, point.tau - frac)
    } else {
        (k + 1.0, point.tau - frac + 1.0)
    };
    // τ − frac can only leave [0,1) by rounding
    let tau = if tau < 0.0 { tau + 1.0 } else { tau };
    Ok((ReturnPoint::new(tau, j), n as u64))
}

/// One completed return to the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return {
    pub state: CollisionState,
    pub point: ReturnPoint,
    pub steps: u64,
}

/// First-return machinery for one profile: dynamics plus the angle table.
#[derive(Debug, Clone)]
pub struct ReturnMap {
    dynamics: Dynamics,
    table: ThetaTable,
}

impl ReturnMap {
    pub fn new(profile: &WallProfile) -> Self {
        ReturnMap {
            dynamics: Dynamics::new(profile.clone()),
            table: ThetaTable::new(profile),
        }
    }

    pub fn profile(&self) -> &WallProfile {
        &self.dynamics.profile
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn table(&self) -> &ThetaTable {
        &self.table
    }

    /// `(τ, J)` of a collision in the strip.
    pub fn coords(&self, state: &CollisionState) -> Result<ReturnPoint> {
        let j = adiabatic_j_at(self.profile(), state.phase, state.v);
        let tau = j * self.table.theta(state.phase);
        if !(j > 0.0) || tau >= 1.0 + STRIP_SLACK {
            return Err(Error::OutsideStrip(format!(
                "phase {} v {} gives Jϑ = {tau}",
                state.phase, state.v
            )));
        }
        Ok(ReturnPoint::new(tau, j))
    }

    /// The collision state with return coordinates `(τ, J)`.
    pub fn state_at(&self, tau: f64, action: f64) -> Result<CollisionState> {
        if !(action > 0.0) || !(0.0..1.0).contains(&tau) {
            return Err(Error::OutsideStrip(format!("(τ={tau}, J={action})")));
        }
        // τ = Jϑ(t) and J(t, v) = J: bisect on t, with v from the quadratic
        // ℓv² + (ℓℓ̇ − 2J/𝒥)v + ℓ²ℓ̈/3 = 0 at each trial phase.
        let profile = self.profile().clone();
        let vel = |t: f64| -> f64 {
            let [l, dl, ddl, _] = profile.derivs_at_phase(t);
            let b = l * dl - 2.0 * action / profile.j_int();
            let c = l * l * ddl / 3.0;
            let disc = (b * b - 4.0 * l * c).max(0.0);
            (-b + disc.sqrt()) / (2.0 * l)
        };
        let target = |t: f64| action * self.table.theta(t) - tau;
        let mut lo = 0.0;
        let mut hi = self.table.inverse((tau / action).min(0.999_999)).max(1e-300);
        // J varies with t only through ℓ, so widen the bracket if needed
        while target(hi) < 0.0 && hi < 1.0 {
            hi = (2.0 * hi).min(1.0);
        }
        if tau == 0.0 {
            hi = 0.0;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-17 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if target(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = if tau == 0.0 { 0.0 } else { hi };
        let v = vel(t);
        let state = CollisionState { winding: 0, phase: t, v };
        if !(v > 0.0) || !state.is_admissible(self.profile()) {
            return Err(Error::Inadmissible { phase: t, v });
        }
        Ok(state)
    }

    /// Iterates the collision map until the next flight crossing an integer
    /// time. Budget defaults to `10·I + 10` collisions.
    pub fn first_return(&self, state: &CollisionState) -> Result<Return> {
        let j = adiabatic_j_at(self.profile(), state.phase, state.v).max(1.0);
        self.first_return_with_budget(state, (10.0 * j) as u64 + 10)
    }

    pub fn first_return_with_budget(&self, state: &CollisionState, budget: u64) -> Result<Return> {
        let mut s = *state;
        for n in 1..=budget {
            let step = self.dynamics.step(&s)?;
            s = step.state;
            if step.crossed > 0 {
                let point = self.coords(&s)?;
                return Ok(Return {
                    state: s,
                    point,
                    steps: n,
                });
            }
        }
        Err(Error::BudgetExhausted(budget))
    }
}

/// One-shot [`ReturnMap::first_return`]; builds the angle table each call.
pub fn first_return(profile: &WallProfile, state: &CollisionState) -> Result<(CollisionState, ReturnPoint)> {
    let r = ReturnMap::new(profile).first_return(state)?;
    Ok((r.state, r.point))
}

/// `r_ϑ = ϑ(t') − ϑ(t) − J⁻¹` and `r_J = J(t',v') − J(t,v)`, evaluated so
/// that neither suffers cancellation between O(1) quantities.
pub fn conjugacy_residuals(profile: &WallProfile, state: &CollisionState) -> Result<(f64, f64)> {
    let solver = FlightSolver::default();
    let t = state.phase;
    let v = state.v;
    if t == 0.0 {
        return Err(Error::AtDiscontinuity);
    }
    let flight = solver.solve(profile, t, v)?;
    let dt = flight.dt;
    if !flight.bounced || t + dt >= 1.0 {
        return Err(Error::OutsideStrip(format!("flight from phase {t} crosses the jump")));
    }
    let t1 = t + dt;
    let [l, dl, ddl, _] = profile.derivs_at_phase(t);
    let [l1, dl1, ddl1, _] = profile.derivs_at_phase(t1);
    let v1 = v - 2.0 * dl1;
    let next = solver.solve(profile, t1, v1)?;
    if t1 + next.dt >= 1.0 {
        return Err(Error::OutsideStrip(format!("flight from image phase {t1} crosses the jump")));
    }
    let jj = profile.j_int();
    let j0 = adiabatic_j_at(profile, t, v);
    let r_theta = phase_advance(profile, t, dt) / jj - 1.0 / j0;
    // v'ℓ' − vℓ = v(ℓ' − ℓ) − 2ℓ̇'ℓ'
    let dl_inc = profile.l_increment(t, dt);
    let bracket = v * dl_inc - 2.0 * dl1 * l1 + (l1 * dl1 - l * dl)
        + (l1 * l1 * ddl1 / v1 - l * l * ddl / v) / 3.0;
    Ok((r_theta, 0.5 * jj * bracket))
}

/// One row of a return-map scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnScanRow {
    pub tau: f64,
    #[serde(rename = "I")]
    pub action: f64,
    pub tau_next: f64,
    #[serde(rename = "I_next")]
    pub action_next: f64,
    pub steps: u64,
}

/// Applies the first-return map once to each start point `(τ, J)`.
pub fn return_scan(map: &ReturnMap, points: &[(f64, f64)]) -> Result<Vec<ReturnScanRow>> {
    points
        .iter()
        .map(|&(tau, action)| {
            let s = map.state_at(tau, action)?;
            let p = map.coords(&s)?;
            let r = map.first_return(&s)?;
            Ok(ReturnScanRow {
                tau: p.tau,
                action: p.action,
                tau_next: r.point.tau,
                action_next: r.point.action,
                steps: r.steps,
            })
        })
        .collect()
}

/// CSV with columns `tau,I,tau_next,I_next,steps`.
pub fn return_scan_csv(rows: &[ReturnScanRow]) -> String {
    use crate::io::fmt_f64;
    let mut out = String::from("tau,I,tau_next,I_next,steps\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.tau),
            fmt_f64(r.action),
            fmt_f64(r.tau_next),
            fmt_f64(r.action_next),
            r.steps
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wall::{make_constant, make_quadratic};

    #[test]
    fn theta_constant_wall() {
        let p = make_constant(1.0).unwrap();
        assert!((theta_of(&p, 0.37).unwrap() - 0.37).abs() < 1e-13);
        let tab = ThetaTable::new(&p);
        assert!((tab.theta(0.37) - 0.37).abs() < 1e-14);
        assert!((tab.inverse(0.37) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn theta_normalized_and_monotone() {
        let p = make_quadratic(-1.0, 1.0).unwrap();
        let tab = ThetaTable::new(&p);
        assert_eq!(tab.theta(0.0), 0.0);
        assert!((tab.theta(1.0) - 1.0).abs() < 1e-9);
        let mid = theta_of(&p, 0.5).unwrap();
        // symmetric profile: half the integral
        assert!((mid - 0.5).abs() < 1e-12);
        assert!((tab.theta(0.5) - mid).abs() < 1e-13);
        for t in [0.1, 0.3, 0.77] {
            let a = theta_of(&p, t).unwrap();
            assert!((tab.theta(t) - a).abs() < 1e-12);
            assert!(theta_of(&p, t - 1e-3).unwrap() < a && a < theta_of(&p, t + 1e-3).unwrap());
            assert!((tab.inverse(a) - t).abs() < 1e-13);
        }
    }

    #[test]
    fn adiabatic_examples() {
        let one = make_constant(1.0).unwrap();
        assert_eq!(adiabatic_j(&one, &CollisionState::new(0.4, 10.0)).unwrap(), 5.0);
        let two = make_constant(2.0).unwrap();
        assert!((adiabatic_j(&two, &CollisionState::new(0.4, 4.0)).unwrap() - 1.0).abs() < 1e-13);
        assert!(adiabatic_j(&one, &CollisionState::new(0.0, 10.0)).is_err());

        assert!((i_implicit(&one, &CollisionState::new(0.4, 10.0), 1e-15).unwrap() - 5.0).abs() < 1e-12);
        assert!((i_implicit(&two, &CollisionState::new(0.4, 4.0), 1e-15).unwrap() - 1.0).abs() < 1e-12);

        let q = make_quadratic(-1.0, 1.0).unwrap();
        let s = CollisionState::new(0.3, 100.0);
        let d = adiabatic_j(&q, &s).unwrap() - i_implicit(&q, &s, 1e-15).unwrap();
        assert!(d.abs() < 10.0 / 1e4, "{d}");
    }

    #[test]
    fn reference_maps() {
        let p = reference_map(AngleAction { theta: 0.0, jadiab: 4.0 });
        assert_eq!(p.theta, 0.25);
        let p = reference_map(AngleAction { theta: 0.9, jadiab: 2.0 });
        assert!((p.theta - 0.4).abs() < 1e-15);
        let mut p = AngleAction { theta: 0.0, jadiab: 10.0 };
        for _ in 0..10 {
            p = reference_map(p);
        }
        assert!(p.theta.min(1.0 - p.theta) < 1e-14);

        let (r, n) = reference_first_return(ReturnPoint::new(0.2, 3.0)).unwrap();
        assert_eq!((r.tau, n), (0.2, 3));
        let (r, n) = reference_first_return(ReturnPoint::new(0.5, 2.25)).unwrap();
        assert_eq!((r.tau, n), (0.25, 2));
        let (r, n) = reference_first_return(ReturnPoint::new(0.9, 2.25)).unwrap();
        assert!((r.tau - 0.65).abs() < 1e-15);
        assert_eq!(n, 2);
        let (r, n) = reference_first_return(ReturnPoint::new(0.1, 2.25)).unwrap();
        assert!((r.tau - 0.85).abs() < 1e-15);
        assert_eq!(n, 3);
    }

    #[test]
    fn first_return_constant_wall() {
        let p = make_constant(1.0).unwrap();
        let map = ReturnMap::new(&p);
        let r = map.first_return(&CollisionState::new(0.0, 10.0)).unwrap();
        assert_eq!(r.steps, 5);
        assert!((r.point.action - 5.0).abs() < 1e-12);
        assert!(r.point.tau.min(1.0 - r.point.tau) < 1e-9);

        let r = map.first_return(&CollisionState::new(0.0, 9.0)).unwrap();
        assert!((r.point.action - 4.5).abs() < 1e-12);
        assert!((r.point.tau - 0.5).abs() < 1e-9);
    }

    #[test]
    fn state_construction_round_trip() {
        let p = make_quadratic(-1.0, 1.0).unwrap();
        let map = ReturnMap::new(&p);
        for (tau, j) in [(0.3, 50.0), (0.9, 123.4), (0.01, 40.0)] {
            let s = map.state_at(tau, j).unwrap();
            let c = map.coords(&s).unwrap();
            assert!((c.tau - tau).abs() < 1e-9, "{c:?}");
            assert!((c.action - j).abs() < 1e-9 * j);
        }
    }

    #[test]
    fn conjugacy_exact_for_constant_wall() {
        let p = make_constant(1.0).unwrap();
        let (rt, rj) = conjugacy_residuals(&p, &CollisionState::new(0.3, 50.0)).unwrap();
        assert!(rt.abs() < 1e-16 && rj.abs() < 1e-13, "{rt} {rj}");
        let q = make_quadratic(-1.0, 1.0).unwrap();
        assert!(conjugacy_residuals(&q, &CollisionState::new(0.99, 50.0)).is_err());
    }
}
