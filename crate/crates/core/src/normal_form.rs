//! The piecewise-affine limit of the first-return map and its torus quotient.
//!
//! `F̂(τ, I) = (τ̄, I + Δ(τ̄ − ½))` with `τ̄ = τ − I mod 1`. Since `F̂`
//! commutes with integer shifts of the action it descends to the sawtooth
//! map on the torus; the shed integer is tracked as the `level` of a
//! [`TorusPoint`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::RunningStats;
use crate::wall::phase_of;

/// A point of the torus with the integer lift of its action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorusPoint {
    pub tau: f64,
    /// Action representative in `[0, 1)`.
    #[serde(rename = "I")]
    pub action: f64,
    pub level: i64,
}

impl TorusPoint {
    /// Canonical point from a phase and a lifted action.
    pub fn new(tau: f64, lifted: f64) -> Self {
        TorusPoint::with_level(tau, lifted, 0)
    }

    fn with_level(tau: f64, action: f64, level: i64) -> Self {
        let k = action.floor();
        let mut a = action - k;
        let mut level = level + k as i64;
        if a >= 1.0 {
            a = 0.0;
            level += 1;
        }
        TorusPoint {
            tau: phase_of(tau),
            action: a,
            level,
        }
    }

    /// `level + action`.
    pub fn lifted(&self) -> f64 {
        self.level as f64 + self.action
    }
}

/// The shear `G(τ, I) = (τ − I mod 1, I)`.
pub fn shear(p: TorusPoint) -> TorusPoint {
    TorusPoint {
        tau: phase_of(p.tau - p.action),
        ..p
    }
}

/// `T_Δ(τ, I) = (τ, I + Δ(τ − ½))`.
pub fn kick(p: TorusPoint, delta: f64) -> TorusPoint {
    TorusPoint::with_level(p.tau, p.action + delta * (p.tau - 0.5), p.level)
}

/// `τ̄ = τ − I mod 1`, `Ī = I + Δ(τ̄ − ½)`.
pub fn fhat(p: TorusPoint, delta: f64) -> TorusPoint {
    let tau = phase_of(p.tau - p.action);
    TorusPoint::with_level(tau, p.action + delta * (tau - 0.5), p.level)
}

/// `T_Δ ∘ G`; agrees with [`fhat`] pointwise.
pub fn sawtooth_factored(p: TorusPoint, delta: f64) -> TorusPoint {
    kick(shear(p), delta)
}

/// `F̂` followed by the correction `Δ₁((τ̄ − ½)² − 1/12)/I_abs`.
pub fn f_corrected(p: TorusPoint, delta: f64, delta1: f64, i_abs: f64) -> Result<TorusPoint> {
    if i_abs == 0.0 || !i_abs.is_finite() {
        return Err(Error::InvalidArgument(format!("correction needs I_abs ≠ 0, got {i_abs}")));
    }
    let q = fhat(p, delta);
    let x = q.tau - 0.5;
    Ok(TorusPoint::with_level(
        q.tau,
        q.action + delta1 * (x * x - 1.0 / 12.0) / i_abs,
        q.level,
    ))
}

/// Linear part `[[1, −1], [Δ, 1 − Δ]]` of every branch of `F̂`.
pub fn branch_matrix(delta: f64) -> [[f64; 2]; 2] {
    [[1.0, -1.0], [delta, 1.0 - delta]]
}

/// Roots of `h² − Δh + Δ = 0` as `(unstable, stable)`: the direction
/// `(1, h)` is stretched by `1 − h`.
pub fn invariant_slopes(delta: f64) -> Result<(f64, f64)> {
    let disc = delta * delta - 4.0 * delta;
    if !(disc > 0.0) {
        return Err(Error::Regime(format!("Δ = {delta} has no real invariant slopes")));
    }
    let sq = disc.sqrt();
    // avoid cancellation: one root from the formula, the other from Vieta
    let big = 0.5 * (delta + delta.signum() * sq);
    let small = delta / big;
    let (a, b) = if (1.0 - big).abs() > (1.0 - small).abs() {
        (big, small)
    } else {
        (small, big)
    };
    Ok((a, b))
}

/// Trace of `A^N` for the branch matrix.
pub fn trace_power(delta: f64, n: usize) -> f64 {
    let a = branch_matrix(delta);
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..n {
        m = [
            [m[0][0] * a[0][0] + m[0][1] * a[1][0], m[0][0] * a[0][1] + m[0][1] * a[1][1]],
            [m[1][0] * a[0][0] + m[1][1] * a[1][0], m[1][0] * a[0][1] + m[1][1] * a[1][1]],
        ];
    }
    m[0][0] + m[1][1]
}

/// Maximum torus discrepancy of `(T∘G)⁻¹ = (T∘J)⁻¹(T∘G)(T∘J)` with
/// `J(τ, I) = (1 − τ, I)`, over `samples` random points.
pub fn duality_check(delta: f64, samples: usize, seed: u64) -> f64 {
    let t = |(tau, i): (f64, f64)| (tau, i + delta * (tau - 0.5));
    let t_inv = |(tau, i): (f64, f64)| (tau, i - delta * (tau - 0.5));
    let g = |(tau, i): (f64, f64)| (phase_of(tau - i), i);
    let g_inv = |(tau, i): (f64, f64)| (phase_of(tau + i), i);
    let j = |(tau, i): (f64, f64)| (phase_of(1.0 - tau), i);
    let torus = |(tau, i): (f64, f64)| (phase_of(tau), phase_of(i));
    let dist = |a: (f64, f64), b: (f64, f64)| {
        let d = |x: f64, y: f64| {
            let r = phase_of(x - y);
            r.min(1.0 - r)
        };
        d(a.0, b.0).max(d(a.1, b.1))
    };
    let mut r = rng::stream(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = (r.gen::<f64>(), r.gen::<f64>());
        let lhs = torus(g_inv(t_inv(x)));
        // (T∘J)⁻¹ = J ∘ T⁻¹
        let tj = t(j(x));
        let rhs = torus(j(t_inv(t(g(tj)))));
        worst = worst.max(dist(lhs, rhs));
    }
    worst
}

/// Field operations needed by the orbit enumeration, so that it can run in
/// exact rational arithmetic or in floating point.
pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(n: i64) -> Self;
    fn floor_int(&self) -> i64;
    fn to_f64(&self) -> f64;
    /// Tolerance on constraint boundaries (zero when exact).
    fn slack() -> Self;
    /// Pieces with smaller area are dropped.
    fn min_area() -> Self;
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn floor_int(&self) -> i64 {
        self.floor() as i64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn slack() -> Self {
        1e-9
    }
    fn min_area() -> Self {
        1e-14
    }
}

impl Scalar for BigRational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn floor_int(&self) -> i64 {
        self.floor().to_integer().to_i64().expect("small integer part")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn slack() -> Self {
        BigRational::zero()
    }
    fn min_area() -> Self {
        BigRational::zero()
    }
}

/// Affine form `a·τ₀ + b·I₀ + c` in the coordinates of the starting point.
#[derive(Debug, Clone)]
struct Lin<S> {
    a: S,
    b: S,
    c: S,
}

impl<S: Scalar> Lin<S> {
    fn eval(&self, p: &[S; 2]) -> S {
        self.a.clone() * p[0].clone() + self.b.clone() * p[1].clone() + self.c.clone()
    }
    fn sub(&self, o: &Lin<S>) -> Lin<S> {
        Lin {
            a: self.a.clone() - o.a.clone(),
            b: self.b.clone() - o.b.clone(),
            c: self.c.clone() - o.c.clone(),
        }
    }
    fn add(&self, o: &Lin<S>) -> Lin<S> {
        Lin {
            a: self.a.clone() + o.a.clone(),
            b: self.b.clone() + o.b.clone(),
            c: self.c.clone() + o.c.clone(),
        }
    }
    fn scale(&self, s: &S) -> Lin<S> {
        Lin {
            a: self.a.clone() * s.clone(),
            b: self.b.clone() * s.clone(),
            c: self.c.clone() * s.clone(),
        }
    }
    fn shift(&self, s: S) -> Lin<S> {
        Lin {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone() + s,
        }
    }
}

/// Clips a convex polygon to `{f ≥ 0}`.
fn clip<S: Scalar>(poly: &[[S; 2]], f: &Lin<S>) -> Vec<[S; 2]> {
    let zero = S::from_int(0);
    let n = poly.len();
    let vals: Vec<S> = poly.iter().map(|p| f.eval(p)).collect();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (p, q) = (&poly[i], &poly[j]);
        let (fp, fq) = (&vals[i], &vals[j]);
        let p_in = *fp >= zero;
        let q_in = *fq >= zero;
        if p_in {
            out.push(p.clone());
        }
        if p_in != q_in {
            let t = fp.clone() / (fp.clone() - fq.clone());
            out.push([
                p[0].clone() + t.clone() * (q[0].clone() - p[0].clone()),
                p[1].clone() + t * (q[1].clone() - p[1].clone()),
            ]);
        }
    }
    out
}

fn area2<S: Scalar>(poly: &[[S; 2]]) -> S {
    let n = poly.len();
    let mut acc = S::from_int(0);
    for i in 0..n {
        let j = (i + 1) % n;
        acc = acc + poly[i][0].clone() * poly[j][1].clone() - poly[j][0].clone() * poly[i][1].clone();
    }
    if acc < S::from_int(0) {
        -acc
    } else {
        acc
    }
}

fn non_degenerate<S: Scalar>(poly: &[[S; 2]]) -> bool {
    poly.len() >= 3 && area2(poly) > S::min_area()
}

/// Branch choice of one step: `m = ⌊τ − I⌋ ∈ {−1, 0}` and the integer `k`
/// shed from the action.
type Branch = (i64, i64);

/// A torus-periodic orbit in exact or floating coordinates.
#[derive(Debug, Clone)]
pub struct Orbit<S> {
    pub period: usize,
    pub winding: i64,
    pub points: Vec<[S; 2]>,
    pub itinerary: Vec<Branch>,
}

struct Search<'a, S> {
    delta: &'a S,
    period: usize,
    budget: usize,
    nodes: usize,
    found: Vec<Orbit<S>>,
}

impl<'a, S: Scalar> Search<'a, S> {
    fn step_forms(&self, tau: &Lin<S>, act: &Lin<S>, m: i64) -> (Lin<S>, Lin<S>) {
        let u = tau.sub(act).shift(S::from_int(-m));
        let half = S::from_int(1) / S::from_int(2);
        let w = act.add(&u.scale(self.delta)).shift(-(self.delta.clone() * half));
        (u, w)
    }

    fn descend(&mut self, poly: Vec<[S; 2]>, tau: Lin<S>, act: Lin<S>, itin: &mut Vec<Branch>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::ItineraryExplosion(self.budget));
        }
        if itin.len() == self.period {
            self.close(&tau, &act, itin);
            return Ok(());
        }
        let one = S::from_int(1);
        for m in [-1i64, 0] {
            let (u, w) = self.step_forms(&tau, &act, m);
            let p1 = clip(&poly, &u);
            if !non_degenerate(&p1) {
                continue;
            }
            let p1 = clip(&p1, &u.scale(&-one.clone()).shift(one.clone()));
            if !non_degenerate(&p1) {
                continue;
            }
            let ws: Vec<S> = p1.iter().map(|p| w.eval(p)).collect();
            let mut lo = ws[0].clone();
            let mut hi = ws[0].clone();
            for x in &ws[1..] {
                if *x < lo {
                    lo = x.clone();
                }
                if *x > hi {
                    hi = x.clone();
                }
            }
            for k in lo.floor_int()..=hi.floor_int() {
                let wk = w.shift(S::from_int(-k));
                let p2 = clip(&p1, &wk);
                if !non_degenerate(&p2) {
                    continue;
                }
                let p2 = clip(&p2, &wk.scale(&-one.clone()).shift(one.clone()));
                if !non_degenerate(&p2) {
                    continue;
                }
                itin.push((m, k));
                self.descend(p2, u.clone(), wk, itin)?;
                itin.pop();
            }
        }
        Ok(())
    }

    /// Solves `x = Mx + c` for the itinerary and keeps it if it is realized.
    fn close(&mut self, tau: &Lin<S>, act: &Lin<S>, itin: &[Branch]) {
        let one = S::from_int(1);
        let zero = S::from_int(0);
        let (a11, a12, c1) = (one.clone() - tau.a.clone(), -tau.b.clone(), tau.c.clone());
        let (a21, a22, c2) = (-act.a.clone(), one.clone() - act.b.clone(), act.c.clone());
        let det = a11.clone() * a22.clone() - a12.clone() * a21.clone();
        let tiny = S::slack() * S::slack();
        if det == zero || (det < tiny && -det.clone() < tiny) {
            return;
        }
        let x = [
            (c1.clone() * a22.clone() - a12.clone() * c2.clone()) / det.clone(),
            (a11 * c2 - c1 * a21) / det,
        ];
        if let Some(orbit) = self.realize(&x, itin) {
            if !self.found.iter().any(|o| same_orbit(o, &orbit)) {
                self.found.push(orbit);
            }
        }
    }

    /// Iterates the branch maps from `x`, checking every constraint and
    /// minimality of the period.
    fn realize(&self, x: &[S; 2], itin: &[Branch]) -> Option<Orbit<S>> {
        let zero = S::from_int(0);
        let one = S::from_int(1);
        let half = one.clone() / S::from_int(2);
        let slack = S::slack();
        let inside = |v: &S| *v >= zero.clone() - slack.clone() && *v <= one.clone() + slack.clone();
        if !inside(&x[0]) || !inside(&x[1]) {
            return None;
        }
        let mut pts = vec![x.clone()];
        let mut cur = x.clone();
        for &(m, k) in itin {
            let u = cur[0].clone() - cur[1].clone() - S::from_int(m);
            // τ̄ = 1 is not the canonical representative of τ̄ = 0, and the
            // kick differs between the two
            let u_ok = u >= zero.clone() - slack.clone()
                && if slack == zero { u < one } else { u <= one.clone() - slack.clone() };
            if !u_ok {
                return None;
            }
            let w = cur[1].clone() + self.delta.clone() * (u.clone() - half.clone()) - S::from_int(k);
            if !inside(&w) {
                return None;
            }
            cur = [u, w];
            pts.push(cur.clone());
        }
        let close = |a: &[S; 2], b: &[S; 2]| torus_close(a, b);
        if !close(&pts[itin.len()], x) {
            return None;
        }
        pts.pop();
        for d in 1..itin.len() {
            if close(&pts[d], x) {
                return None;
            }
        }
        let pts: Vec<[S; 2]> = pts.into_iter().map(|p| canonical(&p)).collect();
        Some(Orbit {
            period: itin.len(),
            winding: itin.iter().map(|b| b.1).sum(),
            points: pts,
            itinerary: itin.to_vec(),
        })
    }
}

fn canonical<S: Scalar>(p: &[S; 2]) -> [S; 2] {
    let red = |v: &S| {
        let k = S::from_int(v.floor_int());
        let mut r = v.clone() - k;
        let one = S::from_int(1);
        if r > one.clone() - S::slack() {
            r = r - one;
        }
        if r < S::from_int(0) {
            r = S::from_int(0);
        }
        r
    };
    [red(&p[0]), red(&p[1])]
}

fn torus_close<S: Scalar>(a: &[S; 2], b: &[S; 2]) -> bool {
    let d = |x: &S, y: &S| {
        let r = phase_of((x.clone() - y.clone()).to_f64());
        r.min(1.0 - r)
    };
    if S::slack() == S::from_int(0) {
        let ca = canonical(a);
        let cb = canonical(b);
        ca[0] == cb[0] && ca[1] == cb[1]
    } else {
        d(&a[0], &b[0]) <= S::slack().to_f64() && d(&a[1], &b[1]) <= S::slack().to_f64()
    }
}

fn same_orbit<S: Scalar>(a: &Orbit<S>, b: &Orbit<S>) -> bool {
    a.period == b.period && a.winding == b.winding && a.points.iter().any(|p| torus_close(p, &b.points[0]))
}

/// Default cap on search-tree nodes per period.
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

/// All orbits of minimal period `n` of the sawtooth map, one per cycle.
pub fn orbits_of_period<S: Scalar>(delta: &S, n: usize, budget: usize) -> Result<Vec<Orbit<S>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    let zero = S::from_int(0);
    let one = S::from_int(1);
    let square = vec![
        [zero.clone(), zero.clone()],
        [one.clone(), zero.clone()],
        [one.clone(), one.clone()],
        [zero.clone(), one.clone()],
    ];
    let mut search = Search {
        delta,
        period: n,
        budget,
        nodes: 0,
        found: Vec::new(),
    };
    let tau = Lin {
        a: one.clone(),
        b: zero.clone(),
        c: zero.clone(),
    };
    let act = Lin {
        a: zero.clone(),
        b: one,
        c: zero,
    };
    search.descend(square, tau, act, &mut Vec::new())?;
    Ok(search.found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitClass {
    Periodic,
    Accelerating,
    Decelerating,
}

impl OrbitClass {
    pub fn of_winding(n: i64) -> Self {
        match n.signum() {
            1 => OrbitClass::Accelerating,
            -1 => OrbitClass::Decelerating,
            _ => OrbitClass::Periodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

/// One periodic orbit of the sawtooth map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitReport {
    #[serde(rename = "N")]
    pub period: usize,
    pub class: OrbitClass,
    pub winding: i64,
    pub trace: f64,
    pub stability: Stability,
    /// Lexicographically smallest point of the cycle.
    pub tau: f64,
    #[serde(rename = "I")]
    pub action: f64,
}

fn report<S: Scalar>(orbit: &Orbit<S>, trace: f64) -> OrbitReport {
    let mut best = [orbit.points[0][0].to_f64(), orbit.points[0][1].to_f64()];
    for p in &orbit.points[1..] {
        let q = [p[0].to_f64(), p[1].to_f64()];
        if q[0] < best[0] - 1e-12 || ((q[0] - best[0]).abs() <= 1e-12 && q[1] < best[1]) {
            best = q;
        }
    }
    let stability = if (trace.abs() - 2.0).abs() <= 1e-12 {
        Stability::Parabolic
    } else if trace.abs() < 2.0 {
        Stability::Elliptic
    } else {
        Stability::Hyperbolic
    };
    OrbitReport {
        period: orbit.period,
        class: OrbitClass::of_winding(orbit.winding),
        winding: orbit.winding,
        trace,
        stability,
        tau: best[0],
        action: best[1],
    }
}

fn sort_reports(reports: &mut [OrbitReport]) {
    reports.sort_by(|a, b| {
        a.period
            .cmp(&b.period)
            .then(a.winding.cmp(&b.winding))
            .then(a.tau.total_cmp(&b.tau))
            .then(a.action.total_cmp(&b.action))
    });
}

fn check_nmax(n_max: usize) -> Result<()> {
    if !(1..=12).contains(&n_max) {
        return Err(Error::InvalidArgument(format!("N_max must be in 1..=12, got {n_max}")));
    }
    Ok(())
}

/// Orbits of every minimal period `1..=n_max`, in floating point with
/// residual validation.
pub fn orbit_search(delta: f64, n_max: usize) -> Result<Vec<OrbitReport>> {
    check_nmax(n_max)?;
    let mut out = Vec::new();
    for n in 1..=n_max {
        let trace = trace_power(delta, n);
        for o in orbits_of_period(&delta, n, DEFAULT_NODE_BUDGET)? {
            out.push(report(&o, trace));
        }
    }
    sort_reports(&mut out);
    Ok(out)
}

/// Same as [`orbit_search`] with every step in exact rational arithmetic.
pub fn orbit_search_exact(delta: &BigRational, n_max: usize) -> Result<Vec<OrbitReport>> {
    check_nmax(n_max)?;
    let mut out = Vec::new();
    for n in 1..=n_max {
        let a = [
            [BigRational::one(), -BigRational::one()],
            [delta.clone(), BigRational::one() - delta.clone()],
        ];
        let mut m = [
            [BigRational::one(), BigRational::zero()],
            [BigRational::zero(), BigRational::one()],
        ];
        for _ in 0..n {
            let prod = |i: usize, j: usize| m[i][0].clone() * a[0][j].clone() + m[i][1].clone() * a[1][j].clone();
            m = [[prod(0, 0), prod(0, 1)], [prod(1, 0), prod(1, 1)]];
        }
        let trace = Scalar::to_f64(&(m[0][0].clone() + m[1][1].clone()));
        for o in orbits_of_period(delta, n, DEFAULT_NODE_BUDGET)? {
            out.push(report(&o, trace));
        }
    }
    sort_reports(&mut out);
    Ok(out)
}

/// Parses a decimal or `p/q` literal into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if s.contains(['e', 'E']) {
        return None;
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int}{frac}");
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(num, den);
    Some(if neg { -r } else { r })
}

/// Orbit search that runs exactly when `delta` has a short decimal form.
pub fn orbit_search_auto(delta: f64, n_max: usize) -> Result<(Vec<OrbitReport>, bool)> {
    let text = crate::io::fmt_f64(delta);
    match parse_rational(&text) {
        Some(r) if text.len() <= 12 => Ok((orbit_search_exact(&r, n_max)?, true)),
        _ => Ok((orbit_search(delta, n_max)?, false)),
    }
}

/// JSON lines `{N, class, winding, trace, stability, tau, I}`.
pub fn orbits_to_jsonl(reports: &[OrbitReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Periodic,
    Accelerating,
}

/// Maximal θ-interval (in radians) where orbits of a given kind exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    #[serde(rename = "N")]
    pub period: usize,
    pub kind: WindowKind,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

/// Runs shorter than this many grid points are isolated coincidences.
const MIN_RUN: usize = 2;

/// Sweeps `θ ∈ (0, π)` on a grid of the given step, with `Δ = 2 − 2cosθ`,
/// and returns maximal runs of grid points where period-`n` orbits of each
/// kind exist. Decelerating orbits are the duals of accelerating ones and
/// count towards the same window.
pub fn window_scan(n: usize, step: f64) -> Result<Vec<Window>> {
    use std::f64::consts::PI;
    if !(step > 0.0) || step > 1e-3 * PI * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("θ step must be in (0, 1e-3·π], got {step}")));
    }
    let count = (PI / step).round() as usize;
    let flags: Vec<(bool, bool)> = (1..count)
        .into_par_iter()
        .map(|i| {
            let theta = i as f64 * step;
            let delta = 2.0 - 2.0 * theta.cos();
            let orbits = orbits_of_period(&delta, n, DEFAULT_NODE_BUDGET)?;
            Ok((
                orbits.iter().any(|o| o.winding == 0),
                orbits.iter().any(|o| o.winding != 0),
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (kind, pick) in [
        (WindowKind::Periodic, 0usize),
        (WindowKind::Accelerating, 1usize),
    ] {
        let mut start: Option<usize> = None;
        for (j, f) in flags.iter().enumerate() {
            let on = if pick == 0 { f.0 } else { f.1 };
            match (on, start) {
                (true, None) => start = Some(j),
                (false, Some(s)) => {
                    if j - s >= MIN_RUN {
                        out.push(Window {
                            period: n,
                            kind,
                            theta_lo: (s + 1) as f64 * step,
                            theta_hi: j as f64 * step,
                        });
                    }
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            if flags.len() - s >= MIN_RUN {
                out.push(Window {
                    period: n,
                    kind,
                    theta_lo: (s + 1) as f64 * step,
                    theta_hi: flags.len() as f64 * step,
                });
            }
        }
    }
    Ok(out)
}

/// CSV with columns `N,kind,theta_lo,theta_hi` (θ in radians).
pub fn windows_to_csv(windows: &[Window]) -> String {
    use crate::io::fmt_f64;
    let mut out = String::from("N,kind,theta_lo,theta_hi\n");
    for w in windows {
        let kind = match w.kind {
            WindowKind::Periodic => "periodic",
            WindowKind::Accelerating => "accelerating",
        };
        out.push_str(&format!(
            "{},{kind},{},{}\n",
            w.period,
            fmt_f64(w.theta_lo),
            fmt_f64(w.theta_hi)
        ));
    }
    out
}

/// Multiplier angle, twist coefficient and resonance flags at the elliptic
/// fixed point of `F̂ + F₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwistReport {
    pub epsilon: f64,
    pub theta_hat: f64,
    /// From `cosθ̄ = cosθ̂ − ε²/(12Δ)`, which matches the trace of the
    /// linearization at the shifted fixed point.
    pub theta_bar: f64,
    /// From the alternative reading `cosθ̄ = cosθ̂ − ε²Δ/12`.
    pub theta_bar_alt: f64,
    /// Offset of the fixed point from `τ = ½`.
    pub center_shift: f64,
    pub upsilon_re: f64,
    pub upsilon_im: f64,
    pub upsilon_nonzero: bool,
    pub resonance: bool,
    pub resonance_alt: bool,
}

/// Tolerance on `cosθ̄` for the resonance flags.
pub const RESONANCE_TOL: f64 = 1e-6;

fn resonant(cos_bar: f64) -> bool {
    (cos_bar - 1.0).abs() <= RESONANCE_TOL
        || (cos_bar + 0.25).abs() <= RESONANCE_TOL
        || (cos_bar + 0.5).abs() <= RESONANCE_TOL
}

/// Birkhoff data for the fixed point near `τ = ½` of the corrected map at
/// action `I_abs`.
pub fn twist_diagnostic(delta: f64, delta1: f64, i_abs: f64) -> Result<TwistReport> {
    if !(delta > 0.0 && delta < 4.0) {
        return Err(Error::Regime(format!("twist diagnostic needs Δ ∈ (0,4), got {delta}")));
    }
    if !(i_abs > 0.0) {
        return Err(Error::InvalidArgument(format!("I_abs must be positive, got {i_abs}")));
    }
    let eps = delta1 / i_abs;
    if eps.abs() >= delta / 10.0 {
        return Err(Error::InvalidArgument(format!(
            "|ε| = {} is not small against Δ/10 = {}",
            eps.abs(),
            delta / 10.0
        )));
    }
    let cos_hat = 1.0 - 0.5 * delta;
    let cos_bar = cos_hat - eps * eps / (12.0 * delta);
    let cos_alt = cos_hat - eps * eps * delta / 12.0;
    let theta_bar = cos_bar.clamp(-1.0, 1.0).acos();
    let lam = Complex64::from_polar(1.0, theta_bar);
    let lam_c = lam.conj();
    let one = Complex64::new(1.0, 0.0);
    let denom = (lam - lam_c) * (lam - lam_c);
    let a3 = -(lam - one) / denom * eps;
    let a5 = (lam_c - one) / denom * eps;
    let l3 = lam * lam * lam;
    let ups = (lam + one) / (lam - one) * 3.0 * a3.norm_sqr() + (l3 + one) / (l3 - one) * a5.norm_sqr();
    let res = resonant(cos_bar);
    let center_shift = if eps == 0.0 {
        0.0
    } else {
        // root of εx² + Δx − ε/12 = 0 closest to zero
        let disc = (delta * delta + eps * eps / 3.0).sqrt();
        (eps / 6.0) / (delta + disc)
    };
    Ok(TwistReport {
        epsilon: eps,
        theta_hat: cos_hat.acos(),
        theta_bar,
        theta_bar_alt: cos_alt.clamp(-1.0, 1.0).acos(),
        center_shift,
        upsilon_re: ups.re,
        upsilon_im: ups.im,
        upsilon_nonzero: eps != 0.0 && !res && ups.norm() > 0.0,
        resonance: res,
        resonance_alt: resonant(cos_alt),
    })
}

/// `𝐅 = G ∘ T_Δ`, the order used in the correlation sums.
pub fn kicked_first(p: TorusPoint, delta: f64) -> TorusPoint {
    shear(kick(p, delta))
}

/// Green-Kubo estimate with its Monte Carlo uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenKubo {
    #[serde(rename = "D2")]
    pub d2: f64,
    pub stderr: f64,
    pub n_trunc: usize,
    pub samples: u64,
    /// Monte Carlo mean of `a·a∘𝐅^N` at the truncation lag.
    pub last_term: f64,
    pub last_term_stderr: f64,
    /// Always `"delta*(tau-1/2)"`: the per-step action increment.
    pub observable: &'static str,
}

const CHUNK: usize = 4096;

/// `D² = Σ_{|n|≤N} ∫ a·a∘𝐅ⁿ` with `a(τ, I) = Δ(τ − ½)`, by Monte Carlo
/// over uniform torus points. Each chunk of samples has its own stream, so
/// the result does not depend on the number of workers.
pub fn green_kubo_d2(delta: f64, n_trunc: usize, samples: usize, seed: u64) -> Result<GreenKubo> {
    if delta > 0.0 && delta < 4.0 {
        return Err(Error::Regime(format!("Green-Kubo needs hyperbolic Δ, got {delta}")));
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(RunningStats, RunningStats)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut total = RunningStats::default();
            let mut last = RunningStats::default();
            for _ in 0..count {
                let mut p = TorusPoint::new(r.gen::<f64>(), r.gen::<f64>());
                let a0 = delta * (p.tau - 0.5);
                let mut y = a0 * a0;
                let mut an = a0;
                for _ in 0..n_trunc {
                    p = kicked_first(p, delta);
                    an = delta * (p.tau - 0.5);
                    y += 2.0 * a0 * an;
                }
                total.push(y);
                last.push(a0 * an);
            }
            (total, last)
        })
        .collect();
    let mut total = RunningStats::default();
    let mut last = RunningStats::default();
    for (t, l) in &parts {
        total.merge(t);
        last.merge(l);
    }
    Ok(GreenKubo {
        d2: total.mean,
        stderr: total.stderr(),
        n_trunc,
        samples: total.n,
        last_term: last.mean,
        last_term_stderr: last.stderr(),
        observable: "delta*(tau-1/2)",
    })
}

/// Direct estimate `Var(I_n − I_0)/n` from independent lifted orbits of
/// `F̂` started uniformly on the torus.
pub fn direct_variance_slope(delta: f64, steps: usize, orbits: usize, seed: u64) -> RunningStats {
    let chunks = orbits.div_ceil(CHUNK);
    let parts: Vec<RunningStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let count = CHUNK.min(orbits - c * CHUNK);
            let mut s = RunningStats::default();
            for _ in 0..count {
                let start = TorusPoint::new(r.gen::<f64>(), r.gen::<f64>());
                let mut p = start;
                for _ in 0..steps {
                    p = fhat(p, delta);
                }
                s.push(p.lifted() - start.lifted());
            }
            s
        })
        .collect();
    let mut s = RunningStats::default();
    for p in &parts {
        s.merge(p);
    }
    s
}

/// Which map a portrait iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortraitMap {
    Sawtooth,
    Fhat,
    Corrected,
    Physical,
}

/// Torus orbit points `(seed index, iteration, τ, I)` of the sawtooth map,
/// or the lifted action for `Fhat` and `Corrected`.
pub fn portrait(
    map: PortraitMap,
    delta: f64,
    delta1: f64,
    i_abs: f64,
    seeds: &[(f64, f64)],
    iterations: usize,
) -> Result<Vec<(usize, usize, f64, f64)>> {
    let mut out = Vec::with_capacity(seeds.len() * (iterations + 1));
    for (s, &(tau, action)) in seeds.iter().enumerate() {
        let mut p = TorusPoint::new(tau, action);
        let show = |p: &TorusPoint| match map {
            PortraitMap::Sawtooth => p.action,
            _ => p.lifted(),
        };
        out.push((s, 0, p.tau, show(&p)));
        for it in 1..=iterations {
            p = match map {
                PortraitMap::Sawtooth | PortraitMap::Fhat => fhat(p, delta),
                PortraitMap::Corrected => f_corrected(p, delta, delta1, i_abs + p.lifted())?,
                PortraitMap::Physical => {
                    return Err(Error::InvalidArgument(
                        "the physical portrait is produced by the simulator".into(),
                    ))
                }
            };
            out.push((s, it, p.tau, show(&p)));
        }
    }
    Ok(out)
}
