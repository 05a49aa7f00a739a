//! Wall motions ℓ(t) and the normal-form constants built from them.
//!
//! A profile is the distance between the fixed and the moving wall as a
//! function of time. It is 1-periodic, strictly positive and Lipschitz, smooth
//! on the open period (0, 1) with its only derivative jump at t ≡ 0. The jump
//! data (one-sided first and second derivatives at 0) is stored analytically
//! per family, never estimated numerically.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, bisect};

/// Accuracy of the cached `∫₀¹ ℓ⁻²` stored with every profile.
const CACHED_J_TOL: f64 = 1e-13;

/// Closed-form catalog of admissible profiles, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `ℓ(t) = B + A((t mod 1) - 1/2)²`
    Quadratic {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B", default = "one")]
        b: f64,
    },
    /// `ℓ(t) = 1 - amplitude·sin(π (t mod 1))`
    Sine { amplitude: f64 },
    /// Cubic spline through `(t, ℓ)` knots on `[0, 1]` with prescribed
    /// one-sided second derivatives at `0⁺` and `1⁻`.
    Spline {
        knots: Vec<[f64; 2]>,
        #[serde(default)]
        ddl_plus: f64,
        #[serde(default)]
        ddl_minus: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn build(&self) -> Result<WallProfile> {
        match self {
            ProfileSpec::Quadratic { a, b } => make_quadratic(*a, *b),
            ProfileSpec::Sine { amplitude } => make_sine(*amplitude),
            ProfileSpec::Spline {
                knots,
                ddl_plus,
                ddl_minus,
            } => make_spline(knots, *ddl_plus, *ddl_minus),
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Quadratic { a: f64, b: f64 },
    Sine { amp: f64 },
    Spline(CubicSpline),
}

/// Periodic cubic pieces with polynomial coefficients in the local variable
/// `s = t - t_i`.
#[derive(Debug, Clone)]
struct CubicSpline {
    knots: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

impl CubicSpline {
    fn piece(&self, ph: f64) -> usize {
        let n = self.coeffs.len();
        let idx = self.knots.partition_point(|&k| k <= ph);
        idx.saturating_sub(1).min(n - 1)
    }

    fn eval(&self, ph: f64) -> [f64; 4] {
        let i = self.piece(ph);
        let s = ph - self.knots[i];
        let [c0, c1, c2, c3] = self.coeffs[i];
        [
            c0 + s * (c1 + s * (c2 + s * c3)),
            c1 + s * (2.0 * c2 + 3.0 * s * c3),
            2.0 * c2 + 6.0 * c3 * s,
            6.0 * c3,
        ]
    }

    /// `ℓ(b) - ℓ(a)` for `0 ≤ a ≤ b ≤ 1`, summed piece by piece in factored form.
    fn diff(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        let mut lo = a;
        let mut i = self.piece(a);
        loop {
            let end = if i + 1 < self.knots.len() { self.knots[i + 1] } else { 1.0 };
            let hi = b.min(end);
            let s1 = lo - self.knots[i];
            let s2 = hi - self.knots[i];
            let [_, c1, c2, c3] = self.coeffs[i];
            acc += (s2 - s1) * (c1 + c2 * (s1 + s2) + c3 * (s1 * s1 + s1 * s2 + s2 * s2));
            if hi >= b || i + 1 >= self.coeffs.len() {
                break;
            }
            lo = hi;
            i += 1;
        }
        acc
    }
}

/// An admissible wall motion. Immutable after construction.
#[derive(Debug, Clone)]
pub struct WallProfile {
    shape: Shape,
    spec: ProfileSpec,
    l0: f64,
    dl_plus: f64,
    dl_minus: f64,
    ddl_plus: f64,
    ddl_minus: f64,
    lip_bound: f64,
    breaks: Vec<f64>,
    j_int: f64,
}

/// Reduces a time to its phase in `[0, 1)`.
#[inline]
pub fn phase_of(t: f64) -> f64 {
    let p = t.rem_euclid(1.0);
    if p >= 1.0 {
        0.0
    } else {
        p
    }
}

impl WallProfile {
    fn finish(shape: Shape, spec: ProfileSpec) -> Result<Self> {
        let (l0, dl_plus, dl_minus, ddl_plus, ddl_minus, lip_bound, breaks) = match &shape {
            Shape::Quadratic { a, b } => (b + a / 4.0, -a, *a, 2.0 * a, 2.0 * a, a.abs(), vec![]),
            Shape::Sine { amp } => (1.0, -amp * PI, amp * PI, 0.0, 0.0, amp.abs() * PI, vec![]),
            Shape::Spline(sp) => {
                let first = sp.eval(0.0);
                let last_piece = sp.coeffs.len() - 1;
                let h = 1.0 - sp.knots[last_piece];
                let [c0, c1, c2, c3] = sp.coeffs[last_piece];
                let l_end = c0 + h * (c1 + h * (c2 + h * c3));
                let dl_end = c1 + h * (2.0 * c2 + 3.0 * h * c3);
                let ddl_end = 2.0 * c2 + 6.0 * c3 * h;
                if (l_end - first[0]).abs() > 1e-12 {
                    return Err(Error::InvalidProfile(format!(
                        "spline is discontinuous across the period: ℓ(0⁺)={} ℓ(1⁻)={l_end}",
                        first[0]
                    )));
                }
                let mut lip: f64 = 0.0;
                for (i, c) in sp.coeffs.iter().enumerate() {
                    let h = sp.knots.get(i + 1).copied().unwrap_or(1.0) - sp.knots[i];
                    let d = |s: f64| c[1] + s * (2.0 * c[2] + 3.0 * s * c[3]);
                    lip = lip.max(d(0.0).abs()).max(d(h).abs());
                    if c[3] != 0.0 {
                        let s = -c[2] / (3.0 * c[3]);
                        if s > 0.0 && s < h {
                            lip = lip.max(d(s).abs());
                        }
                    }
                }
                let breaks = sp.knots[1..].to_vec();
                (first[0], first[1], dl_end, first[2], ddl_end, lip, breaks)
            }
        };
        let mut profile = WallProfile {
            shape,
            spec,
            l0,
            dl_plus,
            dl_minus,
            ddl_plus,
            ddl_minus,
            lip_bound,
            breaks,
            j_int: f64::NAN,
        };
        profile.check_positive()?;
        profile.j_int = compute_j(&profile, CACHED_J_TOL)?;
        Ok(profile)
    }

    fn check_positive(&self) -> Result<()> {
        let min = match &self.shape {
            Shape::Quadratic { a, b } => {
                if *a >= 0.0 {
                    *b
                } else {
                    b + a / 4.0
                }
            }
            Shape::Sine { amp } => 1.0 - amp.abs(),
            Shape::Spline(sp) => {
                let mut m = f64::INFINITY;
                for (i, c) in sp.coeffs.iter().enumerate() {
                    let h = sp.knots.get(i + 1).copied().unwrap_or(1.0) - sp.knots[i];
                    let val = |s: f64| c[0] + s * (c[1] + s * (c[2] + s * c[3]));
                    m = m.min(val(0.0)).min(val(h));
                    // critical points of the cubic
                    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
                    let mut roots = Vec::new();
                    if qa.abs() < 1e-300 {
                        if qb != 0.0 {
                            roots.push(-qc / qb);
                        }
                    } else {
                        let disc = qb * qb - 4.0 * qa * qc;
                        if disc >= 0.0 {
                            let sq = disc.sqrt();
                            roots.push((-qb + sq) / (2.0 * qa));
                            roots.push((-qb - sq) / (2.0 * qa));
                        }
                    }
                    for s in roots {
                        if s > 0.0 && s < h {
                            m = m.min(val(s));
                        }
                    }
                }
                m
            }
        };
        if min > 0.0 && min.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidProfile(format!("ℓ is not strictly positive (min {min})")))
        }
    }

    /// The configuration block this profile was built from.
    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    /// `ℓ(t)` at any real time.
    #[inline]
    pub fn l(&self, t: f64) -> f64 {
        self.derivs_at_phase(phase_of(t))[0]
    }

    /// `ℓ̇(t)`; at an integer time this is the right limit `ℓ̇⁺`.
    #[inline]
    pub fn dl(&self, t: f64) -> f64 {
        self.derivs_at_phase(phase_of(t))[1]
    }

    #[inline]
    pub fn ddl(&self, t: f64) -> f64 {
        self.derivs_at_phase(phase_of(t))[2]
    }

    #[inline]
    pub fn dddl(&self, t: f64) -> f64 {
        self.derivs_at_phase(phase_of(t))[3]
    }

    /// `[ℓ, ℓ̇, ℓ̈, ℓ⃛]` at a phase in `[0, 1)`; phase 0 gives right limits.
    #[inline]
    pub fn derivs_at_phase(&self, ph: f64) -> [f64; 4] {
        match &self.shape {
            Shape::Quadratic { a, b } => {
                let u = ph - 0.5;
                [b + a * u * u, 2.0 * a * u, 2.0 * a, 0.0]
            }
            Shape::Sine { amp } => {
                let (s, c) = (PI * ph).sin_cos();
                [1.0 - amp * s, -amp * PI * c, amp * PI * PI * s, amp * PI * PI * PI * c]
            }
            Shape::Spline(sp) => sp.eval(ph),
        }
    }

    /// `(ℓ̇⁺, ℓ̈⁺)`, the limits as t → 0⁺.
    pub fn right_limits(&self) -> (f64, f64) {
        (self.dl_plus, self.ddl_plus)
    }

    /// `(ℓ̇⁻, ℓ̈⁻)`, the limits as t → 1⁻.
    pub fn left_limits(&self) -> (f64, f64) {
        (self.dl_minus, self.ddl_minus)
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    /// Interior phases in (0, 1) where a spline changes piece; empty for the
    /// analytic families.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// `∫₀¹ ℓ⁻²` computed once at construction to 1e-13.
    pub fn j_int(&self) -> f64 {
        self.j_int
    }

    /// `ℓ(b) - ℓ(a)` for phases `0 ≤ a ≤ b ≤ 1`, where `b = 1` means the left
    /// limit at the end of the period.
    fn phase_diff(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            Shape::Quadratic { a: aa, .. } => aa * (b - a) * (a + b - 1.0),
            Shape::Sine { amp } => {
                -2.0 * amp * (0.5 * PI * (a + b)).cos() * (0.5 * PI * (b - a)).sin()
            }
            Shape::Spline(sp) => sp.diff(a, b),
        }
    }

    /// `ℓ(t + dt) - ℓ(t)` for `dt ≥ 0`, evaluated without forming the
    /// difference of two O(1) numbers.
    pub fn l_increment(&self, t: f64, dt: f64) -> f64 {
        let p = phase_of(t);
        let hi = p + dt;
        if hi <= 1.0 {
            self.phase_diff(p, hi)
        } else {
            let r = hi - hi.floor();
            self.phase_diff(p, 1.0) + self.phase_diff(0.0, r)
        }
    }

    /// Checks the structural invariants on a sample grid: continuity across
    /// the period and the Lipschitz bound.
    pub fn validate(&self) -> Result<()> {
        let end = self.l0 + self.phase_diff(0.0, 1.0);
        if (end - self.l0).abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!(
                "ℓ(0⁺) = {} but ℓ(1⁻) = {end}",
                self.l0
            )));
        }
        let n = 512;
        for i in 0..n {
            let s = i as f64 / n as f64;
            for j in [1usize, 7, 61] {
                let t = ((i + j) % n) as f64 / n as f64;
                let d = (self.l(t) - self.l(s)).abs();
                let dist = {
                    let raw = (t - s).abs();
                    raw.min(1.0 - raw)
                };
                if d > self.lip_bound * dist * (1.0 + 1e-9) + 1e-14 {
                    return Err(Error::InvalidProfile(format!(
                        "Lipschitz bound {} violated between {s} and {t}",
                        self.lip_bound
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Quadratic family `ℓ(t) = B + A((t mod 1) − ½)²`.
pub fn make_quadratic(a: f64, b: f64) -> Result<WallProfile> {
    if !(a.is_finite() && b.is_finite()) || !(b > 0.0) || !(b + a / 4.0 > 0.0) {
        return Err(Error::InvalidProfile(format!(
            "quadratic profile needs B > 0 and B + A/4 > 0, got A={a}, B={b}"
        )));
    }
    WallProfile::finish(Shape::Quadratic { a, b }, ProfileSpec::Quadratic { a, b })
}

/// Constant profile `ℓ ≡ c`, the `A = 0` member of the quadratic family.
pub fn make_constant(c: f64) -> Result<WallProfile> {
    make_quadratic(0.0, c)
}

/// Sine family `ℓ(t) = 1 − amplitude·sin(π (t mod 1))`.
pub fn make_sine(amplitude: f64) -> Result<WallProfile> {
    if !amplitude.is_finite() || amplitude.abs() >= 1.0 {
        return Err(Error::InvalidProfile(format!(
            "sine profile needs |amplitude| < 1, got {amplitude}"
        )));
    }
    WallProfile::finish(Shape::Sine { amp: amplitude }, ProfileSpec::Sine { amplitude })
}

/// Cubic spline through `knots` (pairs `(t, ℓ)` with `t₀ = 0`, `t_n = 1` and
/// `ℓ(0) = ℓ(1)`), C² in the interior, with the one-sided second derivatives
/// at the period boundary prescribed.
pub fn make_spline(knots: &[[f64; 2]], ddl_plus: f64, ddl_minus: f64) -> Result<WallProfile> {
    if knots.len() < 2 {
        return Err(Error::InvalidProfile("spline needs at least two knots".into()));
    }
    let ts: Vec<f64> = knots.iter().map(|k| k[0]).collect();
    let ys: Vec<f64> = knots.iter().map(|k| k[1]).collect();
    if ts[0] != 0.0 || *ts.last().unwrap() != 1.0 {
        return Err(Error::InvalidProfile("spline knots must start at 0 and end at 1".into()));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidProfile("spline knots must be strictly increasing".into()));
    }
    if (ys[0] - ys[ys.len() - 1]).abs() > 1e-12 {
        return Err(Error::InvalidProfile("spline values at 0 and 1 must coincide".into()));
    }
    if !(ddl_plus.is_finite() && ddl_minus.is_finite()) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidProfile("spline data must be finite".into()));
    }
    let n = ts.len() - 1;
    let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    // Second derivatives at knots; the two ends are prescribed.
    let mut m = vec![0.0; n + 1];
    m[0] = ddl_plus;
    m[n] = ddl_minus;
    if n >= 2 {
        // Thomas algorithm on the interior unknowns m[1..n].
        let k = n - 1;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut lower = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            lower[j] = h[i - 1];
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            upper[j] = h[i];
            rhs[j] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        }
        rhs[0] -= lower[0] * m[0];
        rhs[k - 1] -= upper[k - 1] * m[n];
        for j in 1..k {
            let w = lower[j] / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            rhs[j] -= w * rhs[j - 1];
        }
        let mut sol = vec![0.0; k];
        sol[k - 1] = rhs[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            sol[j] = (rhs[j] - upper[j] * sol[j + 1]) / diag[j];
        }
        m[1..n].copy_from_slice(&sol);
    }
    let coeffs = (0..n)
        .map(|i| {
            [
                ys[i],
                (ys[i + 1] - ys[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0,
                0.5 * m[i],
                (m[i + 1] - m[i]) / (6.0 * h[i]),
            ]
        })
        .collect();
    let spline = CubicSpline {
        knots: ts[..n].to_vec(),
        coeffs,
    };
    WallProfile::finish(
        Shape::Spline(spline),
        ProfileSpec::Spline {
            knots: knots.to_vec(),
            ddl_plus,
            ddl_minus,
        },
    )
}

/// Dynamical regime of the limiting map, read off from Δ through the trace
/// `2 − Δ` of its linear part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

impl Regime {
    pub fn classify(delta: f64) -> Regime {
        if delta == 0.0 || delta == 4.0 {
            Regime::Parabolic
        } else if delta > 0.0 && delta < 4.0 {
            Regime::Elliptic
        } else {
            Regime::Hyperbolic
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Elliptic => "Elliptic",
            Regime::Hyperbolic => "Hyperbolic",
            Regime::Parabolic => "Parabolic",
        }
    }
}

/// Normal-form constants of a wall profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormParams {
    #[serde(rename = "J")]
    pub j_int: f64,
    pub l0: f64,
    pub dl_plus: f64,
    pub dl_minus: f64,
    pub ddl_plus: f64,
    pub ddl_minus: f64,
    pub delta: f64,
    pub delta1: f64,
    pub regime: Regime,
}

impl NormalFormParams {
    /// Trace of the branch linearization of the limiting map.
    pub fn trace(&self) -> f64 {
        2.0 - self.delta
    }
}

/// `∫₀¹ ℓ⁻²(s) ds` by adaptive Simpson over each smooth piece. `tol` is
/// relative once the integral exceeds 1.
pub fn compute_j(profile: &WallProfile, tol: f64) -> Result<f64> {
    let mut edges = Vec::with_capacity(profile.breaks.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(&profile.breaks);
    edges.push(1.0);
    let pieces = (edges.len() - 1) as f64;
    let inv_l2 = |s: f64| {
        let l = profile.derivs_at_phase(s)[0];
        1.0 / (l * l)
    };
    // absolute below magnitude 1, relative above (roundoff floor)
    let rough: f64 = edges
        .windows(2)
        .map(|w| crate::quadrature::gauss_legendre_composite(inv_l2, w[0], w[1], 64))
        .sum();
    let tol = tol * rough.abs().max(1.0);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += adaptive_simpson(
            inv_l2,
            w[0],
            w[1],
            tol / pieces,
        )?;
    }
    Ok(total)
}

/// Δ = 𝒥ℓ₀(ℓ̇⁺ − ℓ̇⁻), Δ₁ = ½𝒥²ℓ₀³(ℓ̈⁺ − ℓ̈⁻) and the regime.
pub fn compute_params(profile: &WallProfile, tol: f64) -> Result<NormalFormParams> {
    let j = compute_j(profile, tol)?;
    Ok(params_with_j(profile, j))
}

pub(crate) fn params_with_j(profile: &WallProfile, j: f64) -> NormalFormParams {
    let l0 = profile.l0;
    let delta = j * l0 * (profile.dl_plus - profile.dl_minus);
    let delta1 = 0.5 * j * j * l0 * l0 * l0 * (profile.ddl_plus - profile.ddl_minus);
    NormalFormParams {
        j_int: j,
        l0,
        dl_plus: profile.dl_plus,
        dl_minus: profile.dl_minus,
        ddl_plus: profile.ddl_plus,
        ddl_minus: profile.ddl_minus,
        delta,
        delta1,
        regime: Regime::classify(delta),
    }
}

impl WallProfile {
    /// Normal-form constants from the cached 𝒥.
    pub fn params(&self) -> NormalFormParams {
        params_with_j(self, self.j_int)
    }
}

/// `𝒥(A)` for the quadratic family with `B = 1`, in closed form.
pub fn j_closed_form(a: f64) -> Result<f64> {
    if !(a > -4.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("closed form needs A > -4, got {a}")));
    }
    Ok(2.0 / (a + 4.0) + branch_term(a))
}

/// The log/arctan part of 𝒥(A), written through `atanh`/`atan` so that it is
/// continuous (value ½) at A = 0.
fn branch_term(a: f64) -> f64 {
    let s = a.abs().sqrt();
    if s == 0.0 {
        0.5
    } else if a < 0.0 {
        // ½|A|^{-1/2} log((2+√|A|)/(2−√|A|)) = |A|^{-1/2} atanh(√|A|/2)
        (0.5 * s).atanh() / s
    } else {
        (0.5 * s).atan() / s
    }
}

/// `Δ(A) = −2A(1 + A/4)𝒥(A)` for the quadratic family with `B = 1`.
pub fn delta_closed_form(a: f64) -> Result<f64> {
    if !(a > -4.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("closed form needs A > -4, got {a}")));
    }
    // −2A(1+A/4)·2/(A+4) simplifies to −A.
    Ok(-a - 2.0 * a * (1.0 + a / 4.0) * branch_term(a))
}

/// The hyperbolic/elliptic boundary of the quadratic family on (−4, 0):
/// the root of Δ(A) = 4 found by bisection.
pub fn elliptic_boundary_a(tol: f64) -> Result<f64> {
    bisect(|a| delta_closed_form(a).unwrap_or(f64::NAN) - 4.0, -3.9, -1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_examples() {
        let p = make_quadratic(0.0, 1.0).unwrap();
        assert_eq!(p.l(0.3), 1.0);
        assert_eq!(p.right_limits().0, 0.0);
        assert_eq!(p.left_limits().0, 0.0);

        assert!(make_quadratic(-4.0, 1.0).is_err());
        assert!(make_quadratic(-5.0, 1.0).is_err());
        assert!(make_quadratic(1.0, 0.0).is_err());

        let p = make_quadratic(-1.0, 1.0).unwrap();
        assert_eq!(p.l(0.5), 1.0);
        assert_eq!(p.l(0.0), 0.75);
        assert_eq!(p.l0(), 0.75);
        assert_eq!(p.right_limits(), (1.0, -2.0));
        assert_eq!(p.left_limits(), (-1.0, -2.0));
        // periodic extension
        assert!((p.l(3.25) - p.l(0.25)).abs() < 1e-15);
        assert!((p.l(-0.75) - p.l(0.25)).abs() < 1e-15);
        p.validate().unwrap();
    }

    #[test]
    fn sine_examples() {
        let p = make_sine(0.0).unwrap();
        assert_eq!(p.l(0.4), 1.0);
        let p = make_sine(0.12).unwrap();
        assert!((p.l(0.5) - 0.88).abs() < 1e-15);
        let (dp, _) = p.right_limits();
        let (dm, _) = p.left_limits();
        assert!((dp - dm + 0.24 * PI).abs() < 1e-15);
        assert!(make_sine(0.5).is_ok());
        assert!(make_sine(1.0).is_err());
        assert!(make_sine(-1.2).is_err());
        p.validate().unwrap();
    }

    #[test]
    fn j_constant_profiles() {
        let p = make_constant(1.0).unwrap();
        assert!((compute_j(&p, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        let p = make_constant(2.0).unwrap();
        assert!((compute_j(&p, 1e-12).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn j_quadratic_closed_form_a4() {
        let expected = 0.25 + PI / 8.0;
        assert!((j_closed_form(4.0).unwrap() - expected).abs() < 1e-15);
        let p = make_quadratic(4.0, 1.0).unwrap();
        assert!((compute_j(&p, 1e-12).unwrap() - expected).abs() < 1e-11);
    }

    #[test]
    fn params_examples() {
        let p = make_constant(1.0).unwrap();
        let nf = compute_params(&p, 1e-12).unwrap();
        assert_eq!(nf.delta, 0.0);
        assert_eq!(nf.delta1, 0.0);
        assert_eq!(nf.regime, Regime::Parabolic);

        let p = make_quadratic(-1.0, 1.0).unwrap();
        let nf = compute_params(&p, 1e-12).unwrap();
        let expected = 1.5 * j_closed_form(-1.0).unwrap();
        assert!((nf.delta - expected).abs() < 1e-10);
        assert_eq!(nf.regime, Regime::Elliptic);
        assert!((nf.trace() - (2.0 - nf.delta)).abs() < 1e-15);

        for a in [0.5, 1.0, 4.0] {
            let nf = make_quadratic(a, 1.0).unwrap().params();
            assert!(nf.delta < 0.0);
            assert_eq!(nf.regime, Regime::Hyperbolic);
        }
    }

    #[test]
    fn closed_form_limits() {
        assert_eq!(delta_closed_form(0.0).unwrap(), 0.0);
        assert!((delta_closed_form(-3.999999).unwrap() - 4.0).abs() < 1e-2);
        assert!(delta_closed_form(-4.0).is_err());
        // continuity through A = 0
        let l = delta_closed_form(-1e-9).unwrap();
        let r = delta_closed_form(1e-9).unwrap();
        assert!(l.abs() < 1e-8 && r.abs() < 1e-8);
        let a = elliptic_boundary_a(1e-10).unwrap();
        assert!((a + 2.77927).abs() < 1e-4, "{a}");
    }

    #[test]
    fn regime_boundaries() {
        assert_eq!(Regime::classify(0.0), Regime::Parabolic);
        assert_eq!(Regime::classify(4.0), Regime::Parabolic);
        assert_eq!(Regime::classify(1e-12), Regime::Elliptic);
        assert_eq!(Regime::classify(4.0 - 1e-12), Regime::Elliptic);
        assert_eq!(Regime::classify(-1e-12), Regime::Hyperbolic);
        assert_eq!(Regime::classify(4.0 + 1e-12), Regime::Hyperbolic);
        let a = elliptic_boundary_a(1e-12).unwrap();
        let lo = make_quadratic(a - 1e-4, 1.0).unwrap().params();
        let hi = make_quadratic(a + 1e-4, 1.0).unwrap().params();
        assert_eq!(lo.regime, Regime::Hyperbolic);
        assert_eq!(hi.regime, Regime::Elliptic);
    }

    #[test]
    fn spline_single_cubic() {
        // one piece: ℓ(0)=ℓ(1)=1, ℓ̈(0⁺)=2, ℓ̈(1⁻)=-1
        let p = make_spline(&[[0.0, 1.0], [1.0, 1.0]], 2.0, -1.0).unwrap();
        assert!((p.l(0.0) - 1.0).abs() < 1e-15);
        assert!((p.l(1.0 - 1e-12) - 1.0).abs() < 1e-10);
        assert!((p.right_limits().1 - 2.0).abs() < 1e-14);
        assert!((p.left_limits().1 + 1.0).abs() < 1e-14);
        assert!(p.params().delta1 != 0.0);
        p.validate().unwrap();
        // increments agree with differences
        let d = p.l_increment(0.9, 0.25);
        assert!((d - (p.l(0.15) - p.l(0.9))).abs() < 1e-14);
    }

    #[test]
    fn spline_multi_knot() {
        let knots = [[0.0, 1.0], [0.3, 1.2], [0.6, 0.9], [1.0, 1.0]];
        let p = make_spline(&knots, 0.5, -0.5).unwrap();
        for k in &knots[..3] {
            assert!((p.l(k[0]) - k[1]).abs() < 1e-13);
        }
        // C¹ at interior knots
        for t in [0.3, 0.6] {
            let l = p.dl(t - 1e-9);
            let r = p.dl(t + 1e-9);
            assert!((l - r).abs() < 1e-6);
        }
        p.validate().unwrap();
        let d = p.l_increment(0.25, 0.5);
        assert!((d - (p.l(0.75) - p.l(0.25))).abs() < 1e-14);
        assert!(make_spline(&[[0.0, 1.0], [1.0, 1.1]], 0.0, 0.0).is_err());
        assert!(make_spline(&[[0.0, 0.1], [0.5, -0.2], [1.0, 0.1]], 0.0, 0.0).is_err());
    }

    #[test]
    fn increments_match_differences() {
        for p in [make_quadratic(-1.0, 1.0).unwrap(), make_sine(0.3).unwrap()] {
            for (t, dt) in [(0.2, 1e-3), (0.95, 0.1), (3.7, 1.6)] {
                let d = p.l_increment(t, dt);
                assert!((d - (p.l(t + dt) - p.l(t))).abs() < 1e-14, "{t} {dt}");
            }
        }
    }
}
