//! Numerical integration and scalar root bracketing.
//!
//! Two integrators live here. [`adaptive_simpson`] is the tolerance-driven
//! workhorse used for whole-period integrals such as the wall constant
//! `∫₀¹ ℓ⁻²`. [`gauss_legendre`] is a fixed 8-point rule used on the very short
//! intervals spanned by a single flight, where it is accurate to a few ulps of
//! the result and does not suffer the cancellation of differencing two long
//! integrals.

use crate::error::{Error, Result};

/// Default absolute tolerance for whole-period integrals.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Hard cap on integrand evaluations for one adaptive call.
pub const MAX_EVALS: usize = 2_000_000;

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let dx = half * x;
        acc += w * (f(mid - dx) + f(mid + dx));
    }
    acc * half
}

/// Composite Gauss-Legendre with `pieces` equal panels.
pub fn gauss_legendre_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + h };
            gauss_legendre(&f, lo, hi)
        })
        .sum()
}

/// Adaptive Simpson quadrature with Richardson correction, to absolute
/// tolerance `tol`. The end points are sampled, so an integrand with a jump
/// must be split there by the caller.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "adaptive_simpson on [{a}, {b}] with tol {tol}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    // Seed with a uniform split so that the first comparison already sees
    // the shape of the integrand.
    const SEED_PANELS: usize = 8;
    let h = (b - a) / SEED_PANELS as f64;
    let mut evals = 0usize;
    let mut total = 0.0;
    for i in 0..SEED_PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == SEED_PANELS { b } else { lo + h };
        let fa = f(lo);
        let fm = f(0.5 * (lo + hi));
        let fb = f(hi);
        evals += 3;
        let whole = simpson(lo, hi, fa, fm, fb);
        total += recurse(&f, lo, hi, fa, fm, fb, whole, tol / SEED_PANELS as f64, 0, &mut evals)?;
    }
    Ok(total)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // roundoff floor: a panel agreeing to 1e-12 relative is as good as it gets
    let floor = 1e-12 * (left.abs() + right.abs());
    if delta.abs() <= (15.0 * tol).max(floor) || depth >= 48 || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        if depth >= 48 && delta.abs() > 15.0 * tol {
            return Err(Error::QuadratureNonConvergence { a, b, evals: *evals });
        }
        return Ok(left + right + delta / 15.0);
    }
    if *evals > MAX_EVALS {
        return Err(Error::QuadratureNonConvergence { a, b, evals: *evals });
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, evals)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, evals)?;
    Ok(l + r)
}

/// Plain bisection for a sign change of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `tol`. Requires `f(lo)` and `f(hi)` of opposite
/// sign (or one of them zero).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidArgument(format!(
            "bisect: no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomials_and_transcendentals() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_exact_to_degree_15() {
        let v = gauss_legendre(|x| x.powi(15) + x.powi(14), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        // relative accuracy survives on tiny intervals
        let a = 0.3;
        let b = a + 2e-4;
        let d = b - a;
        let v = gauss_legendre(|x| x.cos(), a, b);
        let exact = 2.0 * (a + d / 2.0).cos() * (d / 2.0).sin();
        assert!(((v - exact) / exact).abs() < 1e-14);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-10).is_err());
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(adaptive_simpson(|x| x, 0.0, 1.0, 0.0).is_err());
    }
}
