//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAIL` cannot be certified on desk-scale
//! hardware; they still print FAIL. The process exits non-zero on any
//! unexpected failure, and also when an expected failure starts passing.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;

use pingpong::collision::{flight_time_expansion, jacobian_check, solve_flight, CollisionState};
use pingpong::config::RunConfig;
use pingpong::coords::conjugacy_residuals;
use pingpong::error::Error;
use pingpong::experiments::{
    bm_scaling, census, elliptic_center, escape_measure_decay, escape_time_mc, fit_escape_tail,
    mixing_proxy, residual_order_fit, trapping_test, BmParams, EscapeParams, Outcome,
};
use pingpong::normal_form::{
    direct_variance_slope, green_kubo_d2, orbit_search_auto, window_scan, OrbitClass, WindowKind,
};
use pingpong::rng;
use pingpong::runner::cmd_run;
use pingpong::stats::{loglog_slope, stable_half_survival, AD_CRITICAL_1PCT};
use pingpong::wall::{
    compute_params, delta_closed_form, elliptic_boundary_a, make_quadratic, make_sine, ProfileSpec,
    WallProfile,
};

/// Criterion 10 asks for 99% of 10⁴ trials to return within 10⁴·v₀²
/// periods; see `c10`.
const EXPECTED_FAIL: &[usize] = &[10];

struct Verdict {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn spline(ddl_plus: f64, ddl_minus: f64) -> WallProfile {
    ProfileSpec::Spline {
        knots: vec![[0.0, 1.0], [1.0, 1.0]],
        ddl_plus,
        ddl_minus,
    }
    .build()
    .expect("spline profile")
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

fn c1() -> Verdict {
    let mut worst: f64 = 0.0;
    for a in [-3.9, -3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 4.0, 10.0] {
        let quad = compute_params(&make_quadratic(a, 1.0).unwrap(), 1e-10).unwrap().delta;
        let closed = delta_closed_form(a).unwrap();
        worst = worst.max(((quad - closed) / closed).abs());
    }
    let near = compute_params(&make_quadratic(-3.999, 1.0).unwrap(), 1e-10).unwrap().delta;
    let root = elliptic_boundary_a(1e-10).unwrap();
    let pass = worst <= 1e-8 && (near - 4.0).abs() <= 1e-2 && (root + 2.77927).abs() <= 1e-4;
    ok(
        pass,
        format!("max rel err {worst:.2e} (≤1e-8), Δ(-3.999)={near:.5} (4±1e-2), root A={root:.6} (-2.77927±1e-4)"),
    )
}

fn c2() -> Verdict {
    let profiles = [
        ("quadratic A=-1", make_quadratic(-1.0, 1.0).unwrap()),
        ("quadratic A=4", make_quadratic(4.0, 1.0).unwrap()),
        ("sine 0.12", make_sine(0.12).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for (i, (_, p)) in profiles.iter().enumerate() {
        let mut r = rng::stream(2, i as u64);
        let mut done = 0;
        while done < 1000 {
            let s = CollisionState::new(r.gen_range(0.0..1.0), 10f64.powf(r.gen_range(1.0..3.0)));
            match jacobian_check(p, &s, 1e-5) {
                Ok(x) => {
                    worst = worst.max((x - 1.0).abs());
                    done += 1;
                }
                Err(Error::StencilStraddlesJump { .. }) => skipped += 1,
                Err(e) => return ok(false, format!("jacobian_check error {e}")),
            }
        }
    }
    ok(
        worst <= 1e-5,
        format!("max |ratio-1| = {worst:.2e} over 3x1000 states (≤1e-5), {skipped} stencils at the jump resampled"),
    )
}

fn c3() -> Verdict {
    let p = make_quadratic(-1.0, 1.0).unwrap();
    let vs = log_grid(1e2, 1e4, 9);
    let res: Vec<f64> = vs
        .iter()
        .map(|&v| {
            [0.2, 0.35, 0.6, 0.8]
                .iter()
                .map(|&t| {
                    let exact = solve_flight(&p, &CollisionState::new(t, v), 1e-15).unwrap().dt;
                    (exact - flight_time_expansion(&p, t, v)).abs()
                })
                .sum::<f64>()
                / 4.0
        })
        .collect();
    let slope = loglog_slope(&vs, &res);
    ok((slope + 4.0).abs() <= 0.2, format!("slope {slope:.3} (-4±0.2)"))
}

fn c4() -> Verdict {
    let p = make_quadratic(-1.0, 1.0).unwrap();
    let vs = log_grid(1e2, 1e4, 9);
    let mut rt = Vec::new();
    let mut rj = Vec::new();
    for &v in &vs {
        let (mut a, mut b) = (0.0, 0.0);
        let phases = [0.2, 0.35, 0.6, 0.8];
        for &t in &phases {
            let (x, y) = conjugacy_residuals(&p, &CollisionState::new(t, v)).unwrap();
            a += x.abs();
            b += y.abs();
        }
        rt.push(a / phases.len() as f64);
        rj.push(b / phases.len() as f64);
    }
    let st = loglog_slope(&vs, &rt);
    let sj = loglog_slope(&vs, &rj);
    ok(
        (st + 4.0).abs() <= 0.3 && (sj + 3.0).abs() <= 0.3,
        format!("slope r_theta {st:.3} (-4±0.3), r_J {sj:.3} (-3±0.3)"),
    )
}

fn c5() -> Verdict {
    let p = spline(2.0, -1.0);
    let grid = log_grid(30.0, 3000.0, 9);
    let f = residual_order_fit(&p, &grid, 200, 5).unwrap();
    let flat = residual_order_fit(&make_quadratic(1.0, 1.0).unwrap(), &grid, 200, 5).unwrap();
    ok(
        (f.slope_fhat + 1.0).abs() <= 0.3 && (f.slope_corrected + 2.0).abs() <= 0.3,
        format!(
            "Δ1={:.3}: vs F̂ {:.3} (-1±0.3), vs F̂+F1 {:.3} (-2±0.3); Δ1=0 contrast vs F̂ {:.3}",
            p.params().delta1,
            f.slope_fhat,
            f.slope_corrected,
            flat.slope_fhat
        ),
    )
}

fn c6() -> Verdict {
    // (N, periodic windows, accelerating windows), in units of π
    let table: [(usize, &[(f64, f64)], &[(f64, f64)]); 8] = [
        (1, &[(0.0, 1.0)], &[(0.5, 1.0)]),
        (2, &[(0.0, 0.5)], &[]),
        (3, &[(0.0, 1.0 / 3.0)], &[(1.0 / 3.0, 0.5)]),
        (4, &[(0.0, 0.25)], &[(0.75, 1.0)]),
        (5, &[(0.0, 0.2)], &[(0.5, 0.6)]),
        (6, &[(0.0, 1.0 / 6.0), (0.5, 1.0)], &[(5.0 / 6.0, 1.0)]),
        (7, &[(0.0, 1.0 / 7.0)], &[(3.0 / 7.0, 0.5)]),
        (8, &[(0.0, 0.125)], &[(0.875, 1.0)]),
    ];
    let mut worst: f64 = 0.0;
    let mut mismatched = Vec::new();
    for (n, per, acc) in table {
        let ws = window_scan(n, 1e-3 * PI).unwrap();
        for (kind, want) in [(WindowKind::Periodic, per), (WindowKind::Accelerating, acc)] {
            let got: Vec<(f64, f64)> = ws
                .iter()
                .filter(|w| w.kind == kind)
                .map(|w| (w.theta_lo / PI, w.theta_hi / PI))
                .collect();
            if got.len() != want.len() {
                mismatched.push(format!("N={n} {kind:?}: {got:.3?}"));
                continue;
            }
            for (g, w) in got.iter().zip(want.iter()) {
                worst = worst.max((g.0 - w.0).abs()).max((g.1 - w.1).abs());
            }
        }
    }
    ok(
        mismatched.is_empty() && worst <= 0.01,
        format!("max endpoint error {worst:.4}π (≤0.01π); mismatched window sets: {mismatched:?}"),
    )
}

fn c7() -> Verdict {
    let (orbits, exact) = orbit_search_auto(3.0, 1).unwrap();
    let find = |class: OrbitClass| orbits.iter().find(|o| o.class == class);
    let p = find(OrbitClass::Periodic);
    let a = find(OrbitClass::Accelerating);
    let d = find(OrbitClass::Decelerating);
    let pass = orbits.len() == 3
        && exact
        && p.map_or(false, |o| o.tau == 0.5 && o.action == 0.0 && o.winding == 0)
        && a.map_or(false, |o| o.tau == 5.0 / 6.0 && o.winding == 1)
        && d.map_or(false, |o| o.tau == 1.0 / 6.0 && o.winding == -1)
        && orbits.iter().all(|o| o.trace.abs() < 2.0);
    ok(
        pass,
        format!(
            "{} orbits, exact arithmetic {exact}: {}",
            orbits.len(),
            orbits
                .iter()
                .map(|o| format!("{:?} τ={} n={} tr={}", o.class, o.tau, o.winding, o.trace))
                .collect::<Vec<_>>()
                .join("; ")
        ),
    )
}

fn c8() -> Verdict {
    let steps = 10_000_000;
    let m = mixing_proxy(-0.3, steps, 60, 30, 8);
    let bound = 3.0 / (steps as f64).sqrt();
    ok(
        m.max_tail_rho <= 0.02 && m.birkhoff_cos.abs() <= bound,
        format!(
            "max |ρ(k)|, k≥30: {:.2e} (≤0.02); Birkhoff cos: {:.2e} (|·|≤{bound:.2e})",
            m.max_tail_rho, m.birkhoff_cos
        ),
    )
}

fn c9() -> Verdict {
    let gk = green_kubo_d2(-0.3, 60, 1_000_000, 9).unwrap();
    let steps = 2000;
    let direct = direct_variance_slope(-0.3, steps, 40_000, 10).variance() / steps as f64;
    let rel = (gk.d2 - direct).abs() / direct;
    ok(
        rel <= 0.10,
        format!("D² Green-Kubo {:.5} ± {:.5}, direct {direct:.5}, rel diff {rel:.3} (≤0.10)", gk.d2, gk.stderr),
    )
}

/// The 10⁴·v₀² budget is 10⁸ periods. A trial that has not returned costs
/// about I₀ ≈ 54 collisions per period, so certifying the 99% clause needs
/// ~5·10¹³ collisions (~2 months at ~10⁷ collisions/s on one core). The
/// tail shape is tested at a 2·v₀² budget, which keeps the median observed;
/// the 99% clause is reported as the fraction actually observed plus the
/// fitted law's extrapolation.
fn c10() -> Verdict {
    let p = make_quadratic(1.0, 1.0).unwrap();
    let v0 = 100.0;
    let budget = 20_000;
    let params = EscapeParams {
        v0,
        c: 5.0,
        v_max: 1e3 * v0,
        trials: 10_000,
        budget,
        seed: 10,
    };
    let recs = escape_time_mc(&p, &params).unwrap();
    let c = census(&recs);
    let fit = match fit_escape_tail(&recs, v0, budget) {
        Ok(f) => f,
        Err(e) => return ok(false, format!("tail fit failed: {e}")),
    };
    let returned = recs.iter().filter(|r| r.outcome == Outcome::ReturnedBelowC).count() as f64 / recs.len() as f64;
    let extrapolated = 1.0 - stable_half_survival(1e4 / fit.dbar);
    let ks_pass = fit.ks <= 0.05;
    ok(
        ks_pass && returned >= 0.99,
        format!(
            "KS {:.4} (≤0.05, {}), D̄={:.4}; returned {:.4} within {budget} periods (need ≥0.99 within 10⁴v₀²=10⁸, \
             not simulated: fitted law predicts {:.4}); census {}/{}/{}",
            fit.ks,
            if ks_pass { "pass" } else { "fail" },
            fit.dbar,
            returned,
            extrapolated,
            c.returned,
            c.exceeded,
            c.exhausted
        ),
    )
}

fn c11() -> Verdict {
    let p = make_quadratic(1.0, 1.0).unwrap();
    let bp = BmParams {
        v0: 100.0,
        a: 0.5,
        b: 2.0,
        trials: 4000,
        seed: 11,
        t_test: 0.1,
        sample_dt: 0.01,
        t_max: 50.0,
    };
    let (_, s) = bm_scaling(&p, &bp).unwrap();
    let gk = green_kubo_d2(p.params().delta, 60, 400_000, 11).unwrap();
    let rel = (s.variance_slope - gk.d2).abs() / gk.d2;
    let z = (s.p_lower - s.p_lower_bm).abs() / s.p_lower_stderr;
    ok(
        rel <= 0.15 && z <= 3.0,
        format!(
            "variance slope {:.4} vs D² {:.4}: rel {rel:.3} (≤0.15); P(hit a first) {:.4} ± {:.4} vs {:.4}: {z:.2} stderr (≤3); \
             AD at t=0.1 {:.3} (1% critical {AD_CRITICAL_1PCT}); undecided {}",
            s.variance_slope, gk.d2, s.p_lower, s.p_lower_stderr, s.p_lower_bm, s.anderson_darling, s.neither
        ),
    )
}

fn c12() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, p) in [("quadratic A=-1", make_quadratic(-1.0, 1.0).unwrap()), ("spline Δ1≠0", spline(-4.0, -2.0))] {
        let q = p.params();
        let vbar = 40.0 / (0.5 * q.j_int * q.l0);
        let t = trapping_test(&p, vbar, 1_000_000, 1e-3, 20, 12).unwrap();
        pass &= t.survived;
        parts.push(format!(
            "{name} (Δ1={:.3}) I={} ratios [{:.3}, {:.3}] survived {}",
            q.delta1, t.action, t.min_ratio, t.max_ratio, t.survived
        ));
    }
    let hyper = trapping_test(&make_quadratic(1.0, 1.0).unwrap(), 100.0, 10, 1e-3, 1, 1);
    pass &= matches!(hyper, Err(Error::Regime(_)));
    parts.push("hyperbolic refused".into());
    ok(pass, parts.join("; "))
}

fn c13() -> Verdict {
    let p = make_quadratic(1.0, 1.0).unwrap();
    let v0 = 30.0;
    let budgets: Vec<u64> = (0..7).map(|k| ((v0 * v0) as u64) << k).collect();
    let d = escape_measure_decay(&p, v0, 3.0, &budgets, 1000, 13, None).unwrap();
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let worst = d.ratios.iter().map(|(r, se)| (r - target).abs() / se).fold(0.0, f64::max);
    let monotone = d.points.windows(2).all(|w| w[1].fraction <= w[0].fraction);
    let ell = make_quadratic(-1.0, 1.0).unwrap();
    let q = ell.params();
    let vbar = 40.0 / (0.5 * q.j_int * q.l0);
    let centre = elliptic_center(&ell, vbar).unwrap().state;
    let stuck = escape_measure_decay(&ell, vbar, 3.0, &budgets, 2, 13, Some(centre)).unwrap();
    let trapped = stuck.points.iter().all(|p| p.fraction == 1.0);
    ok(
        worst <= 3.0 && monotone && trapped,
        format!(
            "ratios {} (1/√2 within 3 stderr, worst {worst:.2}); elliptic contrast fractions all 1: {trapped}",
            d.ratios.iter().map(|(r, se)| format!("{r:.3}±{se:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c14() -> Verdict {
    let cfg = RunConfig::from_toml(
        r#"
seed = 14
[profile]
family = "quadratic"
A = 1.0
B = 1.0

[[experiment]]
kind = "escape"
v0 = 30.0
C = 5.0
trials = 300
budget = 3000

[[experiment]]
kind = "clt"
v0 = 50.0
a = 0.5
b = 2.0
trials = 200
gk_samples = 20000

[[experiment]]
kind = "diffusion"
delta = -0.3
gk_samples = 20000
direct_steps = 200
direct_orbits = 5000
mixing_steps = 100000

[[experiment]]
kind = "measure-decay"
v0 = 20.0
C = 3.0
budgets = [400, 800, 1600]
trials = 200
"#,
    )
    .unwrap();
    let root = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for workers in [1usize, 4, 8] {
        let dir = root.path().join(format!("w{workers}"));
        let report = rng::with_workers(workers, || cmd_run(&cfg, &dir)).unwrap().unwrap();
        let files: Vec<(String, Vec<u8>)> = report
            .files
            .iter()
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(f).unwrap()))
            .collect();
        snapshots.push(files);
    }
    let same = snapshots.windows(2).all(|w| w[0] == w[1]);
    let n = snapshots[0].len();
    let bytes: usize = snapshots[0].iter().map(|f| f.1.len()).sum();
    ok(same, format!("{n} files, {bytes} bytes, identical across 1/4/8 workers: {same}"))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 14] = [
        (1, "Δ(A) closed form vs quadrature", c1),
        (2, "volume-form preservation", c2),
        (3, "flight-time expansion order", c3),
        (4, "conjugacy residual orders", c4),
        (5, "first-return residual orders", c5),
        (6, "periodic/accelerating windows", c6),
        (7, "period-1 orbit triple at Δ=3", c7),
        (8, "mixing proxy at Δ=-0.3", c8),
        (9, "Green-Kubo consistency", c9),
        (10, "escape-time tail", c10),
        (11, "Brownian scaling", c11),
        (12, "elliptic trapping", c12),
        (13, "escape-measure decay", c13),
        (14, "determinism across workers", c14),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if only.as_ref().map_or(false, |o| !o.contains(&id)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let r = f();
        let expected_fail = EXPECTED_FAIL.contains(&id);
        let tag = match (r.pass, expected_fail) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (expected, see harness notes)",
            (true, true) => "PASS (unexpected)",
        };
        println!("criterion {id:>2} {tag}: {name}: {} [{:.1}s]", r.detail, t.elapsed().as_secs_f64());
        if r.pass {
            passed += 1;
        }
        if r.pass == expected_fail {
            unexpected.push(id);
        }
    }
    println!("acceptance: {passed}/{ran} criteria pass; expected failures {EXPECTED_FAIL:?}; unexpected outcomes {unexpected:?}");
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
