//! Seeded Monte Carlo experiments on the exact collision map.
//!
//! Every trial owns the random stream `(seed, trial index)` and trials are
//! collected in index order, so results are identical for any number of
//! workers. Time is measured in periods of the wall motion; collision counts
//! are reported alongside.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collision::{CollisionState, Dynamics};
use crate::coords::{adiabatic_j_at, ReturnMap};
use crate::error::{Error, Result};
use crate::normal_form::{fhat, f_corrected, twist_diagnostic, TorusPoint};
use crate::rng;
use crate::stats::{
    anderson_darling_normal, autocorrelation, ks_distance_censored, loglog_slope, median,
    slope_through_origin, stable_half_median, stable_half_survival, RunningStats, StatsSummary,
};
use crate::wall::{phase_of, Regime, WallProfile};

fn require_hyperbolic(profile: &WallProfile) -> Result<()> {
    let p = profile.params();
    if p.regime != Regime::Hyperbolic {
        return Err(Error::Regime(format!("needs a hyperbolic profile, Δ = {}", p.delta)));
    }
    Ok(())
}

fn require_elliptic(profile: &WallProfile) -> Result<()> {
    let p = profile.params();
    if p.regime != Regime::Elliptic {
        return Err(Error::Regime(format!("needs an elliptic profile, Δ = {}", p.delta)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    ReturnedBelowC,
    ExceededVmax,
    BudgetExhausted,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::ReturnedBelowC => "ReturnedBelowC",
            Outcome::ExceededVmax => "ExceededVmax",
            Outcome::BudgetExhausted => "BudgetExhausted",
        }
    }
}

/// Escape-run settings. `budget` is in periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeParams {
    pub v0: f64,
    pub c: f64,
    pub v_max: f64,
    pub trials: usize,
    pub budget: u64,
    pub seed: u64,
}

/// One escape trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeRecord {
    pub trial: u64,
    pub seed: u64,
    pub t0: f64,
    pub v0: f64,
    pub outcome: Outcome,
    /// Stopping time in periods.
    #[serde(rename = "T")]
    pub t_stop: f64,
    pub collisions: u64,
    pub v_final: f64,
}

/// Runs one trajectory from `start` until `v < c`, `v > v_max` or the
/// period budget.
fn run_escape(dynamics: &Dynamics, start: CollisionState, c: f64, v_max: f64, budget: u64) -> Result<(Outcome, f64, u64, f64)> {
    let mut s = start;
    let mut n = 0u64;
    loop {
        let step = dynamics.step(&s)?;
        s = step.state;
        n += 1;
        let t = (s.winding - start.winding) as f64 + s.phase - start.phase;
        if t >= budget as f64 {
            return Ok((Outcome::BudgetExhausted, budget as f64, n, s.v));
        }
        if s.v < c {
            return Ok((Outcome::ReturnedBelowC, t, n, s.v));
        }
        if s.v > v_max {
            return Ok((Outcome::ExceededVmax, t, n, s.v));
        }
    }
}

/// Escape times from `v0` with uniformly random initial phase.
pub fn escape_time_mc(profile: &WallProfile, params: &EscapeParams) -> Result<Vec<EscapeRecord>> {
    require_hyperbolic(profile)?;
    if !(params.v0 > params.c && params.v_max > params.v0 && params.c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < C < v0 < v_max, got C={} v0={} v_max={}",
            params.c, params.v0, params.v_max
        )));
    }
    let dynamics = Dynamics::new(profile.clone());
    (0..params.trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(params.seed, i);
            let t0: f64 = r.gen();
            let start = CollisionState::new(t0, params.v0);
            let (outcome, t_stop, collisions, v_final) =
                run_escape(&dynamics, start, params.c, params.v_max, params.budget)?;
            Ok(EscapeRecord {
                trial: i,
                seed: params.seed,
                t0,
                v0: params.v0,
                outcome,
                t_stop,
                collisions,
                v_final,
            })
        })
        .collect()
}

/// CSV with columns `trial,seed,t0,v0,outcome,T,collisions,v_final`.
pub fn escape_records_csv(records: &[EscapeRecord]) -> String {
    use crate::io::fmt_f64;
    let mut out = String::from("trial,seed,t0,v0,outcome,T,collisions,v_final\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.seed,
            fmt_f64(r.t0),
            fmt_f64(r.v0),
            r.outcome.as_str(),
            fmt_f64(r.t_stop),
            r.collisions,
            fmt_f64(r.v_final)
        ));
    }
    out
}

/// Outcome counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Census {
    pub trials: usize,
    pub returned: usize,
    pub exceeded: usize,
    pub exhausted: usize,
}

pub fn census(records: &[EscapeRecord]) -> Census {
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    Census {
        trials: records.len(),
        returned: count(Outcome::ReturnedBelowC),
        exceeded: count(Outcome::ExceededVmax),
        exhausted: count(Outcome::BudgetExhausted),
    }
}

/// Index-½ tail fit of escape times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub census: Census,
    pub budget: u64,
    pub fraction_returned: f64,
    /// Median of `T/v0²`, counting unreturned trials as `+∞`.
    pub median_scaled: f64,
    /// Scale with `P(T > D̄v0²t) ≈ erf(1/√(2t))`.
    pub dbar: f64,
    /// KS distance on the observed range, with censored trials beyond it.
    pub ks: f64,
    /// Predicted fraction returned within the budget, from the fitted law.
    pub predicted_returned: f64,
}

/// Fits `D̄` by matching the median of `T/v0²` to the median of the stable
/// law, then measures the KS distance of `T/(D̄v0²)` to it.
pub fn fit_escape_tail(records: &[EscapeRecord], v0: f64, budget: u64) -> Result<TailFit> {
    let c = census(records);
    let scaled: Vec<f64> = records
        .iter()
        .filter(|r| r.outcome == Outcome::ReturnedBelowC)
        .map(|r| r.t_stop / (v0 * v0))
        .collect();
    if 2 * scaled.len() <= records.len() {
        return Err(Error::InvalidArgument(format!(
            "median not observed: only {} of {} trials returned within the budget",
            scaled.len(),
            records.len()
        )));
    }
    let mut all: Vec<f64> = scaled.clone();
    all.resize(records.len(), f64::INFINITY);
    let med = median(&all);
    let dbar = med / stable_half_median();
    let x: Vec<f64> = scaled.iter().map(|s| s / dbar).collect();
    let limit = budget as f64 / (v0 * v0 * dbar);
    let observed: Vec<f64> = x.into_iter().filter(|v| *v <= limit).collect();
    let cdf = |t: f64| 1.0 - stable_half_survival(t);
    let ks = ks_distance_censored(&observed, records.len(), limit, cdf);
    Ok(TailFit {
        census: c,
        budget,
        fraction_returned: c.returned as f64 / c.trials as f64,
        median_scaled: med,
        dbar,
        ks,
        predicted_returned: cdf(limit),
    })
}

/// Which barrier stopped a Brownian-scaling trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Barrier {
    Lower,
    Upper,
    Neither,
}

/// Rescaled action `I_n/I_0` at times `t = n/I_0²` (n counts periods),
/// recorded on a coarse grid until a barrier is hit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessSample {
    pub trial: u64,
    pub i0: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stopped: Barrier,
    pub stop_time: f64,
}

/// Brownian-scaling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BmParams {
    pub v0: f64,
    pub a: f64,
    pub b: f64,
    pub trials: usize,
    pub seed: u64,
    /// Rescaled time at which increments are tested for normality.
    pub t_test: f64,
    /// Grid spacing (rescaled time) of stored trajectory samples.
    pub sample_dt: f64,
    /// Give up on a trial after this rescaled time.
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmSummary {
    pub lower: usize,
    pub upper: usize,
    pub neither: usize,
    /// Fraction stopped at the lower barrier among decided trials.
    pub p_lower: f64,
    pub p_lower_stderr: f64,
    /// `(b − 1)/(b − a)` for driftless Brownian motion from 1.
    pub p_lower_bm: f64,
    /// Least-squares slope of `Var(I_n − I_0)` against n (periods).
    pub variance_slope: f64,
    pub variance_points: Vec<(f64, f64)>,
    /// Corrected Anderson-Darling statistic of increments at `t_test`.
    pub anderson_darling: f64,
    pub stats: Vec<StatsSummary>,
}

/// Samples the action process at integer times from random initial phases.
pub fn bm_scaling(profile: &WallProfile, params: &BmParams) -> Result<(Vec<ProcessSample>, BmSummary)> {
    require_hyperbolic(profile)?;
    if !(0.0 < params.a && params.a < 1.0 && 1.0 < params.b) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < a < 1 < b, got a={} b={}",
            params.a, params.b
        )));
    }
    if params.v0 < 50.0 {
        return Err(Error::InvalidArgument(format!("v0 must be at least 50, got {}", params.v0)));
    }
    let dynamics = Dynamics::new(profile.clone());
    let var_points = 10usize;
    let runs: Vec<(ProcessSample, Vec<f64>)> = (0..params.trials as u64)
        .into_par_iter()
        .map(|i| -> Result<(ProcessSample, Vec<f64>)> {
            let mut r = rng::stream(params.seed, i);
            let mut s = CollisionState::new(r.gen::<f64>(), params.v0);
            // I_0 is read at the first return
            let mut i0 = f64::NAN;
            let mut n0 = 0i64;
            let mut sample = ProcessSample {
                trial: i,
                i0: f64::NAN,
                times: Vec::new(),
                values: Vec::new(),
                stopped: Barrier::Neither,
                stop_time: f64::NAN,
            };
            let mut increments = vec![f64::NAN; var_points];
            let mut next_sample = 0.0;
            loop {
                let step = dynamics.step(&s)?;
                s = step.state;
                if step.crossed == 0 {
                    continue;
                }
                let action = adiabatic_j_at(profile, s.phase, s.v);
                if i0.is_nan() {
                    i0 = action;
                    n0 = s.winding;
                    sample.i0 = i0;
                }
                let n = (s.winding - n0) as f64;
                let t = n / (i0 * i0);
                let x = action / i0;
                for (k, slot) in increments.iter_mut().enumerate() {
                    let tk = params.t_test * (k + 1) as f64 / var_points as f64;
                    if slot.is_nan() && t >= tk {
                        *slot = action - i0;
                    }
                }
                if sample.stopped == Barrier::Neither {
                    if t >= next_sample {
                        sample.times.push(t);
                        sample.values.push(x);
                        next_sample += params.sample_dt;
                    }
                    if x <= params.a || x >= params.b {
                        sample.stopped = if x <= params.a { Barrier::Lower } else { Barrier::Upper };
                        sample.stop_time = t;
                        sample.times.push(t);
                        sample.values.push(x);
                    }
                }
                let done_var = t >= params.t_test;
                if (sample.stopped != Barrier::Neither && done_var) || t >= params.t_max {
                    break;
                }
            }
            Ok((sample, increments))
        })
        .collect::<Result<_>>()?;

    let lower = runs.iter().filter(|r| r.0.stopped == Barrier::Lower).count();
    let upper = runs.iter().filter(|r| r.0.stopped == Barrier::Upper).count();
    let neither = runs.len() - lower - upper;
    let decided = (lower + upper) as f64;
    let p = lower as f64 / decided;
    let p_se = (p * (1.0 - p) / decided).sqrt();

    // increments indexed by period count n = t·I0²; average over trials
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..var_points {
        let vals: Vec<f64> = runs.iter().map(|r| r.1[k]).filter(|v| v.is_finite()).collect();
        let st: RunningStats = vals.iter().copied().collect();
        let mean_i0_sq = runs.iter().map(|r| r.0.i0 * r.0.i0).sum::<f64>() / runs.len() as f64;
        let n = params.t_test * (k + 1) as f64 / var_points as f64 * mean_i0_sq;
        xs.push(n);
        ys.push(st.variance());
    }
    let slope = slope_through_origin(&xs, &ys);
    let last: Vec<f64> = runs.iter().map(|r| r.1[var_points - 1]).filter(|v| v.is_finite()).collect();
    let ad = anderson_darling_normal(&last);
    let summary = BmSummary {
        lower,
        upper,
        neither,
        p_lower: p,
        p_lower_stderr: p_se,
        p_lower_bm: (params.b - 1.0) / (params.b - params.a),
        variance_slope: slope,
        variance_points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        anderson_darling: ad,
        stats: vec![
            StatsSummary {
                name: "p_lower".into(),
                estimate: p,
                stderr: p_se,
                samples: decided as u64,
                ks: None,
            },
            StatsSummary {
                name: "variance_slope".into(),
                estimate: slope,
                stderr: slope * (2.0 / last.len() as f64).sqrt(),
                samples: last.len() as u64,
                ks: None,
            },
        ],
    };
    Ok((runs.into_iter().map(|r| r.0).collect(), summary))
}

/// Outcome of a trapping run from one initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapRun {
    pub start: CollisionState,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub survived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapResult {
    pub vbar: f64,
    /// Integer action of the elliptic fixed point.
    pub action: f64,
    pub tau: f64,
    pub center: TrapRun,
    pub ball: Vec<TrapRun>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub survived: bool,
}

/// Band the velocity ratio must stay in.
pub const TRAP_BAND: (f64, f64) = (0.5, 2.0);

fn trap_run(dynamics: &Dynamics, start: CollisionState, vbar: f64, iterations: u64) -> Result<TrapRun> {
    let mut s = start;
    let mut lo = s.v / vbar;
    let mut hi = lo;
    for _ in 0..iterations {
        s = dynamics.step(&s)?.state;
        let r = s.v / vbar;
        lo = lo.min(r);
        hi = hi.max(r);
        if lo < TRAP_BAND.0 || hi > TRAP_BAND.1 {
            break;
        }
    }
    Ok(TrapRun {
        start,
        min_ratio: lo,
        max_ratio: hi,
        survived: lo >= TRAP_BAND.0 && hi <= TRAP_BAND.1,
    })
}

/// Elliptic fixed point of the corrected normal form as a collision state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticCenter {
    pub state: CollisionState,
    /// Integer action of the fixed point.
    pub action: f64,
    pub tau: f64,
}

/// The fixed point at the integer action nearest to `J(0⁺, v̄)`, shifted off
/// `τ = ½` by the first-order correction.
pub fn elliptic_center(profile: &WallProfile, vbar: f64) -> Result<EllipticCenter> {
    require_elliptic(profile)?;
    let params = profile.params();
    let action = adiabatic_j_at(profile, 0.0, vbar).round();
    if action < 1.0 {
        return Err(Error::NoFixedPoint(format!("action {action} too small at v̄ = {vbar}")));
    }
    let twist = twist_diagnostic(params.delta, params.delta1, action)
        .map_err(|e| Error::NoFixedPoint(e.to_string()))?;
    let tau = 0.5 + twist.center_shift;
    let state = ReturnMap::new(profile).state_at(tau, action)?;
    Ok(EllipticCenter { state, action, tau })
}

/// Builds the elliptic fixed point of the corrected normal form at the
/// integer action nearest to `J(0⁺, v̄)`, maps it to a collision state and
/// iterates the exact dynamics from it and from `ball_points` random points
/// within `ball_radius` of it in the `(t, v)` plane.
pub fn trapping_test(
    profile: &WallProfile,
    vbar: f64,
    iterations: u64,
    ball_radius: f64,
    ball_points: usize,
    seed: u64,
) -> Result<TrapResult> {
    let center_pt = elliptic_center(profile, vbar)?;
    let (center_state, action, tau) = (center_pt.state, center_pt.action, center_pt.tau);
    let dynamics = Dynamics::new(profile.clone());
    // the reference velocity is the fixed point's own
    let vref = center_state.v;
    let center = trap_run(&dynamics, center_state, vref, iterations)?;
    let ball: Vec<TrapRun> = (0..ball_points as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let rho = ball_radius * r.gen::<f64>().sqrt();
            let ang = std::f64::consts::TAU * r.gen::<f64>();
            let t = center_state.phase + rho * ang.cos();
            let start = CollisionState {
                winding: t.floor() as i64,
                phase: phase_of(t),
                v: center_state.v + rho * ang.sin(),
            };
            trap_run(&dynamics, start, vref, iterations)
        })
        .collect::<Result<_>>()?;
    let min_ratio = ball.iter().map(|b| b.min_ratio).fold(center.min_ratio, f64::min);
    let max_ratio = ball.iter().map(|b| b.max_ratio).fold(center.max_ratio, f64::max);
    let survived = center.survived && ball.iter().all(|b| b.survived);
    Ok(TrapResult {
        vbar: vref,
        action,
        tau,
        center,
        ball,
        min_ratio,
        max_ratio,
        survived,
    })
}

/// Fraction of trials not yet below `C` after a period budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub budget: u64,
    pub fraction: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayResult {
    pub points: Vec<DecayPoint>,
    /// `fraction(B_{k+1})/fraction(B_k)` with delta-method stderr.
    pub ratios: Vec<(f64, f64)>,
    pub census: Census,
}

/// Runs once to the largest budget and reads off the un-returned fraction at
/// each smaller budget. With `start` set, every trial starts there instead of
/// at a random phase, and the regime gate is lifted.
pub fn escape_measure_decay(
    profile: &WallProfile,
    v0: f64,
    c: f64,
    budgets: &[u64],
    trials: usize,
    seed: u64,
    start: Option<CollisionState>,
) -> Result<DecayResult> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("budgets must be non-empty and increasing".into()));
    }
    let max_budget = *budgets.last().expect("non-empty");
    let params = EscapeParams {
        v0,
        c,
        v_max: 1e3 * v0,
        trials,
        budget: max_budget,
        seed,
    };
    let records = match start {
        None => escape_time_mc(profile, &params)?,
        Some(s) => {
            let dynamics = Dynamics::new(profile.clone());
            (0..trials as u64)
                .into_par_iter()
                .map(|i| {
                    let (outcome, t_stop, collisions, v_final) =
                        run_escape(&dynamics, s, c, params.v_max, max_budget)?;
                    Ok(EscapeRecord {
                        trial: i,
                        seed,
                        t0: s.phase,
                        v0: s.v,
                        outcome,
                        t_stop,
                        collisions,
                        v_final,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let n = records.len() as f64;
    let points: Vec<DecayPoint> = budgets
        .iter()
        .map(|&b| {
            let back = records
                .iter()
                .filter(|r| r.outcome == Outcome::ReturnedBelowC && r.t_stop <= b as f64)
                .count() as f64;
            let f = 1.0 - back / n;
            DecayPoint {
                budget: b,
                fraction: f,
                stderr: (f * (1.0 - f) / n).sqrt(),
                trials: records.len(),
            }
        })
        .collect();
    let ratios = points
        .windows(2)
        .map(|w| {
            let (f0, f1) = (w[0].fraction, w[1].fraction);
            let ratio = f1 / f0;
            // nested samples: the later survivors are a subset of the earlier
            // ones, so the ratio is a binomial proportion among them
            let se = (ratio * (1.0 - ratio) / (f0 * n)).sqrt();
            (ratio, se)
        })
        .collect();
    Ok(DecayResult {
        points,
        ratios,
        census: census(&records),
    })
}

/// Action discrepancies of the measured first return at one action level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRow {
    #[serde(rename = "I")]
    pub action: f64,
    pub samples: usize,
    /// Mean |Ī − F̂| in the action.
    pub vs_fhat: f64,
    /// Mean |Ī − (F̂ + F₁)| in the action.
    pub vs_corrected: f64,
    /// Mean torus distance of τ̄ from the prediction.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualFit {
    pub rows: Vec<ResidualRow>,
    pub slope_fhat: f64,
    pub slope_corrected: f64,
    pub slope_tau: f64,
}

/// Returns closer than this to the discontinuity of `F̂` are skipped.
const WRAP_MARGIN: f64 = 0.02;

/// Compares one measured return with the limit maps, at random points of
/// the strip for each action level.
pub fn residual_order_fit(profile: &WallProfile, i_grid: &[f64], samples_per_i: usize, seed: u64) -> Result<ResidualFit> {
    let lo = i_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = i_grid.iter().copied().fold(0.0, f64::max);
    if i_grid.len() < 3 || !(lo > 0.0) || hi / lo < 99.999 {
        return Err(Error::InvalidArgument(format!(
            "action grid must span two decades with at least 3 levels, got [{lo}, {hi}]"
        )));
    }
    let p = profile.params();
    let map = ReturnMap::new(profile);
    let rows: Vec<ResidualRow> = i_grid
        .iter()
        .enumerate()
        .map(|(gi, &level)| -> Result<ResidualRow> {
            let per: Vec<Option<(f64, f64, f64)>> = (0..samples_per_i as u64)
                .into_par_iter()
                .map(|k| -> Result<Option<(f64, f64, f64)>> {
                    let mut r = rng::stream(seed, ((gi as u64) << 32) | k);
                    let tau0 = r.gen::<f64>();
                    // one return first, so that the start is a genuine strip point
                    let s0 = map.state_at(tau0.min(1.0 - 1e-12), level)?;
                    let first = map.first_return(&s0)?;
                    let second = map.first_return(&first.state)?;
                    let x = TorusPoint::new(first.point.tau, first.point.action);
                    let a = fhat(x, p.delta);
                    if a.tau < WRAP_MARGIN || a.tau > 1.0 - WRAP_MARGIN {
                        return Ok(None);
                    }
                    let b = f_corrected(x, p.delta, p.delta1, first.point.action)?;
                    let meas = second.point.action;
                    let dt = phase_of(second.point.tau - a.tau);
                    Ok(Some(((meas - a.lifted()).abs(), (meas - b.lifted()).abs(), dt.min(1.0 - dt))))
                })
                .collect::<Result<_>>()?;
            let kept: Vec<(f64, f64, f64)> = per.into_iter().flatten().collect();
            let m = kept.len().max(1) as f64;
            Ok(ResidualRow {
                action: level,
                samples: kept.len(),
                vs_fhat: kept.iter().map(|k| k.0).sum::<f64>() / m,
                vs_corrected: kept.iter().map(|k| k.1).sum::<f64>() / m,
                tau: kept.iter().map(|k| k.2).sum::<f64>() / m,
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.action).collect();
    let slope = |f: fn(&ResidualRow) -> f64| loglog_slope(&xs, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(ResidualFit {
        slope_fhat: slope(|r| r.vs_fhat),
        slope_corrected: slope(|r| r.vs_corrected),
        slope_tau: slope(|r| r.tau),
        rows,
    })
}

/// Correlation decay and equidistribution along one long orbit of the
/// sawtooth map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingProxy {
    pub steps: usize,
    pub autocorrelation: Vec<f64>,
    /// Largest `|ρ(k)|` over `k ≥ lag_floor`.
    pub max_tail_rho: f64,
    pub lag_floor: usize,
    /// Birkhoff average of `cos(2πτ)`.
    pub birkhoff_cos: f64,
}

pub fn mixing_proxy(delta: f64, steps: usize, max_lag: usize, lag_floor: usize, seed: u64) -> MixingProxy {
    let mut r = rng::stream(seed, 0);
    let mut p = TorusPoint::new(r.gen(), r.gen());
    let mut incr = Vec::with_capacity(steps);
    let mut cos_sum = 0.0;
    for _ in 0..steps {
        let q = fhat(p, delta);
        incr.push(q.lifted() - p.lifted());
        cos_sum += (std::f64::consts::TAU * q.tau).cos();
        p = q;
    }
    let rho = autocorrelation(&incr, max_lag);
    let max_tail_rho = rho[lag_floor.min(max_lag)..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    MixingProxy {
        steps,
        autocorrelation: rho,
        max_tail_rho,
        lag_floor,
        birkhoff_cos: cos_sum / steps as f64,
    }
}

/// Tail-law summary for the escape run.
pub fn escape_summary(fit: &TailFit) -> StatsSummary {
    StatsSummary {
        name: "dbar".into(),
        estimate: fit.dbar,
        stderr: f64::NAN,
        samples: fit.census.trials as u64,
        ks: Some(fit.ks),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wall::make_quadratic;

    #[test]
    fn regime_gates() {
        let ell = make_quadratic(-1.0, 1.0).unwrap();
        let hyp = make_quadratic(1.0, 1.0).unwrap();
        let p = EscapeParams {
            v0: 30.0,
            c: 5.0,
            v_max: 3e4,
            trials: 4,
            budget: 10,
            seed: 1,
        };
        assert!(matches!(escape_time_mc(&ell, &p), Err(Error::Regime(_))));
        assert!(matches!(trapping_test(&hyp, 50.0, 10, 1e-3, 2, 1), Err(Error::Regime(_))));
    }

    #[test]
    fn escape_accounting_and_determinism() {
        let hyp = make_quadratic(1.0, 1.0).unwrap();
        let p = EscapeParams {
            v0: 20.0,
            c: 5.0,
            v_max: 2e4,
            trials: 40,
            budget: 200,
            seed: 9,
        };
        let a = escape_time_mc(&hyp, &p).unwrap();
        let c = census(&a);
        assert_eq!(c.returned + c.exceeded + c.exhausted, c.trials);
        for r in &a {
            if r.outcome == Outcome::ReturnedBelowC {
                assert!(r.v_final < p.c && r.t_stop <= p.budget as f64);
            }
        }
        let b = rng::with_workers(3, || escape_time_mc(&hyp, &p)).unwrap().unwrap();
        assert_eq!(escape_records_csv(&a), escape_records_csv(&b));
    }

    #[test]
    fn tiny_budget_keeps_everyone_out() {
        let hyp = make_quadratic(1.0, 1.0).unwrap();
        let d = escape_measure_decay(&hyp, 60.0, 5.0, &[1, 2, 4], 20, 3, None).unwrap();
        assert!(d.points.iter().all(|p| p.fraction == 1.0));
    }

    #[test]
    fn mixing_proxy_runs() {
        let m = mixing_proxy(-0.3, 100_000, 40, 30, 2);
        assert!((m.autocorrelation[0] - 1.0).abs() < 1e-12);
        assert!(m.birkhoff_cos.abs() < 0.05);
    }
}
