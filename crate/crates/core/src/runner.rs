//! Command implementations behind the `pingpong` binary.
//!
//! Each command writes the resolved config to `config.toml` in the output
//! directory, then its datasets. Every JSON summary embeds the same config.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::collision::{CollisionState, Dynamics, FlightSolver};
use crate::config::{ExperimentBlock, ExperimentKind, RunConfig};
use crate::coords::{adiabatic_j_at, return_scan, ReturnMap};
use crate::error::{Error, Result};
use crate::experiments::{
    bm_scaling, elliptic_center, escape_measure_decay, escape_records_csv, escape_time_mc,
    fit_escape_tail, mixing_proxy, residual_order_fit, trapping_test, BmParams, EscapeParams,
    TrapRun,
};
use crate::io::{fmt_f64, write_text};
use crate::normal_form::{
    direct_variance_slope, fhat, green_kubo_d2, orbit_search_auto, orbits_to_jsonl, portrait,
    window_scan, windows_to_csv, PortraitMap, TorusPoint,
};
use crate::rng;
use crate::wall::{compute_params, make_quadratic, Regime};

/// One evaluated assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub experiment: String,
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn write(&mut self, out: &Path, name: &str, contents: &str) -> Result<()> {
        let path = out.join(name);
        write_text(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn check(&mut self, experiment: &str, name: &str, value: f64, limit: f64, pass: bool) {
        self.checks.push(Check {
            experiment: experiment.to_string(),
            name: name.to_string(),
            value,
            limit,
            pass,
        });
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn config_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn begin(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::default();
    report.write(out, "config.toml", &cfg.to_toml())?;
    Ok(report)
}

/// Normal-form constants of the configured profile, plus the Δ-curve of the
/// quadratic family when `[params.sweep_a]` is set.
pub fn cmd_params(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut report = begin(cfg, out)?;
    let profile = cfg.profile.build()?;
    let params = compute_params(&profile, cfg.tolerances.quadrature)?;
    let summary = json!({
        "config": config_value(cfg),
        "params": params,
        "trace": params.trace(),
    });
    report.write(out, "params.json", &pretty(&summary))?;
    if let Some(sweep) = cfg.params.and_then(|p| p.sweep_a) {
        let mut csv = String::from("A,J,delta,delta1,regime\n");
        let steps = ((sweep.to - sweep.from) / sweep.step + 1e-9).floor() as usize;
        for k in 0..=steps {
            let a = sweep.from + k as f64 * sweep.step;
            // the wall must stay positive: B + A/4 > 0
            let Ok(p) = make_quadratic(a, sweep.b).and_then(|w| compute_params(&w, cfg.tolerances.quadrature)) else {
                continue;
            };
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(a),
                fmt_f64(p.j_int),
                fmt_f64(p.delta),
                fmt_f64(p.delta1),
                p.regime.as_str()
            ));
        }
        report.write(out, "delta_curve.csv", &csv)?;
    }
    Ok(report)
}

/// Point clouds of one of the model maps or of the physical collision map.
pub fn cmd_portrait(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    let block = cfg
        .portrait
        .clone()
        .ok_or_else(|| Error::InvalidArgument("config: the portrait command needs a [portrait] table".into()))?;
    let mut report = begin(cfg, out)?;
    let profile = cfg.profile.build()?;
    let params = profile.params();
    let delta = block.delta.unwrap_or(params.delta);
    let delta1 = block.delta1.unwrap_or(params.delta1);
    let mut summary = json!({
        "config": config_value(cfg),
        "map": block.map,
        "delta": delta,
        "delta1": delta1,
        "regime": Regime::classify(delta),
    });
    match block.map {
        PortraitMap::Physical => {
            let [lo, hi] = block.v_window.unwrap_or([50.0, 60.0]);
            let dynamics = Dynamics::with_solver(profile.clone(), FlightSolver::with_tol(cfg.tolerances.flight));
            let seeds: Vec<CollisionState> = (0..block.seeds as u64)
                .map(|i| {
                    let mut r = rng::stream(cfg.seed, i);
                    CollisionState::new(r.gen::<f64>(), lo + (hi - lo) * r.gen::<f64>())
                })
                .collect();
            let mut csv = String::from("seed,iter,t_mod1,v\n");
            let mut per_seed = Vec::new();
            for (k, s0) in seeds.iter().enumerate() {
                let mut s = *s0;
                let (mut vmin, mut vmax) = (s.v, s.v);
                let mut inside = 0usize;
                for it in 0..=block.iterations {
                    if it > 0 {
                        s = dynamics.step(&s)?.state;
                    }
                    vmin = vmin.min(s.v);
                    vmax = vmax.max(s.v);
                    if (lo..=hi).contains(&s.v) {
                        inside += 1;
                        csv.push_str(&format!("{k},{it},{},{}\n", fmt_f64(s.phase), fmt_f64(s.v)));
                    }
                }
                per_seed.push(json!({
                    "seed": k, "t0": s0.phase, "v0": s0.v,
                    "v_min": vmin, "v_max": vmax,
                    "fraction_in_window": inside as f64 / (block.iterations + 1) as f64,
                }));
            }
            summary["v_window"] = json!([lo, hi]);
            summary["orbits"] = Value::Array(per_seed);
            report.write(out, "portrait.csv", &csv)?;
        }
        map => {
            let i_abs = block.i_abs.unwrap_or(100.0);
            let seeds: Vec<(f64, f64)> = (0..block.seeds as u64)
                .map(|i| {
                    let mut r = rng::stream(cfg.seed, i);
                    (r.gen::<f64>(), r.gen::<f64>())
                })
                .collect();
            let pts = portrait(map, delta, delta1, i_abs, &seeds, block.iterations)?;
            let mut csv = String::from("seed,iter,tau,I\n");
            for (s, it, tau, action) in pts {
                csv.push_str(&format!("{s},{it},{},{}\n", fmt_f64(tau), fmt_f64(action)));
            }
            if map == PortraitMap::Corrected {
                summary["I_abs"] = json!(i_abs);
            }
            report.write(out, "portrait.csv", &csv)?;
        }
    }
    report.write(out, "portrait.json", &pretty(&summary))?;
    Ok(report)
}

/// Runs every `[[experiment]]` block in order.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    if cfg.experiments.is_empty() {
        return Err(Error::InvalidArgument("config: the run command needs at least one [[experiment]]".into()));
    }
    let mut report = begin(cfg, out)?;
    for block in &cfg.experiments {
        run_experiment(cfg, block, out, &mut report)?;
    }
    let checks = serde_json::to_value(&report.checks).expect("checks serialize");
    report.write(out, "checks.json", &pretty(&checks))?;
    Ok(report)
}

fn assertion(block: &ExperimentBlock, key: &str) -> Option<f64> {
    block.assertions.get(key).copied()
}

fn run_experiment(cfg: &RunConfig, block: &ExperimentBlock, out: &Path, report: &mut RunReport) -> Result<()> {
    let label = block.label();
    let seed = block.seed.unwrap_or(cfg.seed);
    let profile = cfg.profile.build()?;
    let params = profile.params();
    let mut summary = json!({
        "experiment": label,
        "kind": block.kind.as_str(),
        "seed": seed,
        "config": config_value(cfg),
    });
    match &block.kind {
        ExperimentKind::Escape(b) => {
            let p = EscapeParams {
                v0: b.v0,
                c: b.c,
                v_max: b.v_max.unwrap_or(1e3 * b.v0),
                trials: b.trials,
                budget: b.budget,
                seed,
            };
            let records = escape_time_mc(&profile, &p)?;
            report.write(out, &format!("{label}.csv"), &escape_records_csv(&records))?;
            let fit = fit_escape_tail(&records, b.v0, b.budget);
            let per_velocity = 0.5 * params.j_int * params.l0;
            summary["census"] = json!(crate::experiments::census(&records));
            summary["action_per_velocity"] = json!(per_velocity);
            summary["total_collisions"] = json!(records.iter().map(|r| r.collisions).sum::<u64>());
            match &fit {
                Ok(f) => {
                    summary["fit"] = json!(f);
                    summary["dbar_action"] = json!(f.dbar / (per_velocity * per_velocity));
                }
                Err(e) => summary["fit_error"] = json!(e.to_string()),
            }
            let returned = records
                .iter()
                .filter(|r| r.outcome == crate::experiments::Outcome::ReturnedBelowC)
                .count() as f64
                / records.len() as f64;
            if let Some(lim) = assertion(block, "ks_max") {
                let ks = fit.as_ref().map(|f| f.ks).unwrap_or(f64::INFINITY);
                report.check(&label, "ks_max", ks, lim, ks <= lim);
            }
            if let Some(lim) = assertion(block, "min_returned") {
                report.check(&label, "min_returned", returned, lim, returned >= lim);
            }
        }
        ExperimentKind::Clt(b) => {
            let p = BmParams {
                v0: b.v0,
                a: b.a,
                b: b.b,
                trials: b.trials,
                seed,
                t_test: b.t_test,
                sample_dt: b.sample_dt,
                t_max: b.t_max,
            };
            let (samples, s) = bm_scaling(&profile, &p)?;
            let gk = green_kubo_d2(params.delta, b.gk_terms, b.gk_samples, seed)?;
            let per_velocity = 0.5 * params.j_int * params.l0;
            let mut csv = String::from("trial,I0,t,I_over_I0,v_equiv,stopped\n");
            for smp in &samples {
                let stop = match smp.stopped {
                    crate::experiments::Barrier::Lower => "a",
                    crate::experiments::Barrier::Upper => "b",
                    crate::experiments::Barrier::Neither => "",
                };
                for (t, x) in smp.times.iter().zip(&smp.values) {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{stop}\n",
                        smp.trial,
                        fmt_f64(smp.i0),
                        fmt_f64(*t),
                        fmt_f64(*x),
                        fmt_f64(x * smp.i0 / per_velocity)
                    ));
                }
            }
            report.write(out, &format!("{label}.csv"), &csv)?;
            summary["summary"] = json!(s);
            summary["green_kubo"] = json!(gk);
            let rel = (s.variance_slope - gk.d2).abs() / gk.d2;
            if let Some(lim) = assertion(block, "variance_rel_tol") {
                report.check(&label, "variance_rel_tol", rel, lim, rel <= lim);
            }
            if let Some(k) = assertion(block, "hitting_sigmas") {
                let z = (s.p_lower - s.p_lower_bm).abs() / s.p_lower_stderr;
                report.check(&label, "hitting_sigmas", z, k, z <= k);
            }
            if let Some(lim) = assertion(block, "ad_max") {
                report.check(&label, "ad_max", s.anderson_darling, lim, s.anderson_darling <= lim);
            }
        }
        ExperimentKind::Trap(b) => {
            let t = trapping_test(&profile, b.vbar, b.iterations, b.ball_radius, b.ball_points, seed)?;
            let mut csv = String::from("start,phase,v,min_ratio,max_ratio,survived\n");
            let row = |name: &str, r: &TrapRun| {
                format!(
                    "{name},{},{},{},{},{}\n",
                    fmt_f64(r.start.phase),
                    fmt_f64(r.start.v),
                    fmt_f64(r.min_ratio),
                    fmt_f64(r.max_ratio),
                    r.survived
                )
            };
            csv.push_str(&row("center", &t.center));
            for (i, r) in t.ball.iter().enumerate() {
                csv.push_str(&row(&format!("ball{i}"), r));
            }
            report.write(out, &format!("{label}.csv"), &csv)?;
            summary["delta1"] = json!(params.delta1);
            summary["result"] = json!({
                "vbar": t.vbar, "action": t.action, "tau": t.tau,
                "min_ratio": t.min_ratio, "max_ratio": t.max_ratio, "survived": t.survived,
            });
            if let Some(v) = assertion(block, "survive") {
                if v >= 0.5 {
                    report.check(&label, "survive", t.survived as u8 as f64, 1.0, t.survived);
                }
            }
        }
        ExperimentKind::MeasureDecay(b) => {
            let start = match b.trap_vbar {
                Some(vbar) => Some(elliptic_center(&profile, vbar)?.state),
                None => None,
            };
            let d = escape_measure_decay(&profile, b.v0, b.c, &b.budgets, b.trials, seed, start)?;
            let mut csv = String::from("budget,fraction,stderr,trials\n");
            for p in &d.points {
                csv.push_str(&format!("{},{},{},{}\n", p.budget, fmt_f64(p.fraction), fmt_f64(p.stderr), p.trials));
            }
            report.write(out, &format!("{label}.csv"), &csv)?;
            summary["result"] = json!(d);
            if let Some(k) = assertion(block, "ratio_sigmas") {
                let target = std::f64::consts::FRAC_1_SQRT_2;
                let worst = d
                    .ratios
                    .iter()
                    .map(|(r, se)| (r - target).abs() / se)
                    .fold(0.0, f64::max);
                report.check(&label, "ratio_sigmas", worst, k, worst <= k);
            }
            if let Some(lim) = assertion(block, "min_fraction") {
                let lowest = d.points.iter().map(|p| p.fraction).fold(1.0, f64::min);
                report.check(&label, "min_fraction", lowest, lim, lowest >= lim);
            }
        }
        ExperimentKind::ResidualFit(b) => {
            let f = residual_order_fit(&profile, &b.i_grid, b.samples, seed)?;
            let mut csv = String::from("I,samples,vs_fhat,vs_corrected,tau\n");
            for r in &f.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(r.action),
                    r.samples,
                    fmt_f64(r.vs_fhat),
                    fmt_f64(r.vs_corrected),
                    fmt_f64(r.tau)
                ));
            }
            report.write(out, &format!("{label}.csv"), &csv)?;
            summary["delta1"] = json!(params.delta1);
            summary["slopes"] = json!({
                "vs_fhat": f.slope_fhat, "vs_corrected": f.slope_corrected, "tau": f.slope_tau,
            });
            let tol = assertion(block, "slope_tol").unwrap_or(0.3);
            if let Some(want) = assertion(block, "slope_fhat") {
                let err = (f.slope_fhat - want).abs();
                report.check(&label, "slope_fhat", f.slope_fhat, want, err <= tol);
            }
            if let Some(want) = assertion(block, "slope_corrected") {
                let err = (f.slope_corrected - want).abs();
                report.check(&label, "slope_corrected", f.slope_corrected, want, err <= tol);
            }
        }
        ExperimentKind::Diffusion(b) => {
            let delta = b.delta.unwrap_or(params.delta);
            let gk = green_kubo_d2(delta, b.gk_terms, b.gk_samples, seed)?;
            let direct = direct_variance_slope(delta, b.direct_steps, b.direct_orbits, seed ^ 0x5eed);
            let slope = direct.variance() / b.direct_steps as f64;
            summary["delta"] = json!(delta);
            summary["green_kubo"] = json!(gk);
            summary["direct"] = json!({
                "steps": b.direct_steps, "orbits": b.direct_orbits,
                "variance_slope": slope,
                "stderr": slope * (2.0 / b.direct_orbits as f64).sqrt(),
            });
            let rel = (gk.d2 - slope).abs() / slope;
            if let Some(lim) = assertion(block, "rel_tol") {
                report.check(&label, "rel_tol", rel, lim, rel <= lim);
            }
            if b.mixing_steps > 0 {
                let m = mixing_proxy(delta, b.mixing_steps, b.max_lag, b.lag_floor, seed);
                let mut csv = String::from("lag,rho\n");
                for (k, r) in m.autocorrelation.iter().enumerate() {
                    csv.push_str(&format!("{k},{}\n", fmt_f64(*r)));
                }
                report.write(out, &format!("{label}_autocorrelation.csv"), &csv)?;
                if let Some(lim) = assertion(block, "rho_max") {
                    report.check(&label, "rho_max", m.max_tail_rho, lim, m.max_tail_rho <= lim);
                }
                if let Some(k) = assertion(block, "birkhoff_sigmas") {
                    let bound = k / (m.steps as f64).sqrt();
                    report.check(&label, "birkhoff_sigmas", m.birkhoff_cos.abs(), bound, m.birkhoff_cos.abs() <= bound);
                }
                summary["mixing"] = json!(m);
            }
        }
        ExperimentKind::Orbits(b) => {
            let delta = b.delta.unwrap_or(params.delta);
            let (orbits, exact) = orbit_search_auto(delta, b.n_max)?;
            report.write(out, &format!("{label}.jsonl"), &orbits_to_jsonl(&orbits))?;
            summary["delta"] = json!(delta);
            summary["exact_arithmetic"] = json!(exact);
            summary["count"] = json!(orbits.len());
            if let Some(lim) = assertion(block, "min_orbits") {
                report.check(&label, "min_orbits", orbits.len() as f64, lim, orbits.len() as f64 >= lim);
            }
        }
        ExperimentKind::Windows(b) => {
            let mut all = Vec::new();
            for n in 1..=b.n_max {
                all.extend(window_scan(n, b.step * PI)?);
            }
            report.write(out, &format!("{label}.csv"), &windows_to_csv(&all))?;
            let mut csv = String::from("N,kind,theta_lo_over_pi,theta_hi_over_pi\n");
            for w in &all {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    w.period,
                    serde_json::to_value(w.kind).expect("kind").as_str().unwrap_or(""),
                    fmt_f64(w.theta_lo / PI),
                    fmt_f64(w.theta_hi / PI)
                ));
            }
            report.write(out, &format!("{label}_over_pi.csv"), &csv)?;
            summary["count"] = json!(all.len());
            if let Some(lim) = assertion(block, "min_windows") {
                report.check(&label, "min_windows", all.len() as f64, lim, all.len() as f64 >= lim);
            }
        }
        ExperimentKind::ReturnFit(b) => {
            let map = ReturnMap::new(&profile);
            let pts: Vec<(f64, f64)> = b
                .actions
                .iter()
                .flat_map(|&a| (0..b.taus).map(move |k| ((k as f64 + 0.5) / b.taus as f64, a)))
                .collect();
            let rows = return_scan(&map, &pts)?;
            let mut csv = String::from("tau,I,tau_next,I_next,steps,fhat_tau,fhat_I,action_error\n");
            let mut worst: f64 = 0.0;
            for r in &rows {
                let pred = fhat(TorusPoint::new(r.tau, r.action), params.delta);
                let err = r.action_next - pred.lifted();
                if pred.tau > 0.02 && pred.tau < 0.98 {
                    worst = worst.max(err.abs());
                }
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    fmt_f64(r.tau),
                    fmt_f64(r.action),
                    fmt_f64(r.tau_next),
                    fmt_f64(r.action_next),
                    r.steps,
                    fmt_f64(pred.tau),
                    fmt_f64(pred.lifted()),
                    fmt_f64(err)
                ));
            }
            report.write(out, &format!("{label}.csv"), &csv)?;
            summary["max_action_error"] = json!(worst);
            summary["J_at_strip_edge"] = json!(b.actions.iter().map(|&a| adiabatic_j_at(&profile, 0.0, a)).collect::<Vec<_>>());
            if let Some(lim) = assertion(block, "max_action_error") {
                report.check(&label, "max_action_error", worst, lim, worst <= lim);
            }
        }
    }
    report.write(out, &format!("{label}.json"), &pretty(&summary))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_and_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml(
            "[profile]\nfamily = \"quadratic\"\nA = -1.0\nB = 1.0\n[params.sweep_a]\nfrom = -3.99\nto = 1.0\nstep = 0.01\n",
        )
        .unwrap();
        let r = cmd_params(&cfg, dir.path()).unwrap();
        assert_eq!(r.files.len(), 3);
        let js = std::fs::read_to_string(dir.path().join("params.json")).unwrap();
        assert!(js.contains("\"Elliptic\""));
        let csv = std::fs::read_to_string(dir.path().join("delta_curve.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 500);
    }
}
