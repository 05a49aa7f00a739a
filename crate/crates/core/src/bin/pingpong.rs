use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pingpong::config::{ParamsBlock, RunConfig, SweepA};
use pingpong::runner::{cmd_params, cmd_portrait, cmd_run, RunReport};

const KEYS: &str = "\
Config keys (TOML):
  top level     seed, out, workers                     (all optional)
  [profile]     family = quadratic: A, B | sine: amplitude | spline: knots, ddl_plus, ddl_minus
  [tolerances]  quadrature, flight                     (optional)
  [params]      sweep_a = { from, to, step, B }        (optional)
  [portrait]    map (sawtooth|fhat|corrected|physical), seeds, iterations;
                optional delta, delta1, I_abs, v_window
  [[experiment]] kind, optional name, seed, and [experiment.assert]:
    escape         v0, C, trials, budget; optional v_max     assert: ks_max, min_returned
    clt            v0, a, b, trials; optional t_test, sample_dt, t_max, gk_terms, gk_samples
                                                             assert: variance_rel_tol, hitting_sigmas, ad_max
    trap           vbar, iterations; optional ball_radius, ball_points
                                                             assert: survive
    measure-decay  v0, C, budgets, trials; optional trap_vbar
                                                             assert: ratio_sigmas, min_fraction
    residual-fit   I_grid, samples                           assert: slope_fhat, slope_corrected, slope_tol
    diffusion      direct_steps, direct_orbits; optional delta, gk_terms, gk_samples,
                   mixing_steps, max_lag, lag_floor          assert: rel_tol, rho_max, birkhoff_sigmas
    orbits         n_max; optional delta                     assert: min_orbits
    windows        n_max; optional step (units of pi)        assert: min_windows
    return-fit     actions, taus                             assert: max_action_error

Exit codes: 0 success, 1 assertion or run failure, 2 config error.";

#[derive(Parser)]
#[command(name = "pingpong", version, about = "Fermi-Ulam ping pong: exact simulation and normal-form analysis", after_help = KEYS)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core (overrides `workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Quadrature tolerance (overrides `tolerances.quadrature`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-form constants (params.json), optionally the Δ-curve of the quadratic family.
    Params {
        /// Sweep A over FROM,TO,STEP and write delta_curve.csv.
        #[arg(long = "sweep-A", alias = "sweep-a", value_name = "FROM,TO,STEP", allow_hyphen_values = true)]
        sweep_a: Option<String>,
    },
    /// Phase-portrait point cloud (portrait.csv).
    Portrait,
    /// Run every [[experiment]] block and evaluate its assertions.
    Run,
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let path = cli.config.as_ref().ok_or("--config is required")?;
    let mut cfg = RunConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(t) = cli.tol {
        cfg.tolerances.quadrature = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.display().to_string());
    }
    if let Command::Params { sweep_a: Some(raw) } = &cli.command {
        let v: Vec<f64> = raw
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("--sweep-A expects FROM,TO,STEP, got {raw}"))?;
        if v.len() != 3 {
            return Err(format!("--sweep-A expects FROM,TO,STEP, got {raw}"));
        }
        let b = cfg.params.and_then(|p| p.sweep_a).map_or(1.0, |s| s.b);
        cfg.params = Some(ParamsBlock {
            sweep_a: Some(SweepA { from: v[0], to: v[1], step: v[2], b }),
        });
    }
    cfg.validate().map_err(|e| e.to_string())?;
    match cli.command {
        Command::Portrait if cfg.portrait.is_none() => Err("config: portrait needs a [portrait] table".into()),
        Command::Run if cfg.experiments.is_empty() => Err("config: run needs at least one [[experiment]]".into()),
        _ => Ok(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "out".into()));
    let result = pingpong::rng::with_workers(cfg.workers, || match cli.command {
        Command::Params { .. } => cmd_params(&cfg, &out),
        Command::Portrait => cmd_portrait(&cfg, &out),
        Command::Run => cmd_run(&cfg, &out),
    });
    let report: RunReport = match result.and_then(|r| r) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    for c in &report.checks {
        println!(
            "{} {}/{}: {} (limit {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.experiment,
            c.name,
            c.value,
            c.limit
        );
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
