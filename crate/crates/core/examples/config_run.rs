//! Drives the config front end from code, as the `pingpong run` command does.

use pingpong::config::RunConfig;
use pingpong::runner::cmd_run;

const CONFIG: &str = r#"
seed = 2

[profile]
family = "quadratic"
A = -1.0

[[experiment]]
kind = "orbits"
delta = 1.0
n_max = 4
[experiment.assert]
min_orbits = 1
"#;

fn main() -> pingpong::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    cfg.validate()?;
    let out = std::env::temp_dir().join("pingpong-config-run");
    let report = cmd_run(&cfg, &out)?;
    for c in &report.checks {
        println!("{}/{} = {} (limit {}) {}", c.experiment, c.name, c.value, c.limit, if c.pass { "PASS" } else { "FAIL" });
    }
    println!("outputs in {}", out.display());
    Ok(())
}
