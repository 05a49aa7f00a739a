use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pingpong");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const ORBITS: &str = r#"
seed = 5

[profile]
family = "quadratic"
A = 1.0

[[experiment]]
kind = "orbits"
delta = 3.0
n_max = 2
"#;

#[test]
fn params_writes_constants_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[profile]\nfamily = \"quadratic\"\nA = -1.0\n");
    let out = dir.path().join("o");
    let o = run(&["params", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("params.json")).unwrap()).unwrap();
    let delta = v["params"]["delta"].as_f64().unwrap();
    assert!((delta - pingpong::delta_closed_form(-1.0).unwrap()).abs() < 1e-9);
    assert_eq!(v["params"]["regime"], "Elliptic");
    assert!(out.join("config.toml").exists());
}

#[test]
fn sweep_flag_produces_delta_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[profile]\nfamily = \"quadratic\"\nA = 1.0\n");
    let out = dir.path().join("o");
    let o = run(&["params", "--config", &cfg, "--out", out.to_str().unwrap(), "--sweep-A", "-1,1,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("delta_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "A,J,delta,delta1,regime");
    assert_eq!(lines.count(), 5);
}

#[test]
fn passing_assertions_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ORBITS}[experiment.assert]\nmin_orbits = 3\n"));
    let o = run(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn failing_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ORBITS}[experiment.assert]\nmin_orbits = 1000\n"));
    let o = run(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let cases = [
        "[profile]\nfamily = \"quadratic\"\nA = 1.0\nbogus = 2\n",
        "[profile]\nfamily = \"quadratic\"\nA = -5.0\n",
        "[profile]\nfamily = \"cubic\"\n",
        "seed = \"x\"\n[profile]\nfamily = \"sine\"\namplitude = 0.1\n",
        &format!("{ORBITS}[experiment.assert]\nnot_a_key = 1\n"),
    ];
    for body in cases {
        let cfg = write_config(dir.path(), body);
        let o = run(&["run", "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = write_config(dir.path(), "[profile]\nfamily = \"quadratic\"\nA = 1.0\n");
    assert_eq!(run(&["run", "--config", &cfg, "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["portrait", "--config", &cfg, "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["params", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["params", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
seed = 11

[profile]
family = "quadratic"
A = 1.0

[[experiment]]
kind = "escape"
v0 = 20.0
C = 4.0
trials = 24
budget = 800

[[experiment]]
kind = "diffusion"
gk_terms = 10
gk_samples = 5000
direct_steps = 50
direct_orbits = 5000
"#;
    let cfg = write_config(dir.path(), body);
    let mut dumps = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("w{w}"));
        let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", w]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        dumps.push(files.iter().map(|f| (f.file_name().unwrap().to_owned(), fs::read(f).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(dumps[0], dumps[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let body = "seed = 1\n[profile]\nfamily = \"quadratic\"\nA = 1.0\n[[experiment]]\nkind = \"escape\"\nv0 = 20.0\nC = 4.0\ntrials = 8\nbudget = 400\n";
    let cfg = write_config(dir.path(), body);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "2"]).status.code(), Some(0));
    let ra = fs::read_to_string(a.join("config.toml")).unwrap();
    let rb = fs::read_to_string(b.join("config.toml")).unwrap();
    assert!(ra.contains("seed = 1") && rb.contains("seed = 2"));
}

#[test]
fn portrait_of_sawtooth_stays_on_torus() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[profile]\nfamily = \"quadratic\"\nA = 1.0\n[portrait]\nmap = \"sawtooth\"\nseeds = 2\niterations = 100\n";
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("o");
    let o = run(&["portrait", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("portrait.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 101);
    for r in rows {
        let f: Vec<f64> = r.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        assert!((0.0..1.0).contains(&f[0]) && (0.0..1.0).contains(&f[1]));
    }
}
