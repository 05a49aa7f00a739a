//! Run configuration.
//!
//! A config is a TOML file: top-level keys, a `[profile]` table, optional
//! `[params]`, `[portrait]` and `[tolerances]` tables, and any number of
//! `[[experiment]]` blocks, each with an optional `[experiment.assert]`
//! table. Unknown keys are rejected. See the README for the grammar.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal_form::PortraitMap;
use crate::wall::ProfileSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Execution settings; left out of the resolved config since they do
    /// not change any result.
    #[serde(default, skip_serializing)]
    pub out: Option<String>,
    /// 0 means one worker per core.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portrait: Option<PortraitBlock>,
    #[serde(default, rename = "experiment", skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentBlock>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance of whole-period integrals.
    #[serde(default = "default_quad")]
    pub quadrature: f64,
    /// Flight-time solver tolerance for the physical portrait.
    #[serde(default = "default_flight")]
    pub flight: f64,
}

fn default_quad() -> f64 {
    crate::quadrature::DEFAULT_TOL
}

fn default_flight() -> f64 {
    crate::collision::DEFAULT_FLIGHT_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quadrature: default_quad(),
            flight: default_flight(),
        }
    }
}

/// Grid of the quadratic coefficient `A` for the Δ-curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepA {
    pub from: f64,
    pub to: f64,
    pub step: f64,
    #[serde(rename = "B", default = "one")]
    pub b: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_a: Option<SweepA>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitBlock {
    pub map: PortraitMap,
    pub seeds: usize,
    pub iterations: usize,
    /// Overrides the profile's Δ for the model maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    /// Base action for the corrected map.
    #[serde(rename = "I_abs", default, skip_serializing_if = "Option::is_none")]
    pub i_abs: Option<f64>,
    /// Velocity window `[lo, hi]` of the physical portrait.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_window: Option<[f64; 2]>,
}

/// One `[[experiment]]` block. Unknown keys are caught by the kind blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub kind: ExperimentKind,
    #[serde(default, rename = "assert", skip_serializing_if = "BTreeMap::is_empty")]
    pub assertions: BTreeMap<String, f64>,
}

impl ExperimentBlock {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    Escape(EscapeBlock),
    Clt(CltBlock),
    Trap(TrapBlock),
    MeasureDecay(DecayBlock),
    ResidualFit(ResidualBlock),
    Diffusion(DiffusionBlock),
    Orbits(OrbitsBlock),
    Windows(WindowsBlock),
    ReturnFit(ReturnFitBlock),
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Escape(_) => "escape",
            ExperimentKind::Clt(_) => "clt",
            ExperimentKind::Trap(_) => "trap",
            ExperimentKind::MeasureDecay(_) => "measure-decay",
            ExperimentKind::ResidualFit(_) => "residual-fit",
            ExperimentKind::Diffusion(_) => "diffusion",
            ExperimentKind::Orbits(_) => "orbits",
            ExperimentKind::Windows(_) => "windows",
            ExperimentKind::ReturnFit(_) => "return-fit",
        }
    }

    /// Assertion keys this kind understands.
    pub fn assertion_keys(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Escape(_) => &["ks_max", "min_returned"],
            ExperimentKind::Clt(_) => &["variance_rel_tol", "hitting_sigmas", "ad_max"],
            ExperimentKind::Trap(_) => &["survive"],
            ExperimentKind::MeasureDecay(_) => &["ratio_sigmas", "min_fraction"],
            ExperimentKind::ResidualFit(_) => &["slope_fhat", "slope_corrected", "slope_tol"],
            ExperimentKind::Diffusion(_) => &["rel_tol", "rho_max", "birkhoff_sigmas"],
            ExperimentKind::Orbits(_) => &["min_orbits"],
            ExperimentKind::Windows(_) => &["min_windows"],
            ExperimentKind::ReturnFit(_) => &["max_action_error"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeBlock {
    pub v0: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    pub trials: usize,
    /// Periods.
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltBlock {
    pub v0: f64,
    pub a: f64,
    pub b: f64,
    pub trials: usize,
    #[serde(default = "default_t_test")]
    pub t_test: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_gk_terms")]
    pub gk_terms: usize,
    #[serde(default = "default_gk_samples")]
    pub gk_samples: usize,
}

fn default_t_test() -> f64 {
    0.1
}
fn default_sample_dt() -> f64 {
    0.01
}
fn default_t_max() -> f64 {
    50.0
}
fn default_gk_terms() -> usize {
    60
}
fn default_gk_samples() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    pub vbar: f64,
    pub iterations: u64,
    #[serde(default = "default_ball_radius")]
    pub ball_radius: f64,
    #[serde(default = "default_ball_points")]
    pub ball_points: usize,
}

fn default_ball_radius() -> f64 {
    1e-3
}
fn default_ball_points() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayBlock {
    pub v0: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Periods, strictly increasing.
    pub budgets: Vec<u64>,
    pub trials: usize,
    /// Start every trial at the elliptic center near this velocity instead
    /// of at a random phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_vbar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualBlock {
    #[serde(rename = "I_grid")]
    pub i_grid: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_gk_terms")]
    pub gk_terms: usize,
    #[serde(default = "default_gk_samples")]
    pub gk_samples: usize,
    pub direct_steps: usize,
    pub direct_orbits: usize,
    #[serde(default)]
    pub mixing_steps: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_lag_floor")]
    pub lag_floor: usize,
}

fn default_max_lag() -> usize {
    60
}
fn default_lag_floor() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsBlock {
    pub n_max: usize,
    /// θ step in units of π.
    #[serde(default = "default_theta_step")]
    pub step: f64,
}

fn default_theta_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnFitBlock {
    /// Action levels.
    pub actions: Vec<f64>,
    /// Equally spaced τ samples per level.
    pub taus: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The resolved config, as written next to every output.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        self.profile.build()?;
        let t = self.tolerances;
        if !(t.quadrature > 0.0 && t.flight > 0.0) {
            return Err(bad("tolerances must be positive"));
        }
        if let Some(ParamsBlock { sweep_a: Some(s) }) = self.params {
            if !(s.step > 0.0 && s.to > s.from) {
                return Err(bad("sweep_a needs from < to and step > 0"));
            }
        }
        if let Some(p) = &self.portrait {
            if p.seeds == 0 || p.iterations == 0 {
                return Err(bad("portrait needs seeds and iterations > 0"));
            }
            if p.map == PortraitMap::Physical && p.v_window.map_or(false, |w| !(0.0 < w[0] && w[0] < w[1])) {
                return Err(bad("v_window must be an increasing pair of positive velocities"));
            }
            if p.map == PortraitMap::Corrected && p.i_abs.map_or(false, |i| !(i > 0.0)) {
                return Err(bad("I_abs must be positive"));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for e in &self.experiments {
            if !names.insert(e.label()) {
                return Err(bad(&format!("duplicate experiment name {:?}", e.label())));
            }
            let keys = e.kind.assertion_keys();
            for k in e.assertions.keys() {
                if !keys.contains(&k.as_str()) {
                    return Err(bad(&format!(
                        "experiment {:?}: unknown assertion {k:?} (known: {})",
                        e.label(),
                        keys.join(", ")
                    )));
                }
            }
            e.kind.validate().map_err(|m| bad(&format!("experiment {:?}: {m}", e.label())))?;
        }
        Ok(())
    }
}

fn bad(msg: &str) -> Error {
    Error::InvalidArgument(format!("config: {msg}"))
}

impl ExperimentKind {
    fn validate(&self) -> std::result::Result<(), String> {
        let positive = |name: &str, x: f64| if x > 0.0 { Ok(()) } else { Err(format!("{name} must be positive")) };
        let nonzero = |name: &str, x: usize| if x > 0 { Ok(()) } else { Err(format!("{name} must be > 0")) };
        match self {
            ExperimentKind::Escape(b) => {
                positive("C", b.c)?;
                if b.v0 <= b.c {
                    return Err("v0 must exceed C".into());
                }
                if let Some(m) = b.v_max {
                    if m <= b.v0 {
                        return Err("v_max must exceed v0".into());
                    }
                }
                nonzero("trials", b.trials)?;
                nonzero("budget", b.budget as usize)
            }
            ExperimentKind::Clt(b) => {
                if !(0.0 < b.a && b.a < 1.0 && 1.0 < b.b) {
                    return Err("need 0 < a < 1 < b".into());
                }
                if b.v0 < 50.0 {
                    return Err("v0 must be at least 50".into());
                }
                nonzero("trials", b.trials)?;
                positive("t_test", b.t_test)?;
                positive("sample_dt", b.sample_dt)?;
                positive("t_max", b.t_max)
            }
            ExperimentKind::Trap(b) => {
                positive("vbar", b.vbar)?;
                nonzero("iterations", b.iterations as usize)?;
                positive("ball_radius", b.ball_radius)
            }
            ExperimentKind::MeasureDecay(b) => {
                positive("C", b.c)?;
                if b.v0 <= b.c {
                    return Err("v0 must exceed C".into());
                }
                if b.budgets.is_empty() || b.budgets.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("budgets must be non-empty and increasing".into());
                }
                nonzero("trials", b.trials)
            }
            ExperimentKind::ResidualFit(b) => {
                let lo = b.i_grid.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = b.i_grid.iter().copied().fold(0.0, f64::max);
                if b.i_grid.len() < 3 || !(lo > 0.0) || hi / lo < 99.999 {
                    return Err("I_grid must have 3+ positive levels spanning two decades".into());
                }
                nonzero("samples", b.samples)
            }
            ExperimentKind::Diffusion(b) => {
                nonzero("gk_terms", b.gk_terms)?;
                nonzero("gk_samples", b.gk_samples)?;
                nonzero("direct_steps", b.direct_steps)?;
                nonzero("direct_orbits", b.direct_orbits)?;
                if b.mixing_steps > 0 && b.lag_floor > b.max_lag {
                    return Err("lag_floor must not exceed max_lag".into());
                }
                Ok(())
            }
            ExperimentKind::Orbits(b) => {
                if !(1..=12).contains(&b.n_max) {
                    return Err("n_max must be in 1..=12".into());
                }
                Ok(())
            }
            ExperimentKind::Windows(b) => {
                if !(1..=12).contains(&b.n_max) {
                    return Err("n_max must be in 1..=12".into());
                }
                positive("step", b.step)
            }
            ExperimentKind::ReturnFit(b) => {
                if b.actions.is_empty() || b.actions.iter().any(|a| !(*a > 0.0)) {
                    return Err("actions must be positive".into());
                }
                nonzero("taus", b.taus)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
[profile]
family = "quadratic"
A = 1.0
B = 1.0

[[experiment]]
kind = "escape"
v0 = 100.0
C = 5.0
trials = 10
budget = 1000
[experiment.assert]
ks_max = 0.05

[[experiment]]
kind = "orbits"
delta = 3.0
n_max = 1
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.experiments.len(), 2);
        assert_eq!(c.experiments[0].kind.as_str(), "escape");
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_unknown_and_missing_keys() {
        let typo = SAMPLE.replace("trials = 10", "trails = 10");
        assert!(RunConfig::from_toml(&typo).is_err());
        let missing = SAMPLE.replace("budget = 1000", "");
        assert!(RunConfig::from_toml(&missing).is_err());
        let bad_assert = SAMPLE.replace("ks_max", "ks_mux");
        assert!(RunConfig::from_toml(&bad_assert).is_err());
        let bad_kind = SAMPLE.replace("kind = \"orbits\"", "kind = \"orbitz\"");
        assert!(RunConfig::from_toml(&bad_kind).is_err());
    }

    #[test]
    fn semantic_checks() {
        let c = SAMPLE.replace("C = 5.0", "C = 500.0");
        assert!(RunConfig::from_toml(&c).is_err());
        let c = SAMPLE.replace("A = 1.0", "A = -5.0");
        assert!(RunConfig::from_toml(&c).is_err());
    }
}
