//! Run configuration: one JSON document per experiment, with command-line
//! overrides layered on top.
//!
//! Precedence, highest first: command-line flags, the config file, the
//! built-in defaults (the Fig.-3 style setup on `paper-example`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CoordSystem, EscParams};
use crate::error::{Error, Result};
use crate::integrator::IntegrationSpec;
use crate::quadrature::QuadratureSpec;
use crate::scalar_maps::MapRegistry;
use crate::stability::GridSpec;

/// Integration settings as written in a config; `dt` defaults to
/// `(2π/ω)/200` when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    32
}

impl IntegrationConfig {
    pub fn resolve(&self, omega: f64) -> IntegrationSpec {
        let default = IntegrationSpec::for_dither(omega, self.t_final, self.record_every);
        IntegrationSpec { dt: self.dt.unwrap_or(default.dt), ..default }
    }
}

/// Grid of `θ̄` values for `average-table`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for LineGrid {
    fn default() -> Self {
        LineGrid { lo: -3.0, hi: 3.0, n: 61 }
    }
}

impl LineGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64).collect()
    }
}

/// Settings for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub omegas: Vec<f64>,
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: f64,
}

fn default_target_radius() -> f64 {
    0.1
}

fn default_steps_per_period() -> f64 {
    IntegrationSpec::STEPS_PER_PERIOD
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { omegas: vec![5.0, 10.0, 20.0, 40.0], target_radius: default_target_radius(), steps_per_period: default_steps_per_period() }
    }
}

/// Settings for `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    /// Maps checked by the proposition suite.
    pub maps: Vec<String>,
    pub amplitudes: Vec<f64>,
    pub grid: LineGrid,
    pub fd_points: usize,
    pub consistency_states: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            maps: vec!["paper-example".into(), "quartic".into()],
            amplitudes: vec![0.1, 0.5, 1.0],
            grid: LineGrid::default(),
            fd_points: 100,
            consistency_states: 50,
            seed: 20_240_601,
        }
    }
}

/// Options consumed by individual commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandOptions {
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_equilibrium_tol")]
    pub equilibrium_tol: f64,
    /// Thresholds on `|θ̂ − θ̄*|` whose settling times `simulate` reports.
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub table: LineGrid,
    #[serde(default)]
    pub lyapunov_grid: GridSpec,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    /// Also write an SVG plot next to each trajectory CSV.
    #[serde(default)]
    pub svg: bool,
}

fn default_equilibrium_tol() -> f64 {
    1e-12
}

fn default_thresholds() -> Vec<f64> {
    vec![1e-2, 1e-3]
}

impl Default for CommandOptions {
    fn default() -> Self {
        CommandOptions {
            quadrature: QuadratureSpec::default(),
            equilibrium_tol: default_equilibrium_tol(),
            thresholds: default_thresholds(),
            table: LineGrid::default(),
            lyapunov_grid: GridSpec::default(),
            sweep: SweepOptions::default(),
            verify: VerifyOptions::default(),
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub map: String,
    #[serde(default = "default_coords")]
    pub coords: CoordSystem,
    pub params: EscParams,
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub initial_states: Vec<Vec<f64>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub options: CommandOptions,
}

fn default_coords() -> CoordSystem {
    CoordSystem::Full
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            description: None,
            map: "paper-example".into(),
            coords: CoordSystem::Full,
            params: EscParams::new(0.5, 10.0, 0.001, 0.001).expect("default parameters are valid"),
            integration: IntegrationConfig { dt: None, t_final: 1e4, record_every: default_record_every() },
            initial_states: vec![vec![1.0, 5.0 / 6.0], vec![1.0, 5.0 / 3.0]],
            out: default_out(),
            options: CommandOptions::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub map: Option<String>,
    pub coords: Option<CoordSystem>,
    pub out: Option<PathBuf>,
    pub a: Option<f64>,
    pub omega: Option<f64>,
    pub k: Option<f64>,
    pub omega_l: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
}

fn config_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { location: location.into(), message: message.into() }
}

impl RunConfig {
    /// Parses a JSON document, reporting the failing field path and line.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let location = if path == "." { format!("line {}", inner.line()) } else { format!("`{path}` (line {})", inner.line()) };
            config_error(location, inner.to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { location, message } => config_error(format!("{}: {location}", path.display()), message),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = &o.map {
            self.map = m.clone();
        }
        if let Some(c) = o.coords {
            self.coords = c;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(a) = o.a {
            self.params.dither.amplitude = a;
        }
        if let Some(w) = o.omega {
            self.params.dither.omega = w;
        }
        if let Some(k) = o.k {
            self.params.k = k;
        }
        if let Some(l) = o.omega_l {
            self.params.omega_l = l;
        }
        if let Some(dt) = o.dt {
            self.integration.dt = Some(dt);
        }
        if let Some(t) = o.t_final {
            self.integration.t_final = t;
        }
    }

    /// Checks every invariant, naming the offending field.
    pub fn validate(&self, registry: &MapRegistry) -> Result<()> {
        registry.get(&self.map).map_err(|e| config_error("map", e.to_string()))?;
        let p = &self.params;
        if p.dither.amplitude == 0.0 || !p.dither.amplitude.is_finite() {
            return Err(config_error("params.a", "dither amplitude must be finite and nonzero"));
        }
        for (name, v) in [("params.omega", p.dither.omega), ("params.k", p.k), ("params.omega_l", p.omega_l)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_error(name, format!("must be positive and finite, got {v}")));
            }
        }
        let spec = self.integration_spec();
        if let Some(dt) = self.integration.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(config_error("integration.dt", format!("must be positive, got {dt}")));
            }
        }
        if !(spec.t_final > 0.0) || !spec.t_final.is_finite() {
            return Err(config_error("integration.t_final", format!("must be positive, got {}", spec.t_final)));
        }
        if spec.record_every == 0 {
            return Err(config_error("integration.record_every", "must be at least 1"));
        }
        if self.coords.is_full() {
            let limit = p.dither.period() / IntegrationSpec::MIN_STEPS_PER_PERIOD;
            if spec.dt > limit {
                return Err(config_error(
                    "integration.dt",
                    format!("{} does not resolve the dither; need at most {limit}", spec.dt),
                ));
            }
        }
        let dim = self.coords.dim();
        for (i, x) in self.initial_states.iter().enumerate() {
            let loc = format!("initial_states[{i}]");
            if x.len() != dim {
                return Err(config_error(loc, format!("expected {dim} components for `{}`, got {}", self.coords, x.len())));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(config_error(loc, "components must be finite"));
            }
            if let Some(g) = self.coords.guard() {
                if !(x[g] > 0.0) {
                    return Err(config_error(loc, format!("Gamma_hat must be positive, got {}", x[g])));
                }
            }
        }
        let o = &self.options;
        if !matches!(o.quadrature.n_nodes, n if n >= 16 && n.is_power_of_two()) {
            return Err(config_error("options.quadrature.n_nodes", "must be a power of two, at least 16"));
        }
        if !(o.equilibrium_tol > 0.0) {
            return Err(config_error("options.equilibrium_tol", "must be positive"));
        }
        if o.thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(config_error("options.thresholds", "must be positive"));
        }
        if o.table.n == 0 || !(o.table.hi >= o.table.lo) {
            return Err(config_error("options.table", "need n >= 1 and lo <= hi"));
        }
        o.lyapunov_grid.validate().map_err(|e| config_error("options.lyapunov_grid", e.to_string()))?;
        if o.sweep.omegas.iter().any(|w| !(*w > 0.0)) || o.sweep.omegas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(config_error("options.sweep.omegas", "must be positive and strictly ascending"));
        }
        for (i, m) in o.verify.maps.iter().enumerate() {
            registry.get(m).map_err(|e| config_error(format!("options.verify.maps[{i}]"), e.to_string()))?;
        }
        if o.verify.amplitudes.iter().any(|a| *a == 0.0 || !a.is_finite()) {
            return Err(config_error("options.verify.amplitudes", "must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn integration_spec(&self) -> IntegrationSpec {
        self.integration.resolve(self.params.dither.omega)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate(&MapRegistry::default()).unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        let spec = cfg.integration_spec();
        assert!((spec.dt - std::f64::consts::PI / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn minimal_document() {
        let cfg = RunConfig::from_json(
            r#"{"map": "quadratic", "params": {"a": 0.5, "omega": 10, "k": 1, "omega_l": 1},
                "integration": {"t_final": 5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.coords, CoordSystem::Full);
        assert_eq!(cfg.integration.record_every, 32);
        assert!(cfg.initial_states.is_empty());
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = RunConfig::from_json(
            "{\"map\": \"quadratic\",\n \"params\": {\"a\": 0.5, \"omega\": \"fast\", \"k\": 1, \"omega_l\": 1},\n \"integration\": {\"t_final\": 5}}",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("params") && msg.contains("line 2"), "{msg}");
        let err = RunConfig::from_json(r#"{"map": "quadratic", "param": {}}"#).unwrap_err();
        assert!(err.to_string().contains("param"), "{err}");
    }

    #[test]
    fn validation_names_the_field() {
        let reg = MapRegistry::default();
        let mut cfg = RunConfig::default();
        cfg.initial_states.push(vec![1.0, -0.5]);
        assert!(cfg.validate(&reg).unwrap_err().to_string().contains("initial_states[2]"));

        let mut cfg = RunConfig::default();
        cfg.map = "cubic".into();
        assert!(cfg.validate(&reg).unwrap_err().to_string().contains("quadratic"));

        let mut cfg = RunConfig::default();
        cfg.integration.dt = Some(0.1);
        assert!(cfg.validate(&reg).unwrap_err().to_string().contains("integration.dt"));

        let mut cfg = RunConfig::default();
        cfg.coords = CoordSystem::GescAvg;
        assert!(cfg.validate(&reg).unwrap_err().to_string().contains("expected 1 components"));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides { a: Some(0.25), omega: Some(20.0), dt: Some(1e-3), map: Some("quartic".into()), ..Overrides::default() });
        assert_eq!(cfg.params.a(), 0.25);
        assert_eq!(cfg.params.omega(), 20.0);
        assert_eq!(cfg.integration_spec().dt, 1e-3);
        assert_eq!(cfg.map, "quartic");
        assert_eq!(cfg.params.k, 0.001);
    }
}
