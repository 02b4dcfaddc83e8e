//! Experiment configuration: JSON schema check, typed parsing, semantic
//! validation and hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use bilevel_landweber::diagnostics::ProbeConfig;
use bilevel_landweber::fixture::{Fixture, FixtureSpec};
use bilevel_landweber::lower::LowerConfig;
use bilevel_landweber::upper::{LedgerOptions, LowerStart, StopRule};
use bilevel_landweber::{ActiveSet, Execution, Nonlinearity, ObservationSpec, Parameter, SpaceTimeGrid};

pub const SCHEMA: &str = include_str!("../schema/experiment.schema.json");
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub truth: TruthConfig,
    pub observation: ObservationConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
    pub length: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub nonlinearity: Nonlinearity,
    /// Constant diffusion coefficient of the manufactured truth.
    pub a: f64,
    /// Constant reaction coefficient of the manufactured truth.
    pub c: f64,
    pub a_lower: f64,
    pub active: ActiveSet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConfig {
    /// `u = e^{-t} sin(pi x / length)` with the source that makes it exact.
    #[default]
    Manufactured,
    /// A parameter JSON file; relative paths resolve against the config file.
    Explicit { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationConfig {
    Full,
    /// `count` equispaced snapshots at `m T / count`, or explicit `times`.
    Snapshots {
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
    /// Spatial averages over the given subintervals at every time level.
    Averages {
        intervals: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Bilevel,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub level: Level,
    pub rule: StopRule,
    pub max_iter: usize,
    pub start: LowerStart,
    pub lower: LowerConfig,
    pub ledger: LedgerOptions,
    /// Largest noise level the ledger serves; defaults to the largest delta.
    pub delta_max: Option<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            level: Level::Bilevel,
            rule: StopRule::Posterior,
            max_iter: 2000,
            start: LowerStart::Warm,
            lower: LowerConfig::default(),
            ledger: LedgerOptions::default(),
            delta_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// A configuration that failed one or more checks.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Every schema violation in `value`, as `path: message` lines.
pub fn schema_errors(value: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    validator
        .iter_errors(value)
        .map(|e| {
            let path = e.instance_path().to_string();
            format!("{}: {e}", if path.is_empty() { "/" } else { &path })
        })
        .collect()
}

/// Parse and check a configuration document. `base` resolves relative paths.
pub fn parse(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigErrors> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigErrors(vec![format!("not valid JSON: {e}")]))?;
    let errors = schema_errors(&value);
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| ConfigErrors(vec![e.to_string()]))?;
    if let TruthConfig::Explicit { path } = &mut cfg.truth {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<SpaceTimeGrid, String> {
        let g = self.grid;
        SpaceTimeGrid::new(g.nx, g.nt, g.length, g.t_final).map_err(|e| format!("grid: {e}"))
    }

    pub fn observation_spec(&self, grid: &SpaceTimeGrid) -> Result<ObservationSpec, String> {
        let spec = match &self.observation {
            ObservationConfig::Full => Ok(ObservationSpec::Full),
            ObservationConfig::Snapshots { count, times } => match (count, times) {
                (Some(n), None) => ObservationSpec::equispaced_snapshots(grid, *n),
                (None, Some(t)) => {
                    let spec = ObservationSpec::Snapshots { times: t.clone() };
                    spec.validate(grid).map(|_| spec)
                }
                _ => return Err("observation: give exactly one of `count` and `times`".into()),
            },
            ObservationConfig::Averages { intervals } => {
                let iv: Vec<(f64, f64)> = intervals.iter().map(|w| (w[0], w[1])).collect();
                ObservationSpec::indicator_averages(grid, &iv)
            }
        };
        spec.map_err(|e| format!("observation: {e}"))
    }

    /// Every semantic problem, so a user can fix them in one pass.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let grid = self.grid().map_err(|e| errs.push(e)).ok();
        let m = &self.model;
        if !(m.a_lower > 0.0 && m.a_lower.is_finite()) {
            errs.push(format!("model.a_lower must be positive, got {}", m.a_lower));
        }
        if !(m.a > m.a_lower && m.a.is_finite()) {
            errs.push(format!(
                "model.a = {} violates the ellipticity bound a >= a_lower = {} (strictly above)",
                m.a, m.a_lower
            ));
        }
        if !m.c.is_finite() {
            errs.push("model.c must be finite".into());
        }
        if let Nonlinearity::LipschitzSin { l_phi } = m.nonlinearity {
            if !(l_phi >= 0.0 && l_phi.is_finite()) {
                errs.push(format!("model.nonlinearity.l_phi must be finite and >= 0, got {l_phi}"));
            }
        }
        if m.active.is_empty() {
            errs.push("model.active: at least one component must be active".into());
        }
        if let Some(g) = &grid {
            if let Err(e) = self.observation_spec(g) {
                errs.push(e);
            }
        }
        if let TruthConfig::Explicit { path } = &self.truth {
            if !path.is_file() {
                errs.push(format!("truth.path {} is not a readable file", path.display()));
            }
        }
        if self.noise.deltas.is_empty() {
            errs.push("noise.deltas must not be empty".into());
        }
        for (i, d) in self.noise.deltas.iter().enumerate() {
            if !(d.is_finite() && *d >= 0.0) {
                errs.push(format!("noise.deltas[{i}] must be finite and >= 0, got {d}"));
            }
            if *d == 0.0 && self.scheme.rule == StopRule::Prior {
                errs.push(format!("noise.deltas[{i}] = 0 is incompatible with the prior stopping rule"));
            }
        }
        if self.noise.seeds.is_empty() {
            errs.push("noise.seeds must not be empty".into());
        }
        let s = &self.scheme;
        if let Err(e) = s.lower.validate() {
            errs.push(format!("scheme.lower: {e}"));
        }
        let l = &s.ledger;
        if !(l.step_scale > 0.0 && l.step_scale < 2.0) {
            errs.push(format!("scheme.ledger.step_scale must lie in (0, 2), got {}", l.step_scale));
        }
        if !(l.r_factor > 1.0) {
            errs.push(format!("scheme.ledger.r_factor must exceed 1, got {}", l.r_factor));
        }
        if !(l.rho_factor > 0.0) {
            errs.push(format!("scheme.ledger.rho_factor must be positive, got {}", l.rho_factor));
        }
        if !(l.eps_split > 0.0) {
            errs.push(format!("scheme.ledger.eps_split must be positive, got {}", l.eps_split));
        }
        for (name, v) in [
            ("step", l.step),
            ("r0", l.r0),
            ("r", l.r),
            ("c_coe", l.c_coe),
            ("tau", l.tau),
            ("delta_bar", l.delta_bar),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    errs.push(format!("scheme.ledger.{name} must be positive when given, got {v}"));
                }
            }
        }
        if let Some(c) = l.c_tc {
            if !(c > 0.0 && c < 1.0) {
                errs.push(format!("scheme.ledger.c_tc must lie in (0, 1), got {c}"));
            }
        }
        if let Some(d) = s.delta_max {
            if !(d >= 0.0 && d.is_finite()) {
                errs.push(format!("scheme.delta_max must be finite and >= 0, got {d}"));
            }
        }
        for (name, p) in [("scheme.ledger.probe", &l.probe), ("probes", &self.probes)] {
            if p.n_pairs < 10 {
                errs.push(format!("{name}.n_pairs must be at least 10, got {}", p.n_pairs));
            }
            if !(p.ball_radius > 0.0 && p.ball_radius.is_finite()) {
                errs.push(format!("{name}.ball_radius must be positive, got {}", p.ball_radius));
            }
        }
        if self.output.formats.is_empty() {
            errs.push("output.formats must name at least one format".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    /// Apply `--seed` and `--max-iter`.
    pub fn apply_overrides(&mut self, seed: Option<u64>, max_iter: Option<usize>, out: Option<PathBuf>) {
        if let Some(s) = seed {
            self.noise.seeds = vec![s];
            self.probes.seed = s;
            self.scheme.ledger.probe.seed = s;
            self.scheme.lower.seed = s;
        }
        if let Some(m) = max_iter {
            self.scheme.max_iter = m;
        }
        if let Some(o) = out {
            self.output.directory = o;
        }
    }

    /// SHA-256 of the canonical serialisation, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn delta_max(&self) -> f64 {
        self.scheme
            .delta_max
            .unwrap_or_else(|| self.noise.deltas.iter().copied().fold(0.0, f64::max))
    }

    /// Build the fixture, replacing the truth when an explicit one is given.
    pub fn fixture(&self) -> anyhow::Result<Fixture> {
        let g = self.grid;
        let m = self.model;
        let f = Fixture::new(FixtureSpec {
            nx: g.nx,
            nt: g.nt,
            length: g.length,
            t_final: g.t_final,
            nonlinearity: m.nonlinearity,
            a: m.a,
            c: m.c,
            a_lower: m.a_lower,
            active: m.active,
        })?
        .with_execution(self.execution)?;
        match &self.truth {
            TruthConfig::Manufactured => Ok(f),
            TruthConfig::Explicit { path } => {
                let text = std::fs::read_to_string(path)?;
                let mut theta: Parameter = serde_json::from_str(&text)?;
                theta.active = m.active;
                theta.check_shape(f.grid())?;
                Ok(f.with_truth(theta)?)
            }
        }
    }
}
