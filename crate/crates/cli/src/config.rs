//! Scenario configuration: TOML file, `--set` overrides, defaults, unknown-key detection.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub hamiltonian: HamiltonianConfig,
    pub coupling: CouplingsConfig,
    pub initial: InitialConfig,
    pub solver: SolverSection,
    pub picard: PicardSection,
    pub newton: NewtonSection,
    pub hypotheses: HypothesesSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Periodic,
    Neumann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub side: f64,
    pub boundary: BoundaryKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// `|p|^r / (r m^alpha)`.
    Canonical,
    /// `c (1 + m)^-beta |p|^r`.
    Saturating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HamiltonianConfig {
    pub family: FamilyKind,
    pub r: f64,
    pub alpha: f64,
    pub eps: f64,
    pub c: f64,
    pub beta: f64,
    pub lambda: f64,
    pub envelope_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Zero,
    Constant,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingConfig {
    pub kind: CouplingKind,
    /// Coefficient `a` of `a m^q`, or the constant value.
    pub a: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingsConfig {
    pub f: CouplingConfig,
    pub g: CouplingConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Uniform,
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConfig {
    pub kind: DensityKind,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    SemiImplicit,
    FullyImplicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub scheme: SchemeKind,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub positivity_floor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessKind {
    HeatFlow,
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardSection {
    pub damping: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub continuation: bool,
    pub anderson: usize,
    pub initial: GuessKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSection {
    pub tol: f64,
    pub max_iter: usize,
    pub initial: GuessKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesesSection {
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    /// Horizons of `sweep-T`.
    pub horizons: Vec<f64>,
    /// Grid sizes of the space study of `refine-study`.
    pub grid_sizes: Vec<usize>,
    /// Time steps per `n^2` in the space study.
    pub steps_per_n2: f64,
    /// Grid size of the time study.
    pub time_study_n: usize,
    /// Step counts of the time study.
    pub time_steps: Vec<usize>,
    /// Horizon of both refinement studies.
    pub refine_horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, n: 32, side: 1.0, boundary: BoundaryKind::Neumann }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { horizon: 0.1, steps: 16 }
    }
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        Self { family: FamilyKind::Canonical, r: 1.4, alpha: 0.5, eps: 0.0, c: 1.0, beta: 0.5, lambda: 0.0, envelope_c: 2.0 }
    }
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { kind: CouplingKind::Power, a: 1.0, q: 1.0 }
    }
}

impl Default for CouplingsConfig {
    fn default() -> Self {
        Self { f: CouplingConfig::default(), g: CouplingConfig::default() }
    }
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { kind: DensityKind::Bump, amplitude: 0.5, phase: 0.0 }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { scheme: SchemeKind::SemiImplicit, inner_tol: 1e-10, inner_max_iter: 50, positivity_floor: 0.0 }
    }
}

impl Default for PicardSection {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-8, max_outer: 500, continuation: true, anderson: 10, initial: GuessKind::HeatFlow }
    }
}

impl Default for NewtonSection {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, initial: GuessKind::Stationary }
    }
}

impl Default for HypothesesSection {
    fn default() -> Self {
        Self { samples: 2000 }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            horizons: vec![0.4, 0.2, 0.1, 0.05, 5.0],
            grid_sizes: vec![32, 64, 128],
            steps_per_n2: 0.0625,
            time_study_n: 128,
            time_steps: vec![8, 16, 32],
            refine_horizon: 0.5,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            hamiltonian: HamiltonianConfig::default(),
            coupling: CouplingsConfig::default(),
            initial: InitialConfig::default(),
            solver: SolverSection::default(),
            picard: PicardSection::default(),
            newton: NewtonSection::default(),
            hypotheses: HypothesesSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.to_string())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let (key, value) = item.split_once('=').ok_or_else(|| ConfigError::Override(item.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(item.to_string()));
    }
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(item.to_string()))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parse_override_value(value.trim()));
    Ok(())
}

impl Config {
    /// Builds the effective config from an optional file and `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?,
            None => String::new(),
        };
        Self::from_str_with(&text, overrides)
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let mut unknown = Vec::new();
        let config: Config = serde_ignored::deserialize(toml::Value::Table(table), |p| unknown.push(p.to_string()))
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if !unknown.is_empty() {
            unknown.sort();
            return Err(ConfigError::UnknownKeys(unknown));
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(1..=2).contains(&self.grid.dim) {
            return bad(format!("grid.dim must be 1 or 2, got {}", self.grid.dim));
        }
        if self.sweep.horizons.is_empty() || self.sweep.grid_sizes.len() < 2 || self.sweep.time_steps.len() < 2 {
            return bad("sweep lists need at least one horizon and two refinement levels".into());
        }
        if !(self.sweep.refine_horizon > 0.0) {
            return bad(format!("sweep.refine_horizon must be positive, got {}", self.sweep.refine_horizon));
        }
        if !(self.sweep.steps_per_n2 > 0.0) {
            return bad(format!("sweep.steps_per_n2 must be positive, got {}", self.sweep.steps_per_n2));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
