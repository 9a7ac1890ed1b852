//! Batch run configuration and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eligibility::{RuleSet, WfhTable};
use crate::energy::{ChargingConfig, ModeSpecTable, Policy, TransitSpec};
use crate::grid::Network;
use crate::pipeline::{PopulationSource, ScenarioSpec, Settings, Sources};
use crate::population::{SynthesisParams, ZoneTable};
use crate::sampler::PresetTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PopulationConfig {
    File { file: PathBuf },
    Synthesis { synthesis: PathBuf, n: usize, seed: u64 },
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::Earliest, Policy::Latest, Policy::Distributed]
}

fn one() -> f64 {
    1.0
}

/// A single JSON document. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub population: PopulationConfig,
    pub zones: PathBuf,
    pub rules: PathBuf,
    pub wfh_table: PathBuf,
    pub mode_specs: PathBuf,
    pub transit: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presets: Option<PathBuf>,
    #[serde(default)]
    pub charging: ChargingConfig,
    pub scenario: ScenarioSpec,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    /// Directory holding `meta.json`, `buses.csv`, `lines.csv`, `generators.csv`.
    pub network: PathBuf,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub reserve_margin: f64,
    /// Multiplies demand profiles, e.g. when the population is a sample.
    #[serde(default = "one")]
    pub population_scale: f64,
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { field: field.into(), message: message.to_string() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(Diagnostic),
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, Diagnostic> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Diagnostic::new(if field == "." { "config".to_string() } else { field }, e.into_inner())
        })?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = read(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(ConfigError::Parse)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn settings(&self) -> Settings {
        Settings {
            charging: self.charging.clone(),
            lambda: self.lambda,
            reserve_margin: self.reserve_margin,
            population_scale: self.population_scale,
        }
    }

    /// Every path the config references, with the field that names it.
    fn paths(&self) -> Vec<(&'static str, PathBuf)> {
        let mut v = vec![
            ("zones", self.resolve(&self.zones)),
            ("rules", self.resolve(&self.rules)),
            ("wfh_table", self.resolve(&self.wfh_table)),
            ("mode_specs", self.resolve(&self.mode_specs)),
            ("transit", self.resolve(&self.transit)),
        ];
        match &self.population {
            PopulationConfig::File { file } => v.push(("population.file", self.resolve(file))),
            PopulationConfig::Synthesis { synthesis, .. } => v.push(("population.synthesis", self.resolve(synthesis))),
        }
        if let Some(p) = &self.presets {
            v.push(("presets", self.resolve(p)));
        }
        let net = self.resolve(&self.network);
        for f in ["meta.json", "buses.csv", "lines.csv", "generators.csv"] {
            v.push(("network", net.join(f)));
        }
        v
    }

    /// Checks fields, references and file contents without running anything.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.policies.is_empty() {
            out.push(Diagnostic::new("policies", "policy list must not be empty"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            out.push(Diagnostic::new("lambda", format!("must be finite and >= 0, found {}", self.lambda)));
        }
        if !(self.reserve_margin.is_finite() && (0.0..1.0).contains(&self.reserve_margin)) {
            out.push(Diagnostic::new("reserve_margin", format!("must be in [0, 1), found {}", self.reserve_margin)));
        }
        if !(self.population_scale.is_finite() && self.population_scale > 0.0) {
            out.push(Diagnostic::new("population_scale", format!("must be > 0, found {}", self.population_scale)));
        }
        if let PopulationConfig::Synthesis { n: 0, .. } = self.population {
            out.push(Diagnostic::new("population.n", "must be positive"));
        }
        if let Err(e) = self.scenario.check() {
            out.push(e);
        }
        if let Err(e) = self.charging.validate() {
            out.push(Diagnostic::new("charging", e));
        }

        let mut missing = false;
        for (field, p) in self.paths() {
            if !p.is_file() {
                out.push(Diagnostic::new(field, format!("file not found: {}", p.display())));
                missing = true;
            }
        }
        if missing {
            return out;
        }

        let text = |p: &Path| std::fs::read_to_string(p).unwrap_or_default();
        let zones = match ZoneTable::from_path(self.resolve(&self.zones)) {
            Ok(z) => Some(z),
            Err(e) => {
                out.push(Diagnostic::new("zones", e));
                None
            }
        };
        match RuleSet::diagnose_json(&text(&self.resolve(&self.rules))) {
            Ok(errs) => out.extend(errs.into_iter().map(|e| Diagnostic::new("rules", e))),
            Err(e) => out.push(Diagnostic::new("rules", e)),
        }
        if let Err(e) = WfhTable::from_json(&text(&self.resolve(&self.wfh_table))) {
            out.push(Diagnostic::new("wfh_table", e));
        }
        if let Err(e) = ModeSpecTable::from_path(self.resolve(&self.mode_specs)) {
            out.push(Diagnostic::new("mode_specs", e));
        }
        if let Err(e) = TransitSpec::from_json(&text(&self.resolve(&self.transit))) {
            out.push(Diagnostic::new("transit", e));
        }
        if let Some(p) = &self.presets {
            if let Err(e) = PresetTable::from_json(&text(&self.resolve(p))) {
                out.push(Diagnostic::new("presets", e));
            }
        }
        if let Err(e) = Network::load_dir(self.resolve(&self.network)) {
            out.push(Diagnostic::new("network", e));
        }
        match (&self.population, &zones) {
            (PopulationConfig::Synthesis { synthesis, .. }, _) => {
                match SynthesisParams::from_json(&text(&self.resolve(synthesis))) {
                    Ok(p) => {
                        if let Err(e) = p.validate(zones.as_ref()) {
                            out.push(Diagnostic::new("population.synthesis", e));
                        }
                    }
                    Err(e) => out.push(Diagnostic::new("population.synthesis", e)),
                }
            }
            (PopulationConfig::File { file }, Some(z)) => {
                if let Err(e) = crate::population::load_population(self.resolve(file), z) {
                    out.push(Diagnostic::new("population.file", e));
                }
            }
            (PopulationConfig::File { .. }, None) => {}
        }
        out
    }

    /// Reads every referenced file.
    pub fn sources(&self) -> Result<Sources, ConfigError> {
        let diags = self.diagnostics();
        if !diags.is_empty() {
            return Err(ConfigError::Invalid(diags));
        }
        let r = |p: &Path| read(&self.resolve(p));
        let net = self.resolve(&self.network);
        let population = match &self.population {
            PopulationConfig::File { file } => PopulationSource::Csv(r(file)?),
            PopulationConfig::Synthesis { synthesis, n, seed } => {
                PopulationSource::Synthesis { params: r(synthesis)?, n: *n, seed: *seed }
            }
        };
        Ok(Sources {
            zones: r(&self.zones)?,
            population,
            rules: r(&self.rules)?,
            wfh_table: r(&self.wfh_table)?,
            mode_specs: r(&self.mode_specs)?,
            transit: r(&self.transit)?,
            presets: self.presets.as_deref().map(r).transpose()?,
            network: [
                read(&net.join("meta.json"))?,
                read(&net.join("buses.csv"))?,
                read(&net.join("lines.csv"))?,
                read(&net.join("generators.csv"))?,
            ],
        })
    }
}

/// Loads and validates a config file, returning every problem found.
pub fn validate(path: impl AsRef<Path>) -> Vec<Diagnostic> {
    match RunConfig::load(path) {
        Ok(cfg) => cfg.diagnostics(),
        Err(ConfigError::Parse(d)) => vec![d],
        Err(e) => vec![Diagnostic::new("config", e)],
    }
}
