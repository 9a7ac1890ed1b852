//! End-to-end scenario evaluation shared by the batch runner and the service.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Diagnostic;
use crate::eligibility::{EligibilityError, RuleSet, WfhTable};
use crate::energy::{
    build_charge_tasks, schedule_over, transit_load, ChargingConfig, EnergyError, EnergyIssue, LoadProfile, ModeSpecTable,
    Policy, TransitSpec,
};
use crate::grid::{capacity_envelope, CapacityEnvelope, CapacityOptions, CapacityResult, GridError, Network};
use crate::population::{read_population, synthesize_population, Individual, PopulationError, SynthesisParams, ZoneTable};
use crate::report::{headroom, shares, summary_table, zone_shares, HeadroomReport, ReportError, ShareBreakdown, ZoneShare};
use crate::sampler::{
    baseline_scenario, build_scenario, preset, PresetName, PresetTable, SamplerError, Scenario, WeightVector, WfhLevel,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{what}: {source}")]
    Population { what: &'static str, source: PopulationError },
    #[error("{what}: {source}")]
    Eligibility { what: &'static str, source: EligibilityError },
    #[error("{what}: {source}")]
    Energy { what: &'static str, source: EnergyError },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("network: {0}")]
    Grid(#[from] GridError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Invalid(Diagnostic),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

/// What to simulate: a named preset or explicit category weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightVector>,
    #[serde(default = "medium")]
    pub wfh_level: WfhLevel,
    pub seed: u64,
}

fn medium() -> WfhLevel {
    WfhLevel::Medium
}

impl ScenarioSpec {
    pub fn preset(preset: PresetName, wfh_level: WfhLevel, seed: u64) -> Self {
        Self { name: None, preset: Some(preset), weights: None, wfh_level, seed }
    }

    pub fn check(&self) -> Result<(), Diagnostic> {
        match (&self.preset, &self.weights) {
            (Some(_), Some(_)) => Err(Diagnostic {
                field: "scenario".into(),
                message: "give either `preset` or `weights`, not both".into(),
            }),
            (None, None) => Err(Diagnostic { field: "scenario".into(), message: "one of `preset` or `weights` is required".into() }),
            (None, Some(w)) => w.validate().map_err(|e| Diagnostic { field: "scenario.weights".into(), message: e.to_string() }),
            (Some(_), None) => Ok(()),
        }
    }

    pub fn display_name(&self) -> String {
        match (&self.name, self.preset) {
            (Some(n), _) => n.clone(),
            (None, Some(p)) => p.as_str().to_string(),
            (None, None) => "custom".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub charging: ChargingConfig,
    pub lambda: f64,
    pub reserve_margin: f64,
    pub population_scale: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { charging: ChargingConfig::default(), lambda: 0.0, reserve_margin: 0.0, population_scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub enum PopulationSource {
    Csv(String),
    Synthesis { params: String, n: usize, seed: u64 },
}

/// Raw text of every input document.
#[derive(Debug, Clone)]
pub struct Sources {
    pub zones: String,
    pub population: PopulationSource,
    pub rules: String,
    pub wfh_table: String,
    pub mode_specs: String,
    pub transit: String,
    pub presets: Option<String>,
    /// `meta.json`, `buses.csv`, `lines.csv`, `generators.csv`.
    pub network: [String; 4],
}

/// Parsed, validated datasets. Immutable once built.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub zones: ZoneTable,
    pub population: Vec<Individual>,
    pub rules: RuleSet,
    pub wfh: WfhTable,
    pub specs: ModeSpecTable,
    pub transit: TransitSpec,
    pub presets: PresetTable,
    pub network: Network,
    pub settings: Settings,
}

impl Inputs {
    pub fn from_sources(src: &Sources, settings: Settings) -> Result<Self, PipelineError> {
        settings
            .charging
            .validate()
            .map_err(|source| PipelineError::Energy { what: "charging", source })?;
        let zones = ZoneTable::from_reader(src.zones.as_bytes())
            .map_err(|source| PipelineError::Population { what: "zones", source })?;
        let population = match &src.population {
            PopulationSource::Csv(text) => read_population(text.as_bytes(), &zones)
                .map_err(|source| PipelineError::Population { what: "population", source })?,
            PopulationSource::Synthesis { params, n, seed } => {
                let p = SynthesisParams::from_json(params)
                    .and_then(|p| p.validate(Some(&zones)).map(|_| p))
                    .map_err(|source| PipelineError::Population { what: "synthesis", source })?;
                synthesize_population(*n, &p, *seed)
                    .map_err(|source| PipelineError::Population { what: "synthesis", source })?
            }
        };
        let rules =
            RuleSet::from_json(&src.rules).map_err(|source| PipelineError::Eligibility { what: "rules", source })?;
        let wfh = WfhTable::from_json(&src.wfh_table)
            .map_err(|source| PipelineError::Eligibility { what: "wfh_table", source })?;
        let specs = ModeSpecTable::from_reader(src.mode_specs.as_bytes())
            .map_err(|source| PipelineError::Energy { what: "mode_specs", source })?;
        let transit =
            TransitSpec::from_json(&src.transit).map_err(|source| PipelineError::Energy { what: "transit", source })?;
        let presets = match &src.presets {
            Some(text) => PresetTable::from_json(text)?,
            None => PresetTable::bundled(),
        };
        let [meta, buses, lines, gens] = &src.network;
        let network = Network::from_strs(meta, buses, lines, gens)?;
        Ok(Self { zones, population, rules, wfh, specs, transit, presets, network, settings })
    }

    pub fn capacity_options(&self) -> CapacityOptions {
        CapacityOptions { reserve_margin: self.settings.reserve_margin, ..CapacityOptions::default() }
    }

    pub fn capacity(&self, lambda: f64) -> Result<(CapacityEnvelope, CapacityResult), PipelineError> {
        Ok(capacity_envelope(&self.network, lambda, &self.capacity_options())?)
    }

    pub fn scenario(&self, spec: &ScenarioSpec) -> Result<Scenario, PipelineError> {
        spec.check().map_err(PipelineError::Invalid)?;
        let name = spec.display_name();
        let charging = &self.settings.charging;
        let weights = match (spec.preset, spec.weights) {
            (Some(p), _) => {
                let (w, behavior) = preset(p, &self.presets);
                if behavior.bypass_sampling {
                    return Ok(baseline_scenario(&self.population, &name, spec.seed, charging));
                }
                w
            }
            (None, Some(w)) => w,
            (None, None) => unreachable!("checked above"),
        };
        Ok(build_scenario(
            &self.population,
            &self.zones,
            &self.rules,
            &self.wfh,
            &weights,
            spec.wfh_level,
            &name,
            spec.seed,
            charging,
        )?)
    }

    /// Demand per policy in MW, scaled by `population_scale`.
    pub fn profiles(
        &self,
        scn: &Scenario,
        policies: &[Policy],
    ) -> Result<(BTreeMap<Policy, LoadProfile>, Vec<EnergyIssue>), PipelineError> {
        let energy = |source| PipelineError::Energy { what: "energy", source };
        let charging = &self.settings.charging;
        let tasks = build_charge_tasks(scn, &self.population, &self.zones, &self.specs, charging).map_err(energy)?;
        let transit = transit_load(scn, &self.population, &self.specs, &self.transit, charging).map_err(energy)?;
        let scale = self.settings.population_scale;
        let profiles = policies
            .par_iter()
            .map(|&p| (p, schedule_over(&tasks.tasks, p, &transit).scaled(scale)))
            .collect();
        Ok((profiles, tasks.issues))
    }

    pub fn evaluate(
        &self,
        spec: &ScenarioSpec,
        policies: &[Policy],
        capacity: &CapacityEnvelope,
    ) -> Result<Evaluation, PipelineError> {
        let scenario = self.scenario(spec)?;
        let shares = shares(&scenario, &self.population, &self.zones)?;
        let zone_shares = zone_shares(&scenario, &self.population)?;
        let (profiles, issues) = self.profiles(&scenario, policies)?;
        let headroom = profiles
            .iter()
            .map(|(p, prof)| Ok((*p, headroom(prof, &capacity.envelope_mw)?)))
            .collect::<Result<BTreeMap<_, _>, ReportError>>()?;
        Ok(Evaluation { scenario, shares, zone_shares, profiles, headroom, issues })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueSummary {
    pub range_exceeded: usize,
    pub window_shortfall: usize,
}

impl IssueSummary {
    pub fn of(issues: &[EnergyIssue]) -> Self {
        let mut s = Self::default();
        for i in issues {
            match i {
                EnergyIssue::RangeExceeded { .. } => s.range_exceeded += 1,
                EnergyIssue::WindowShortfall { .. } => s.window_shortfall += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub scenario: Scenario,
    pub shares: ShareBreakdown,
    pub zone_shares: Vec<ZoneShare>,
    pub profiles: BTreeMap<Policy, LoadProfile>,
    pub headroom: BTreeMap<Policy, HeadroomReport>,
    pub issues: Vec<EnergyIssue>,
}

impl Evaluation {
    pub fn summary(&self) -> String {
        let reports: Vec<_> = self.headroom.iter().map(|(p, r)| (*p, r.clone())).collect();
        let mut s = summary_table(&self.scenario.name, &self.shares, &reports);
        let issues = IssueSummary::of(&self.issues);
        s.push_str(&format!(
            "energy issues: {} range exceeded, {} window shortfall\n",
            issues.range_exceeded, issues.window_shortfall
        ));
        s
    }
}

/// Files written by [`write_artifacts`], relative to the output directory.
pub fn artifact_names(policies: &[Policy]) -> Vec<String> {
    let mut v = vec!["scenario.csv".to_string()];
    v.extend(policies.iter().map(|p| format!("profile_{}.csv", p.as_str())));
    v.extend(
        ["capacity.csv", "headroom.json", "shares.json", "zone_shares.json", "issues.json", "summary.txt"]
            .map(String::from),
    );
    v
}

/// Serializes everything in memory first, then writes the files, so a
/// failure before writing leaves nothing behind.
pub fn write_artifacts(out: &Path, eval: &Evaluation, capacity: &CapacityEnvelope) -> Result<Vec<PathBuf>, PipelineError> {
    let csv_err = |e: csv::Error| PipelineError::Write { path: out.display().to_string(), source: e.into() };

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    eval.scenario.write_csv(&mut buf).map_err(csv_err)?;
    files.push(("scenario.csv".into(), buf));
    for (p, prof) in &eval.profiles {
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).map_err(csv_err)?;
        files.push((format!("profile_{}.csv", p.as_str()), buf));
    }
    let mut buf = Vec::new();
    capacity.write_csv(&mut buf).map_err(csv_err)?;
    files.push(("capacity.csv".into(), buf));
    files.push(("headroom.json".into(), pretty(&eval.headroom)));
    files.push(("shares.json".into(), pretty(&eval.shares)));
    files.push(("zone_shares.json".into(), pretty(&eval.zone_shares)));
    files.push(("issues.json".into(), pretty(&eval.issues)));
    files.push(("summary.txt".into(), eval.summary().into_bytes()));

    let io = |p: &Path, source| PipelineError::Write { path: p.display().to_string(), source };
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let p = out.join(name);
        std::fs::write(&p, bytes).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report types serialize");
    out.push(b'\n');
    out
}
