//! HTTP/JSON payloads. All power values are MW and all hourly arrays have 24
//! entries, hour 0 first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{LoadProfile, ModeSpec, Policy, HOURS};
use crate::grid::CapacityEnvelope;
use crate::pipeline::{Inputs, IssueSummary, PipelineError, ScenarioSpec};
use crate::population::Zone;
use crate::report::{HeadroomReport, ShareBreakdown, ZoneShare};
use crate::sampler::{preset, PresetName, ScenarioMetadata, WeightVector, WfhLevel};

fn medium() -> WfhLevel {
    WfhLevel::Medium
}

fn earliest() -> Policy {
    Policy::Earliest
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightVector>,
    #[serde(default = "medium")]
    pub wfh_level: WfhLevel,
    #[serde(default = "earliest")]
    pub policy: Policy,
    pub seed: u64,
    /// Capacity is solved at this value; the server default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// A request-level validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ScenarioRequest {
    pub fn preset(preset: PresetName, policy: Policy, seed: u64) -> Self {
        Self { preset: Some(preset), weights: None, wfh_level: WfhLevel::Medium, policy, seed, lambda: None }
    }

    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec { name: None, preset: self.preset, weights: self.weights, wfh_level: self.wfh_level, seed: self.seed }
    }

    pub fn validate(&self) -> Result<(), ErrorBody> {
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(ErrorBody { error: format!("must be finite and >= 0, found {l}"), field: Some("lambda".into()) });
            }
        }
        self.spec().check().map_err(|d| ErrorBody {
            error: d.message,
            field: Some(d.field.trim_start_matches("scenario").trim_start_matches('.').to_string())
                .filter(|f| !f.is_empty()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResponse {
    pub scenario: ScenarioMetadata,
    pub policy: Policy,
    pub lambda: f64,
    pub shares: ShareBreakdown,
    pub zone_shares: Vec<ZoneShare>,
    /// Every policy, so the client can compare without another request.
    pub profiles: BTreeMap<Policy, LoadProfile>,
    pub capacity_mw: [f64; HOURS],
    /// For the requested policy.
    pub headroom: HeadroomReport,
    pub issues: IssueSummary,
}

pub fn scenario_response(
    inputs: &Inputs,
    req: &ScenarioRequest,
    lambda: f64,
    capacity: &CapacityEnvelope,
) -> Result<ScenarioResponse, PipelineError> {
    let mut eval = inputs.evaluate(&req.spec(), &Policy::ALL, capacity)?;
    let headroom = eval.headroom.remove(&req.policy).expect("all policies evaluated");
    Ok(ScenarioResponse {
        scenario: eval.scenario.metadata(),
        policy: req.policy,
        lambda,
        shares: eval.shares,
        zone_shares: eval.zone_shares,
        profiles: eval.profiles,
        capacity_mw: capacity.envelope_mw,
        headroom,
        issues: IssueSummary::of(&eval.issues),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResponse {
    pub envelope: CapacityEnvelope,
    /// Binding constraint labels per hour.
    pub binding: Vec<Vec<String>>,
}

pub fn capacity_response(inputs: &Inputs, lambda: f64) -> Result<CapacityResponse, PipelineError> {
    let (envelope, result) = inputs.capacity(lambda)?;
    Ok(CapacityResponse { envelope, binding: result.hours.into_iter().map(|h| h.binding).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: PresetName,
    pub weights: WeightVector,
    pub bypass_sampling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub name: String,
    pub buses: usize,
    pub lines: usize,
    pub generators: usize,
    pub designated_buses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResponse {
    pub population: usize,
    pub population_scale: f64,
    pub zones: Vec<Zone>,
    pub presets: Vec<PresetInfo>,
    pub mode_specs: Vec<ModeSpec>,
    pub transit_assumption: bool,
    pub policies: Vec<Policy>,
    pub wfh_levels: Vec<WfhLevel>,
    pub default_lambda: f64,
    pub network: NetworkInfo,
}

pub fn meta(inputs: &Inputs) -> MetaResponse {
    let net = &inputs.network;
    MetaResponse {
        population: inputs.population.len(),
        population_scale: inputs.settings.population_scale,
        zones: inputs.zones.zones().to_vec(),
        presets: PresetName::ALL
            .into_iter()
            .map(|p| {
                let (weights, b) = preset(p, &inputs.presets);
                PresetInfo { name: p, weights, bypass_sampling: b.bypass_sampling }
            })
            .collect(),
        mode_specs: inputs.specs.0.values().cloned().collect(),
        transit_assumption: inputs.transit.assumption,
        policies: Policy::ALL.to_vec(),
        wfh_levels: vec![WfhLevel::High, WfhLevel::Medium, WfhLevel::Zero],
        default_lambda: inputs.settings.lambda,
        network: NetworkInfo {
            name: net.name.clone(),
            buses: net.buses.len(),
            lines: net.lines.len(),
            generators: net.generators.len(),
            designated_buses: net.manhattan().into_iter().map(|b| net.buses[b].id.clone()).collect(),
        },
    }
}
