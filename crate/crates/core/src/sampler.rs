//! Weighted mode assignment and scenario construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eligibility::{eligible_set, wfh_probability, EligibilityError, RuleSet, WfhTable};
use crate::energy::ChargingConfig;
use crate::mode::{Category, Mode};
use crate::population::{Dwelling, Individual, ZoneTable};
use crate::rng::{self, Domain};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("weights: {0}")]
    InvalidWeights(String),
    #[error("individual {0} has an empty eligible set")]
    EmptyChoiceSet(u64),
    #[error(transparent)]
    Eligibility(#[from] EligibilityError),
    #[error("preset file: {0}")]
    Presets(String),
    #[error("scenario invalid for individual {id}: {message}")]
    Invalid { id: u64, message: String },
}

/// Category-level sampling weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub transit: f64,
    pub car: f64,
    pub micromobility: f64,
    pub wfh: f64,
}

impl WeightVector {
    pub const EQUAL: WeightVector = WeightVector { transit: 1.0, car: 1.0, micromobility: 1.0, wfh: 1.0 };

    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Transit => self.transit,
            Category::Car => self.car,
            Category::Micromobility => self.micromobility,
            Category::Wfh => self.wfh,
        }
    }

    pub fn set(&mut self, c: Category, v: f64) {
        match c {
            Category::Transit => self.transit = v,
            Category::Car => self.car = v,
            Category::Micromobility => self.micromobility = v,
            Category::Wfh => self.wfh = v,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        for c in Category::ALL {
            let w = self.get(c);
            if !w.is_finite() || w < 0.0 {
                return Err(SamplerError::InvalidWeights(format!("weight for {c} must be finite and >= 0, found {w}")));
            }
        }
        if Category::ALL.iter().all(|&c| self.get(c) == 0.0) {
            return Err(SamplerError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WfhLevel {
    #[serde(alias = "High")]
    High,
    #[serde(alias = "Medium")]
    Medium,
    #[serde(alias = "Zero")]
    Zero,
}

impl WfhLevel {
    /// Multiplier applied to the table probability.
    pub fn factor(self) -> f64 {
        match self {
            WfhLevel::High => 1.5,
            WfhLevel::Medium => 1.0,
            WfhLevel::Zero => 0.0,
        }
    }

    pub fn scale(self, p: f64) -> f64 {
        (p * self.factor()).clamp(0.0, 1.0)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WfhLevel::High => "high",
            WfhLevel::Medium => "medium",
            WfhLevel::Zero => "zero",
        }
    }
}

impl FromStr for WfhLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(WfhLevel::High),
            "medium" => Ok(WfhLevel::Medium),
            "zero" => Ok(WfhLevel::Zero),
            other => Err(format!("unknown wfh level `{other}` (expected high, medium or zero)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeLocation {
    Home,
    Work,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub individual_id: u64,
    pub mode: Mode,
    pub charge_location: ChargeLocation,
}

/// A full mode assignment for one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub wfh_level: WfhLevel,
    pub seed: u64,
    /// `None` when sampling was bypassed (baseline).
    pub weights: Option<WeightVector>,
    /// One entry per individual, in population order.
    pub assignments: Vec<Assignment>,
}

impl Scenario {
    pub fn by_id(&self) -> BTreeMap<u64, &Assignment> {
        self.assignments.iter().map(|a| (a.individual_id, a)).collect()
    }

    /// Writes `individual_id,mode,charge_location` rows.
    pub fn write_csv(&self, writer: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["individual_id", "mode", "charge_location"])?;
        for a in &self.assignments {
            let loc = match a.charge_location {
                ChargeLocation::Home => "home",
                ChargeLocation::Work => "work",
                ChargeLocation::None => "none",
            };
            w.write_record([a.individual_id.to_string().as_str(), a.mode.as_str(), loc])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata(&self) -> ScenarioMetadata {
        ScenarioMetadata {
            name: self.name.clone(),
            seed: self.seed,
            weights: self.weights,
            wfh_level: self.wfh_level,
        }
    }

    /// Checks that assignments line up with `pop`, that sampled modes were
    /// eligible, and that charge locations match battery use.
    pub fn validate(
        &self,
        pop: &[Individual],
        rules: &RuleSet,
        zones: &ZoneTable,
        wfh: &WfhTable,
    ) -> Result<(), SamplerError> {
        if self.assignments.len() != pop.len() {
            return Err(SamplerError::Invalid {
                id: 0,
                message: format!("{} assignments for {} individuals", self.assignments.len(), pop.len()),
            });
        }
        for (ind, a) in pop.iter().zip(&self.assignments) {
            let bad = |message: String| SamplerError::Invalid { id: ind.id, message };
            if ind.id != a.individual_id {
                return Err(bad(format!("assignment order mismatch ({})", a.individual_id)));
            }
            if a.mode.is_personal_battery() == (a.charge_location == ChargeLocation::None) {
                return Err(bad(format!("charge location {:?} inconsistent with {}", a.charge_location, a.mode)));
            }
            if self.weights.is_some() {
                let p = self.wfh_level.scale(wfh_probability(ind, wfh));
                if !eligible_set(ind, rules, zones, p)?.contains(&a.mode) {
                    return Err(bad(format!("{} is not eligible", a.mode)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub name: String,
    pub seed: u64,
    pub weights: Option<WeightVector>,
    pub wfh_level: WfhLevel,
}

/// Effective sampling weight of each eligible mode: the category weight is
/// split evenly over the eligible modes of that category, and WFH is scaled
/// by its probability.
pub fn effective_weights(eligible: &BTreeSet<Mode>, weights: &WeightVector, p_wfh: f64) -> Vec<(Mode, f64)> {
    let mut per_cat: BTreeMap<Category, usize> = BTreeMap::new();
    for m in eligible {
        *per_cat.entry(m.category()).or_default() += 1;
    }
    eligible
        .iter()
        .map(|&m| {
            let w = if m == Mode::Wfh {
                weights.wfh * p_wfh
            } else {
                weights.get(m.category()) / per_cat[&m.category()] as f64
            };
            (m, w)
        })
        .collect()
}

/// Draws one mode from `eligible` with probability proportional to its
/// effective weight. If every effective weight is zero the draw is uniform
/// over the eligible commuting modes.
pub fn assign_mode<R: Rng>(
    eligible: &BTreeSet<Mode>,
    weights: &WeightVector,
    p_wfh: f64,
    rng: &mut R,
) -> Result<Mode, SamplerError> {
    let mut options = effective_weights(eligible, weights, p_wfh);
    if options.is_empty() {
        return Err(SamplerError::EmptyChoiceSet(0));
    }
    let mut total: f64 = options.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        let commute: Vec<_> = eligible.iter().filter(|m| **m != Mode::Wfh).collect();
        let pool: Vec<Mode> = if commute.is_empty() {
            eligible.iter().copied().collect()
        } else {
            commute.into_iter().copied().collect()
        };
        options = pool.into_iter().map(|m| (m, 1.0)).collect();
        total = options.len() as f64;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = options[0].0;
    for (m, w) in options {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = m;
        if u < acc {
            return Ok(m);
        }
    }
    // u landed on the rounding gap at the top of the range
    Ok(last)
}

fn charge_location<R: Rng>(ind: &Individual, mode: Mode, charging: &ChargingConfig, rng: &mut R) -> ChargeLocation {
    if !mode.is_personal_battery() {
        return ChargeLocation::None;
    }
    let p_home = match ind.dwelling {
        Dwelling::SingleFamilyOwned => charging.home_prob_single_family,
        Dwelling::Apartment => charging.home_prob_apartment,
    };
    if rng.random::<f64>() < p_home {
        ChargeLocation::Home
    } else {
        ChargeLocation::Work
    }
}

/// Samples a mode for every individual. Each individual uses its own random
/// stream keyed by `(seed, id)`.
#[allow(clippy::too_many_arguments)]
pub fn build_scenario(
    pop: &[Individual],
    zones: &ZoneTable,
    rules: &RuleSet,
    wfh_table: &WfhTable,
    weights: &WeightVector,
    wfh_level: WfhLevel,
    name: &str,
    seed: u64,
    charging: &ChargingConfig,
) -> Result<Scenario, SamplerError> {
    weights.validate()?;
    let assignments = pop
        .par_iter()
        .map(|ind| {
            let p = wfh_level.scale(wfh_probability(ind, wfh_table));
            let eligible = eligible_set(ind, rules, zones, p)?;
            if eligible.is_empty() {
                return Err(SamplerError::EmptyChoiceSet(ind.id));
            }
            let mut rng = rng::stream(seed, Domain::ModeChoice, ind.id);
            let mode = assign_mode(&eligible, weights, p, &mut rng)?;
            let mut loc_rng = rng::stream(seed, Domain::ChargeLocation, ind.id);
            Ok(Assignment {
                individual_id: ind.id,
                mode,
                charge_location: charge_location(ind, mode, charging, &mut loc_rng),
            })
        })
        .collect::<Result<Vec<_>, SamplerError>>()?;
    Ok(Scenario {
        name: name.to_string(),
        wfh_level,
        seed,
        weights: Some(*weights),
        assignments,
    })
}

/// Copies each individual's surveyed mode; only charge locations are drawn.
pub fn baseline_scenario(pop: &[Individual], name: &str, seed: u64, charging: &ChargingConfig) -> Scenario {
    let assignments = pop
        .par_iter()
        .map(|ind| {
            let mut loc_rng = rng::stream(seed, Domain::ChargeLocation, ind.id);
            Assignment {
                individual_id: ind.id,
                mode: ind.baseline_mode,
                charge_location: charge_location(ind, ind.baseline_mode, charging, &mut loc_rng),
            }
        })
        .collect();
    Scenario {
        name: name.to_string(),
        wfh_level: WfhLevel::Medium,
        seed,
        weights: None,
        assignments,
    }
}

// ---------------------------------------------------------------------------
// Presets

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    #[serde(alias = "Baseline2019", alias = "baseline")]
    Baseline2019,
    #[serde(alias = "TransitFocused")]
    TransitFocused,
    #[serde(alias = "CarFocused")]
    CarFocused,
    #[serde(alias = "MicromobilityFocused")]
    MicromobilityFocused,
    #[serde(alias = "Mix")]
    Mix,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Baseline2019,
        PresetName::TransitFocused,
        PresetName::CarFocused,
        PresetName::MicromobilityFocused,
        PresetName::Mix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Baseline2019 => "baseline2019",
            PresetName::TransitFocused => "transit_focused",
            PresetName::CarFocused => "car_focused",
            PresetName::MicromobilityFocused => "micromobility_focused",
            PresetName::Mix => "mix",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == norm || p.as_str().replace('_', "") == norm)
            .ok_or_else(|| format!("unknown preset `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetBehavior {
    /// Copy `baseline_mode` instead of sampling.
    pub bypass_sampling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetEntry {
    pub weights: WeightVector,
    #[serde(default)]
    pub bypass_sampling: bool,
}

/// Weight vectors for each named preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PresetTable(pub BTreeMap<PresetName, PresetEntry>);

pub const DEFAULT_PRESETS_JSON: &str = include_str!("../data/presets.json");

impl PresetTable {
    pub fn from_json(text: &str) -> Result<Self, SamplerError> {
        let t: Self = serde_json::from_str(text).map_err(|e| SamplerError::Presets(e.to_string()))?;
        for p in PresetName::ALL {
            let entry = t.0.get(&p).ok_or_else(|| SamplerError::Presets(format!("missing preset `{p}`")))?;
            entry.weights.validate()?;
        }
        Ok(t)
    }

    pub fn bundled() -> Self {
        Self::from_json(DEFAULT_PRESETS_JSON).expect("bundled presets are valid")
    }
}

impl Default for PresetTable {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Weights and behaviour for a named preset.
pub fn preset(name: PresetName, table: &PresetTable) -> (WeightVector, PresetBehavior) {
    let entry = &table.0[&name];
    let bypass = entry.bypass_sampling || name == PresetName::Baseline2019;
    (entry.weights, PresetBehavior { bypass_sampling: bypass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_choice() {
        let set = BTreeSet::from([Mode::PrivateEv]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(assign_mode(&set, &WeightVector::EQUAL, 0.3, &mut rng).unwrap(), Mode::PrivateEv);
        }
    }

    #[test]
    fn zero_wfh_probability_never_drawn() {
        let set = BTreeSet::from([Mode::PrivateEv, Mode::Subway, Mode::Wfh]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            assert_ne!(assign_mode(&set, &WeightVector::EQUAL, 0.0, &mut rng).unwrap(), Mode::Wfh);
        }
    }

    #[test]
    fn zero_weight_category_never_drawn() {
        let set = BTreeSet::from([Mode::PrivateEv, Mode::Subway]);
        let w = WeightVector { car: 0.0, ..WeightVector::EQUAL };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert_eq!(assign_mode(&set, &w, 0.5, &mut rng).unwrap(), Mode::Subway);
        }
    }

    #[test]
    fn category_weight_splits_over_sub_modes() {
        let set = BTreeSet::from([Mode::Subway, Mode::Bus, Mode::PrivateEv]);
        let ew: BTreeMap<_, _> = effective_weights(&set, &WeightVector::EQUAL, 0.0).into_iter().collect();
        assert_eq!(ew[&Mode::Subway], 0.5);
        assert_eq!(ew[&Mode::Bus], 0.5);
        assert_eq!(ew[&Mode::PrivateEv], 1.0);
    }

    #[test]
    fn all_zero_effective_weights_fall_back_to_uniform() {
        let set = BTreeSet::from([Mode::Wfh, Mode::Subway]);
        let w = WeightVector { transit: 0.0, car: 0.0, micromobility: 0.0, wfh: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(assign_mode(&set, &w, 0.0, &mut rng).unwrap(), Mode::Subway);
    }

    #[test]
    fn invalid_weights() {
        let zero = WeightVector { transit: 0.0, car: 0.0, micromobility: 0.0, wfh: 0.0 };
        assert!(zero.validate().is_err());
        let neg = WeightVector { car: -1.0, ..WeightVector::EQUAL };
        assert!(neg.validate().is_err());
        let nan = WeightVector { car: f64::NAN, ..WeightVector::EQUAL };
        assert!(nan.validate().is_err());
    }

    #[test]
    fn wfh_level_factors_clamp() {
        assert_eq!(WfhLevel::Zero.scale(0.9), 0.0);
        assert_eq!(WfhLevel::Medium.scale(0.4), 0.4);
        assert_eq!(WfhLevel::High.scale(0.8), 1.0);
        assert!("sometimes".parse::<WfhLevel>().is_err());
    }

    #[test]
    fn bundled_presets() {
        let t = PresetTable::bundled();
        let (w, b) = preset(PresetName::TransitFocused, &t);
        assert!(w.transit > w.car && w.transit > w.micromobility && w.transit > w.wfh);
        assert!(!b.bypass_sampling);
        let (w, _) = preset(PresetName::CarFocused, &t);
        assert!(w.car > w.transit && w.car > w.micromobility && w.car > w.wfh);
        let (w, _) = preset(PresetName::MicromobilityFocused, &t);
        assert!(w.micromobility > w.transit && w.micromobility > w.car && w.micromobility > w.wfh);
        let (w, _) = preset(PresetName::Mix, &t);
        assert!(w.transit == w.car && w.car == w.micromobility && w.micromobility == w.wfh);
        assert!(preset(PresetName::Baseline2019, &t).1.bypass_sampling);
        assert_eq!("Baseline2019".parse::<PresetName>().unwrap(), PresetName::Baseline2019);
        assert_eq!("car-focused".parse::<PresetName>().unwrap(), PresetName::CarFocused);
    }
}
