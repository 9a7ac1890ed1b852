//! Mode eligibility rules and work-from-home likelihood.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mode::Mode;
use crate::population::{
    commute_distance, Education, Individual, Industry, PopulationError, Region, ZoneTable, INCOME_BUCKETS,
};

#[derive(Debug, Error)]
pub enum EligibilityError {
    #[error("no eligibility rule configured for mode `{0}`")]
    MissingRule(Mode),
    #[error("rule for `{mode}`: {message}")]
    InvalidRule { mode: Mode, message: String },
    #[error("duplicate rule for mode `{0}`")]
    DuplicateRule(Mode),
    #[error("wfh table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Zone(#[from] PopulationError),
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Constraints for one mode. Omitted fields are unconstrained; all bounds are
/// inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilityRule {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_home_regions: Option<BTreeSet<Region>>,
    #[serde(default)]
    pub requires_bike_accessible: bool,
    #[serde(default)]
    pub excludes_disability: bool,
}

impl EligibilityRule {
    pub fn unconstrained(mode: Mode) -> Self {
        Self {
            mode,
            min_age: None,
            max_age: None,
            max_distance_km: None,
            allowed_home_regions: None,
            requires_bike_accessible: false,
            excludes_disability: false,
        }
    }

    pub fn validate(&self) -> Result<(), EligibilityError> {
        let err = |message: String| EligibilityError::InvalidRule { mode: self.mode, message };
        if let (Some(lo), Some(hi)) = (self.min_age, self.max_age) {
            if lo > hi {
                return Err(err(format!("min_age {lo} > max_age {hi}")));
            }
        }
        if let Some(d) = self.max_distance_km {
            if !(d.is_finite() && d > 0.0) {
                return Err(err(format!("max_distance_km must be > 0, found {d}")));
            }
        }
        Ok(())
    }

    fn admits(&self, ind: &Individual, home_region: Region, home_bike_accessible: bool, distance_km: f64) -> bool {
        self.min_age.is_none_or(|lo| ind.age >= lo)
            && self.max_age.is_none_or(|hi| ind.age <= hi)
            && self.max_distance_km.is_none_or(|d| distance_km <= d)
            && self.allowed_home_regions.as_ref().is_none_or(|r| r.contains(&home_region))
            && (!self.requires_bike_accessible || home_bike_accessible)
            && (!self.excludes_disability || !ind.has_disability)
    }
}

/// All configured rules plus the fallback mode that keeps choice sets
/// non-empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSet {
    rules: BTreeMap<Mode, EligibilityRule>,
    pub fallback: Option<Mode>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RuleSetDoc {
    Bare(Vec<EligibilityRule>),
    Full {
        rules: Vec<EligibilityRule>,
        #[serde(default = "default_fallback")]
        fallback: Option<Mode>,
    },
}

fn default_fallback() -> Option<Mode> {
    Some(Mode::Subway)
}

impl<'de> Deserialize<'de> for RuleSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (rules, fallback) = match RuleSetDoc::deserialize(d)? {
            RuleSetDoc::Bare(r) => (r, default_fallback()),
            RuleSetDoc::Full { rules, fallback } => (rules, fallback),
        };
        RuleSet::new(rules, fallback).map_err(serde::de::Error::custom)
    }
}

impl RuleSet {
    pub fn new(rules: Vec<EligibilityRule>, fallback: Option<Mode>) -> Result<Self, EligibilityError> {
        let mut map = BTreeMap::new();
        for r in rules {
            r.validate()?;
            let mode = r.mode;
            if map.insert(mode, r).is_some() {
                return Err(EligibilityError::DuplicateRule(mode));
            }
        }
        Ok(Self { rules: map, fallback })
    }

    pub fn from_json(text: &str) -> Result<Self, EligibilityError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses without invariant checks, returning every rule problem found.
    pub fn diagnose_json(text: &str) -> Result<Vec<EligibilityError>, serde_json::Error> {
        let rules = match serde_json::from_str::<serde_json::Value>(text)? {
            serde_json::Value::Array(a) => a,
            serde_json::Value::Object(mut o) => match o.remove("rules") {
                Some(serde_json::Value::Array(a)) => a,
                _ => Vec::new(),
            },
            _ => Vec::new(),
        };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in rules {
            let rule: EligibilityRule = serde_json::from_value(r)?;
            if let Err(e) = rule.validate() {
                out.push(e);
            }
            if !seen.insert(rule.mode) {
                out.push(EligibilityError::DuplicateRule(rule.mode));
            }
        }
        Ok(out)
    }

    pub fn get(&self, mode: Mode) -> Option<&EligibilityRule> {
        self.rules.get(&mode)
    }

    pub fn rules(&self) -> impl Iterator<Item = &EligibilityRule> {
        self.rules.values()
    }

    /// Replaces (or inserts) the rule for `rule.mode`.
    pub fn with_rule(mut self, rule: EligibilityRule) -> Result<Self, EligibilityError> {
        rule.validate()?;
        self.rules.insert(rule.mode, rule);
        Ok(self)
    }
}

/// True iff every constraint of `mode`'s rule holds (empty rule admits all).
pub fn is_eligible(
    ind: &Individual,
    mode: Mode,
    rules: &RuleSet,
    zones: &ZoneTable,
    distance_km: f64,
) -> Result<bool, EligibilityError> {
    let rule = rules.get(mode).ok_or(EligibilityError::MissingRule(mode))?;
    let home = zones.resolve(&ind.home_zone)?;
    Ok(rule.admits(ind, home.region, home.bike_accessible, distance_km))
}

/// Modes available to `ind`.
///
/// Every mode with a configured rule is tested. WFH is included when its
/// probability is positive and its rule (if any) admits the individual. If no
/// commuting mode survives, the fallback mode is added.
pub fn eligible_set(
    ind: &Individual,
    rules: &RuleSet,
    zones: &ZoneTable,
    p_wfh: f64,
) -> Result<BTreeSet<Mode>, EligibilityError> {
    let home = zones.resolve(&ind.home_zone)?;
    let work = zones.resolve(&ind.work_zone)?;
    let distance = commute_distance(home, work);
    let mut set: BTreeSet<Mode> = rules
        .rules
        .values()
        .filter(|r| r.mode != Mode::Wfh && r.admits(ind, home.region, home.bike_accessible, distance))
        .map(|r| r.mode)
        .collect();
    if set.is_empty() {
        if let Some(fb) = rules.fallback {
            set.insert(fb);
        }
    }
    let wfh_rule_ok = rules
        .get(Mode::Wfh)
        .is_none_or(|r| r.admits(ind, home.region, home.bike_accessible, distance));
    if p_wfh > 0.0 && wfh_rule_ok {
        set.insert(Mode::Wfh);
    }
    Ok(set)
}

/// Cell of raw survey counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WfhCount {
    pub wfh: f64,
    pub total: f64,
}

/// WFH probability by education (rows: not college, college) and income
/// bucket (columns 0..=6), with optional per-industry multipliers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WfhTable {
    pub p: [[f64; INCOME_BUCKETS]; 2],
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub industry_factor: BTreeMap<Industry, f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WfhDoc {
    Probabilities {
        probabilities: [[f64; INCOME_BUCKETS]; 2],
        #[serde(default)]
        industry_factor: BTreeMap<Industry, f64>,
    },
    Counts {
        counts: [[WfhCount; INCOME_BUCKETS]; 2],
        #[serde(default)]
        industry_factor: BTreeMap<Industry, f64>,
    },
}

impl<'de> Deserialize<'de> for WfhTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let table = match WfhDoc::deserialize(d)? {
            WfhDoc::Probabilities { probabilities, industry_factor } => {
                WfhTable::new(probabilities).map(|t| t.with_industry_factor(industry_factor))
            }
            WfhDoc::Counts { counts, industry_factor } => {
                WfhTable::from_counts(&counts).map(|t| t.with_industry_factor(industry_factor))
            }
        };
        table.map_err(serde::de::Error::custom)
    }
}

impl WfhTable {
    pub fn new(p: [[f64; INCOME_BUCKETS]; 2]) -> Result<Self, EligibilityError> {
        if let Some(v) = p.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EligibilityError::InvalidTable(format!("entry {v} is not a probability")));
        }
        Ok(Self { p, industry_factor: BTreeMap::new() })
    }

    pub fn constant(value: f64) -> Result<Self, EligibilityError> {
        Self::new([[value; INCOME_BUCKETS]; 2])
    }

    /// Builds ratios `wfh / total`. Empty cells take the pooled rate of their
    /// income column; if the whole column is empty, the overall rate.
    pub fn from_counts(counts: &[[WfhCount; INCOME_BUCKETS]; 2]) -> Result<Self, EligibilityError> {
        for c in counts.iter().flatten() {
            if !(c.wfh.is_finite() && c.total.is_finite()) || c.wfh < 0.0 || c.total < 0.0 || c.wfh > c.total {
                return Err(EligibilityError::InvalidTable(format!(
                    "count cell {{wfh: {}, total: {}}} needs 0 <= wfh <= total",
                    c.wfh, c.total
                )));
            }
        }
        let (all_wfh, all_total) = counts
            .iter()
            .flatten()
            .fold((0.0, 0.0), |(w, t), c| (w + c.wfh, t + c.total));
        let overall = if all_total > 0.0 { all_wfh / all_total } else { 0.0 };
        let mut p = [[0.0; INCOME_BUCKETS]; 2];
        for col in 0..INCOME_BUCKETS {
            let (cw, ct) = (counts[0][col].wfh + counts[1][col].wfh, counts[0][col].total + counts[1][col].total);
            let column = if ct > 0.0 { cw / ct } else { overall };
            for row in 0..2 {
                let c = counts[row][col];
                p[row][col] = if c.total > 0.0 { c.wfh / c.total } else { column };
            }
        }
        Self::new(p)
    }

    pub fn with_industry_factor(mut self, factor: BTreeMap<Industry, f64>) -> Self {
        self.industry_factor = factor;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, EligibilityError> {
        let t: Self = serde_json::from_str(text)?;
        if let Some(f) = t.industry_factor.values().find(|f| !(f.is_finite() && **f >= 0.0)) {
            return Err(EligibilityError::InvalidTable(format!("industry factor {f} must be >= 0")));
        }
        Ok(t)
    }

    /// `true` if every college entry is at least the matching non-college one.
    pub fn college_dominates(&self) -> bool {
        (0..INCOME_BUCKETS).all(|b| self.p[1][b] >= self.p[0][b])
    }
}

/// Table lookup for the individual's education and income, scaled by the
/// industry multiplier (1 when unset).
pub fn wfh_probability(ind: &Individual, table: &WfhTable) -> f64 {
    let row = match ind.education {
        Education::NotCollege => 0,
        Education::College => 1,
    };
    let bucket = usize::from(ind.income_bucket).min(INCOME_BUCKETS - 1);
    let factor = table.industry_factor.get(&ind.industry).copied().unwrap_or(1.0);
    (table.p[row][bucket] * factor).clamp(0.0, 1.0)
}

/// Default rules: only the e-bike constraints from the model description are
/// fixed; everything else is left to configuration.
pub fn default_rules() -> RuleSet {
    let ebike = EligibilityRule {
        max_age: Some(70),
        max_distance_km: Some(24.0),
        allowed_home_regions: Some(
            [Region::Bronx, Region::Queens, Region::Brooklyn, Region::NorthNj, Region::Manhattan].into(),
        ),
        requires_bike_accessible: true,
        ..EligibilityRule::unconstrained(Mode::Ebike)
    };
    let rules = Mode::ALL
        .iter()
        .map(|&m| if m == Mode::Ebike { ebike.clone() } else { EligibilityRule::unconstrained(m) })
        .collect();
    RuleSet::new(rules, Some(Mode::Subway)).expect("default rules are valid")
}
