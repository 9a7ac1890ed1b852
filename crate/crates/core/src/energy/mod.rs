//! Scenario to hourly electric demand.
//!
//! Battery modes become [`ChargeTask`]s that a charging [`Policy`] places
//! inside their availability windows; rail-like modes draw power while
//! moving and are accounted by [`transit_load`].

mod profile;
mod schedule;

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use profile::{LoadProfile, HOURS};
pub use schedule::{add_task_load, plan, plan_over, profile_from_offsets, schedule, schedule_over, task_load, Policy};

use crate::mode::Mode;
use crate::population::{individual_distance, Individual, PopulationError, Region, ZoneTable};
use crate::sampler::{ChargeLocation, Scenario};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("mode spec row {row}: {message}")]
    SpecRow { row: usize, message: String },
    #[error("mode spec for `{mode}`: {message}")]
    InvalidSpec { mode: Mode, message: String },
    #[error("no mode spec for `{0}`")]
    MissingSpec(Mode),
    #[error("`{0}` is not battery charged")]
    NotBatteryCharged(Mode),
    #[error("transit spec: {0}")]
    InvalidTransit(String),
    #[error("charging config: {0}")]
    InvalidCharging(String),
    #[error("scenario references unknown individual {0}")]
    UnknownIndividual(u64),
    #[error(transparent)]
    Zone(#[from] PopulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    /// Charged after use from a battery.
    BatteryCharged,
    /// Draws power while moving (subway, commuter rail).
    AtMotion,
    NoEnergy,
}

/// Technical parameters of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: Mode,
    pub range_km: f64,
    pub efficiency_kwh_per_km: f64,
    pub charge_power_kw: f64,
    pub kind: EnergyKind,
    /// Placeholder value rather than a sourced figure.
    #[serde(default)]
    pub assumption: bool,
}

impl ModeSpec {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let err = |message: &str| EnergyError::InvalidSpec { mode: self.mode, message: message.into() };
        let numbers = [self.range_km, self.efficiency_kwh_per_km, self.charge_power_kw];
        if numbers.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(err("numeric fields must be finite and >= 0"));
        }
        if self.kind == EnergyKind::BatteryCharged && numbers.iter().any(|v| *v <= 0.0) {
            return Err(err("battery-charged specs need positive range, efficiency and charge power"));
        }
        match (self.mode, self.kind) {
            (Mode::Walk, k) if k != EnergyKind::NoEnergy => Err(err("walk must be no_energy")),
            (Mode::Wfh, k) if k != EnergyKind::NoEnergy => Err(err("wfh must be no_energy")),
            (Mode::Subway | Mode::Rail, k) if k != EnergyKind::AtMotion => Err(err("subway and rail must be at_motion")),
            _ => Ok(()),
        }
    }
}

pub const MODE_SPEC_HEADER: [&str; 5] = ["mode", "range_km", "efficiency_kwh_per_km", "charge_power_kw", "kind"];

/// Specs keyed by mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSpecTable(pub BTreeMap<Mode, ModeSpec>);

impl ModeSpecTable {
    pub fn new(specs: Vec<ModeSpec>) -> Result<Self, EnergyError> {
        let mut map = BTreeMap::new();
        for s in specs {
            s.validate()?;
            let mode = s.mode;
            if map.insert(mode, s).is_some() {
                return Err(EnergyError::InvalidSpec { mode, message: "duplicate row".into() });
            }
        }
        Ok(Self(map))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, EnergyError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|source| EnergyError::Io { path: path.display().to_string(), source })?;
        Self::from_reader(f)
    }

    /// Reads `mode,range_km,efficiency_kwh_per_km,charge_power_kw,kind`, with an
    /// optional trailing `assumption` column (0/1).
    pub fn from_reader(reader: impl Read) -> Result<Self, EnergyError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let with_flag = header.len() == 6 && header[5] == "assumption";
        if header[..header.len().min(5)] != MODE_SPEC_HEADER || !(header.len() == 5 || with_flag) {
            return Err(EnergyError::SpecRow { row: 0, message: format!("unexpected header `{}`", header.join(",")) });
        }
        let mut specs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let bad = |message: String| EnergyError::SpecRow { row, message };
            let mode: Mode = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
            let num = |idx: usize| rec[idx].parse::<f64>().map_err(|_| bad(format!("`{}` is not a number", &rec[idx])));
            let kind: EnergyKind = serde_json::from_value(serde_json::Value::String(rec[4].to_ascii_lowercase()))
                .map_err(|_| bad(format!("unknown kind `{}`", &rec[4])))?;
            let assumption = with_flag && rec.get(5) == Some("1");
            specs.push(ModeSpec {
                mode,
                range_km: num(1)?,
                efficiency_kwh_per_km: num(2)?,
                charge_power_kw: num(3)?,
                kind,
                assumption,
            });
        }
        Self::new(specs)
    }

    pub fn get(&self, mode: Mode) -> Option<&ModeSpec> {
        self.0.get(&mode)
    }

    /// WFH needs no row; every other mode must be present.
    pub fn kind(&self, mode: Mode) -> Result<EnergyKind, EnergyError> {
        if mode == Mode::Wfh {
            return Ok(EnergyKind::NoEnergy);
        }
        self.get(mode).map(|s| s.kind).ok_or(EnergyError::MissingSpec(mode))
    }
}

/// Fixed hourly rail consumption plus a per-rider increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitSpec {
    #[serde(rename = "fixed_kw_per_hour")]
    pub fixed_kw: [f64; HOURS],
    pub per_rider_kwh: f64,
    #[serde(default)]
    pub assumption: bool,
}

impl TransitSpec {
    pub fn zero() -> Self {
        Self { fixed_kw: [0.0; HOURS], per_rider_kwh: 0.0, assumption: false }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.fixed_kw.iter().chain([&self.per_rider_kwh]).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EnergyError::InvalidTransit("all values must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EnergyError> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }
}

/// Knobs for charge location and fleet accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChargingConfig {
    pub home_prob_single_family: f64,
    pub home_prob_apartment: f64,
    /// Extra distance factor for taxis driving empty between fares.
    pub taxi_deadhead_multiplier: f64,
    /// One-way travel time in whole hours.
    pub travel_hours: u8,
}

impl Default for ChargingConfig {
    fn default() -> Self {
        Self {
            home_prob_single_family: 0.8,
            home_prob_apartment: 0.3,
            taxi_deadhead_multiplier: 1.0,
            travel_hours: 1,
        }
    }
}

impl ChargingConfig {
    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, p) in [
            ("home_prob_single_family", self.home_prob_single_family),
            ("home_prob_apartment", self.home_prob_apartment),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EnergyError::InvalidCharging(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.taxi_deadhead_multiplier.is_finite() && self.taxi_deadhead_multiplier >= 1.0) {
            return Err(EnergyError::InvalidCharging("taxi_deadhead_multiplier must be >= 1".into()));
        }
        if self.travel_hours > 4 {
            return Err(EnergyError::InvalidCharging("travel_hours must be at most 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLocation {
    Home,
    Work,
    /// Fleet vehicles (buses, taxis) charging between the commute peaks.
    Depot,
}

/// Energy one vehicle must receive within a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeTask {
    pub individual_id: u64,
    pub mode: Mode,
    pub energy_kwh: f64,
    pub power_kw: f64,
    pub window_start_hour: u8,
    /// Exclusive; may be earlier than the start when the window wraps.
    pub window_end_hour: u8,
    pub location: TaskLocation,
}

impl ChargeTask {
    /// Window length in hours, 1..=24.
    pub fn window_len(&self) -> u8 {
        let len = (i16::from(self.window_end_hour) - i16::from(self.window_start_hour)).rem_euclid(24) as u8;
        if len == 0 {
            24
        } else {
            len
        }
    }
}

/// Per-trip energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripEnergy {
    pub kwh: f64,
    pub requested_kwh: f64,
    /// Travelled distance exceeded the vehicle range; `kwh` is capped at a
    /// full battery.
    pub range_exceeded: bool,
}

pub fn trip_energy(spec: &ModeSpec, distance_km: f64, round_trip: bool) -> Result<TripEnergy, EnergyError> {
    if spec.kind != EnergyKind::BatteryCharged {
        return Err(EnergyError::NotBatteryCharged(spec.mode));
    }
    let travelled = distance_km * if round_trip { 2.0 } else { 1.0 };
    let requested = travelled * spec.efficiency_kwh_per_km;
    let range_exceeded = travelled > spec.range_km;
    let kwh = if range_exceeded { spec.range_km * spec.efficiency_kwh_per_km } else { requested };
    Ok(TripEnergy { kwh, requested_kwh: requested, range_exceeded })
}

/// Something the energy model had to clamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum EnergyIssue {
    RangeExceeded { individual_id: u64, mode: Mode, distance_km: f64, requested_kwh: f64, delivered_kwh: f64 },
    WindowShortfall { individual_id: u64, mode: Mode, requested_kwh: f64, delivered_kwh: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub tasks: Vec<ChargeTask>,
    pub issues: Vec<EnergyIssue>,
}

fn wrap(h: i16) -> u8 {
    h.rem_euclid(24) as u8
}

fn index_population(pop: &[Individual]) -> HashMap<u64, &Individual> {
    pop.iter().map(|p| (p.id, p)).collect()
}

/// Builds charging tasks for every battery-charged trip in the scenario.
///
/// Personal vehicles charge once per day for the round trip, at home or at
/// work. Buses count only for riders living in Manhattan and, like taxis,
/// charge at the depot between the commute peaks.
pub fn build_charge_tasks(
    scn: &Scenario,
    pop: &[Individual],
    zones: &ZoneTable,
    specs: &ModeSpecTable,
    charging: &ChargingConfig,
) -> Result<TaskSet, EnergyError> {
    let by_id = index_population(pop);
    let travel = i16::from(charging.travel_hours);
    let per_individual = scn
        .assignments
        .par_iter()
        .map(|a| -> Result<Option<(ChargeTask, Vec<EnergyIssue>)>, EnergyError> {
            let ind = *by_id.get(&a.individual_id).ok_or(EnergyError::UnknownIndividual(a.individual_id))?;
            if specs.kind(a.mode)? != EnergyKind::BatteryCharged {
                return Ok(None);
            }
            let spec = specs.get(a.mode).ok_or(EnergyError::MissingSpec(a.mode))?;
            let arrival = i16::from(ind.arrival_hour);
            let departure = arrival + i16::from(ind.daily_hours());
            let (location, start, len) = match (a.mode, a.charge_location) {
                (Mode::Bus, _) => {
                    if zones.resolve(&ind.home_zone)?.region != Region::Manhattan {
                        return Ok(None);
                    }
                    (TaskLocation::Depot, arrival, departure - arrival)
                }
                (Mode::Taxi, _) => (TaskLocation::Depot, arrival, departure - arrival),
                (_, ChargeLocation::Home) => {
                    let len = (24 - (departure - arrival) - 2 * travel).max(1);
                    (TaskLocation::Home, departure + travel, len)
                }
                (_, ChargeLocation::Work | ChargeLocation::None) => (TaskLocation::Work, arrival, departure - arrival),
            };
            let mut distance = individual_distance(ind, zones)?;
            if a.mode == Mode::Taxi {
                distance *= charging.taxi_deadhead_multiplier;
            }
            let trip = trip_energy(spec, distance, true)?;
            let mut issues = Vec::new();
            if trip.range_exceeded {
                issues.push(EnergyIssue::RangeExceeded {
                    individual_id: ind.id,
                    mode: a.mode,
                    distance_km: distance,
                    requested_kwh: trip.requested_kwh,
                    delivered_kwh: trip.kwh,
                });
            }
            let capacity = spec.charge_power_kw * f64::from(len);
            let energy = if trip.kwh > capacity {
                issues.push(EnergyIssue::WindowShortfall {
                    individual_id: ind.id,
                    mode: a.mode,
                    requested_kwh: trip.kwh,
                    delivered_kwh: capacity,
                });
                capacity
            } else {
                trip.kwh
            };
            Ok(Some((
                ChargeTask {
                    individual_id: ind.id,
                    mode: a.mode,
                    energy_kwh: energy,
                    power_kw: spec.charge_power_kw,
                    window_start_hour: wrap(start),
                    window_end_hour: wrap(start + len),
                    location,
                },
                issues,
            )))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut set = TaskSet::default();
    for (task, issues) in per_individual.into_iter().flatten() {
        set.tasks.push(task);
        set.issues.extend(issues);
    }
    Ok(set)
}

/// Fixed rail load plus half of `per_rider_kwh` in the hour before arrival
/// and half in the departure hour, for every rider of an at-motion mode.
pub fn transit_load(
    scn: &Scenario,
    pop: &[Individual],
    specs: &ModeSpecTable,
    tspec: &TransitSpec,
    charging: &ChargingConfig,
) -> Result<LoadProfile, EnergyError> {
    let by_id = index_population(pop);
    let travel = i16::from(charging.travel_hours.max(1));
    let mut riders = [0u64; HOURS];
    for a in &scn.assignments {
        if specs.kind(a.mode)? != EnergyKind::AtMotion {
            continue;
        }
        let ind = by_id.get(&a.individual_id).ok_or(EnergyError::UnknownIndividual(a.individual_id))?;
        let arrival = i16::from(ind.arrival_hour);
        let departure = arrival + i16::from(ind.daily_hours());
        riders[usize::from(wrap(arrival - travel))] += 1;
        riders[usize::from(wrap(departure))] += 1;
    }
    let mut kw = tspec.fixed_kw;
    for h in 0..HOURS {
        kw[h] += riders[h] as f64 * tspec.per_rider_kwh / 2.0;
    }
    Ok(LoadProfile::from_kw(&kw, &[0.0; HOURS], &[0.0; HOURS]))
}

/// Scheduled charging plus transit load.
pub fn scenario_demand(
    scn: &Scenario,
    pop: &[Individual],
    zones: &ZoneTable,
    specs: &ModeSpecTable,
    tspec: &TransitSpec,
    charging: &ChargingConfig,
    policy: Policy,
) -> Result<LoadProfile, EnergyError> {
    let tasks = build_charge_tasks(scn, pop, zones, specs, charging)?;
    let transit = transit_load(scn, pop, specs, tspec, charging)?;
    Ok(schedule_over(&tasks.tasks, policy, &transit))
}

pub const DEFAULT_MODE_SPECS_CSV: &str = include_str!("../../data/mode_specs.csv");
pub const DEFAULT_TRANSIT_JSON: &str = include_str!("../../data/transit.json");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{Dwelling, Education, Gender, Industry, Zone};
    use crate::sampler::{Assignment, WfhLevel};

    fn ev() -> ModeSpec {
        ModeSpec {
            mode: Mode::PrivateEv,
            range_km: 300.0,
            efficiency_kwh_per_km: 0.2,
            charge_power_kw: 10.0,
            kind: EnergyKind::BatteryCharged,
            assumption: false,
        }
    }

    #[test]
    fn trip_energy_examples() {
        assert!((trip_energy(&ev(), 10.0, true).unwrap().kwh - 4.0).abs() < 1e-12);
        assert_eq!(trip_energy(&ev(), 0.0, true).unwrap().kwh, 0.0);
        let far = trip_energy(&ev(), 400.0, true).unwrap();
        assert!(far.range_exceeded);
        assert_eq!(far.kwh, 60.0);
        let walk = ModeSpec { mode: Mode::Walk, kind: EnergyKind::NoEnergy, ..ev() };
        assert!(trip_energy(&walk, 1.0, false).is_err());
    }

    #[test]
    fn bundled_specs_parse() {
        let t = ModeSpecTable::from_reader(DEFAULT_MODE_SPECS_CSV.as_bytes()).unwrap();
        assert_eq!(t.kind(Mode::Walk).unwrap(), EnergyKind::NoEnergy);
        assert_eq!(t.kind(Mode::Subway).unwrap(), EnergyKind::AtMotion);
        assert_eq!(t.kind(Mode::PrivateEv).unwrap(), EnergyKind::BatteryCharged);
        TransitSpec::from_json(DEFAULT_TRANSIT_JSON).unwrap();
    }

    #[test]
    fn spec_invariants() {
        let bad = "mode,range_km,efficiency_kwh_per_km,charge_power_kw,kind\nwalk,0,0,0,battery_charged\n";
        assert!(ModeSpecTable::from_reader(bad.as_bytes()).is_err());
        let bad = "mode,range_km,efficiency_kwh_per_km,charge_power_kw,kind\nsubway,0,0,0,no_energy\n";
        assert!(ModeSpecTable::from_reader(bad.as_bytes()).is_err());
        let bad = "mode,range_km,efficiency_kwh_per_km,charge_power_kw,kind\nprivate_ev,300,0,7,battery_charged\n";
        assert!(ModeSpecTable::from_reader(bad.as_bytes()).is_err());
    }

    fn fixture() -> (Vec<Individual>, ZoneTable) {
        let zones = ZoneTable::new(vec![
            Zone { id: "M".into(), centroid_x_km: 0.0, centroid_y_km: 0.0, region: Region::Manhattan, bike_accessible: true },
            Zone { id: "Q".into(), centroid_x_km: 6.0, centroid_y_km: 8.0, region: Region::Queens, bike_accessible: true },
        ])
        .unwrap();
        let base = Individual {
            id: 1,
            age: 35,
            gender: Gender::Female,
            has_disability: false,
            education: Education::College,
            income_bucket: 3,
            industry: Industry::WhiteCollar,
            home_zone: "Q".into(),
            work_zone: "M".into(),
            arrival_hour: 9,
            hours_per_week: 40.0,
            dwelling: Dwelling::Apartment,
            baseline_mode: Mode::PrivateEv,
        };
        let pop = vec![
            base.clone(),
            Individual { id: 2, baseline_mode: Mode::Ebike, ..base.clone() },
            Individual { id: 3, baseline_mode: Mode::Bus, ..base.clone() },
            Individual { id: 4, baseline_mode: Mode::Bus, home_zone: "M".into(), ..base.clone() },
            Individual { id: 5, baseline_mode: Mode::Subway, ..base.clone() },
        ];
        (pop, zones)
    }

    fn scenario(modes: &[(Mode, ChargeLocation)]) -> Scenario {
        Scenario {
            name: "t".into(),
            wfh_level: WfhLevel::Medium,
            seed: 0,
            weights: None,
            assignments: modes
                .iter()
                .enumerate()
                .map(|(i, &(mode, charge_location))| Assignment { individual_id: i as u64 + 1, mode, charge_location })
                .collect(),
        }
    }

    fn specs() -> ModeSpecTable {
        ModeSpecTable::from_reader(DEFAULT_MODE_SPECS_CSV.as_bytes()).unwrap()
    }

    #[test]
    fn charge_task_windows() {
        let (pop, zones) = fixture();
        let scn = scenario(&[
            (Mode::PrivateEv, ChargeLocation::Work),
            (Mode::Ebike, ChargeLocation::Home),
            (Mode::Bus, ChargeLocation::None),
            (Mode::Bus, ChargeLocation::None),
            (Mode::Subway, ChargeLocation::None),
        ]);
        let set = build_charge_tasks(&scn, &pop, &zones, &specs(), &ChargingConfig::default()).unwrap();
        let ev = &set.tasks[0];
        assert_eq!((ev.window_start_hour, ev.window_end_hour, ev.location), (9, 17, TaskLocation::Work));
        let bike = &set.tasks[1];
        assert_eq!(bike.location, TaskLocation::Home);
        assert_eq!((bike.window_start_hour, bike.window_end_hour), (18, 8));
        // the Queens bus rider adds nothing; the Manhattan rider adds a depot task
        assert_eq!(set.tasks.len(), 3);
        assert_eq!(set.tasks[2].individual_id, 4);
        assert_eq!(set.tasks[2].location, TaskLocation::Depot);
    }

    #[test]
    fn short_window_is_clamped_and_reported() {
        let (mut pop, zones) = fixture();
        pop[0].hours_per_week = 5.0; // one hour at work
        let mut specs = specs();
        specs.0.insert(Mode::PrivateEv, ModeSpec { charge_power_kw: 2.0, ..ev() });
        let scn = scenario(&[(Mode::PrivateEv, ChargeLocation::Work)]);
        let set = build_charge_tasks(&scn, &pop[..1], &zones, &specs, &ChargingConfig::default()).unwrap();
        assert_eq!(set.tasks[0].energy_kwh, 2.0);
        assert!(matches!(set.issues[0], EnergyIssue::WindowShortfall { .. }));
    }

    #[test]
    fn transit_floor_and_linearity() {
        let (pop, _) = fixture();
        let mut tspec = TransitSpec::zero();
        tspec.fixed_kw = [1000.0; HOURS];
        tspec.per_rider_kwh = 2.0;
        let none = scenario(&[(Mode::Wfh, ChargeLocation::None)]);
        let p = transit_load(&none, &pop, &specs(), &tspec, &ChargingConfig::default()).unwrap();
        assert!(p.transit_mw.iter().all(|v| *v == 1.0));

        let riders: Vec<_> = (0..5).map(|_| (Mode::Subway, ChargeLocation::None)).collect();
        let scn = scenario(&riders);
        let p = transit_load(&scn, &pop, &specs(), &tspec, &ChargingConfig::default()).unwrap();
        assert!((p.daily_energy_kwh() - (24_000.0 + 10.0)).abs() < 1e-9);
        assert!((p.transit_mw[8] - 1.005).abs() < 1e-12);
        assert!((p.transit_mw[17] - 1.005).abs() < 1e-12);
    }

    #[test]
    fn all_wfh_is_transit_floor() {
        let (pop, zones) = fixture();
        let tspec = TransitSpec::from_json(DEFAULT_TRANSIT_JSON).unwrap();
        let scn = scenario(&[(Mode::Wfh, ChargeLocation::None); 5]);
        let d = scenario_demand(&scn, &pop, &zones, &specs(), &tspec, &ChargingConfig::default(), Policy::Earliest).unwrap();
        for h in 0..HOURS {
            assert!((d.total_mw[h] - tspec.fixed_kw[h] / 1000.0).abs() < 1e-12);
        }
    }
}
