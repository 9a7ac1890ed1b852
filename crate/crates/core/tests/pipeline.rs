use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use commute_grid::config::{self, RunConfig};
use commute_grid::demo;
use commute_grid::eligibility::{eligible_set, is_eligible, EligibilityRule, RuleSet, WfhTable};
use commute_grid::energy::Policy;
use commute_grid::pipeline::{write_artifacts, Inputs, PopulationSource, ScenarioSpec, Sources};
use commute_grid::population::{Dwelling, Education, Gender, Individual, Industry, Region, Zone, ZoneTable};
use commute_grid::report::shares;
use commute_grid::sampler::{
    assign_mode, build_scenario, Assignment, ChargeLocation, PresetName, Scenario, WeightVector, WfhLevel,
};
use commute_grid::{Category, Mode};
use commute_grid_testkit as tk;
use rand::Rng;

fn zone(id: &str, x: f64, region: Region) -> Zone {
    Zone { id: id.into(), centroid_x_km: x, centroid_y_km: 0.0, region, bike_accessible: true }
}

fn person(id: u64, age: u32, home: &str, work: &str) -> Individual {
    Individual {
        id,
        age,
        gender: Gender::Female,
        has_disability: false,
        education: Education::College,
        income_bucket: 3,
        industry: Industry::WhiteCollar,
        home_zone: home.into(),
        work_zone: work.into(),
        arrival_hour: 9,
        hours_per_week: 40.0,
        dwelling: Dwelling::Apartment,
        baseline_mode: Mode::Subway,
    }
}

fn line_zones() -> ZoneTable {
    ZoneTable::new(vec![
        zone("HOME", 0.0, Region::Manhattan),
        zone("AT24", 24.0, Region::Manhattan),
        zone("PAST24", 24.01, Region::Manhattan),
        zone("NEAR", 5.0, Region::Manhattan),
        zone("FAR", 30.0, Region::Manhattan),
    ])
    .unwrap()
}

fn demo_rules() -> RuleSet {
    RuleSet::from_json(demo::RULES_JSON).unwrap()
}

#[test]
fn ebike_age_boundary_is_inclusive() {
    let zones = line_zones();
    let rules = demo_rules();
    assert!(is_eligible(&person(1, 70, "HOME", "NEAR"), Mode::Ebike, &rules, &zones, 5.0).unwrap());
    assert!(!is_eligible(&person(2, 71, "HOME", "NEAR"), Mode::Ebike, &rules, &zones, 5.0).unwrap());
}

#[test]
fn ebike_distance_boundary_is_inclusive() {
    let zones = line_zones();
    let rules = demo_rules();
    let at = person(1, 30, "HOME", "AT24");
    let past = person(2, 30, "HOME", "PAST24");
    assert!(eligible_set(&at, &rules, &zones, 0.0).unwrap().contains(&Mode::Ebike));
    assert!(!eligible_set(&past, &rules, &zones, 0.0).unwrap().contains(&Mode::Ebike));
    assert!(is_eligible(&at, Mode::Ebike, &rules, &zones, 24.0).unwrap());
    assert!(!is_eligible(&past, Mode::Ebike, &rules, &zones, 24.01).unwrap());
}

#[test]
fn fallback_keeps_choice_set_non_empty() {
    let zones = line_zones();
    let only_young = EligibilityRule { max_age: Some(20), ..EligibilityRule::unconstrained(Mode::Ebike) };
    let rules = RuleSet::new(vec![only_young], Some(Mode::Subway)).unwrap();
    let set = eligible_set(&person(1, 50, "HOME", "NEAR"), &rules, &zones, 0.0).unwrap();
    assert_eq!(set, BTreeSet::from([Mode::Subway]));
    let set = eligible_set(&person(1, 50, "HOME", "NEAR"), &rules, &zones, 0.3).unwrap();
    assert_eq!(set, BTreeSet::from([Mode::Subway, Mode::Wfh]));
}

#[test]
fn inverted_age_bounds_are_rejected() {
    let bad = EligibilityRule { min_age: Some(60), max_age: Some(30), ..EligibilityRule::unconstrained(Mode::Walk) };
    assert!(RuleSet::new(vec![bad], None).is_err());
}

#[test]
fn equal_weight_two_mode_draws_are_balanced() {
    let eligible = BTreeSet::from([Mode::Subway, Mode::PrivateEv]);
    let mut rng = tk::rng(11);
    let n = 100_000;
    let subway = (0..n)
        .filter(|_| assign_mode(&eligible, &WeightVector::EQUAL, 0.0, &mut rng).unwrap() == Mode::Subway)
        .count();
    let share = subway as f64 / n as f64;
    assert!((share - 0.5).abs() <= 0.01, "{share}");
}

fn uniform_population(n: u64) -> Vec<Individual> {
    (0..n).map(|i| person(i, 30, "HOME", "NEAR")).collect()
}

fn no_wfh() -> WfhTable {
    WfhTable::new([[0.0; 7]; 2]).unwrap()
}

#[test]
fn scenario_sampling_matches_weights_over_population() {
    let zones = line_zones();
    let rules = RuleSet::new(
        vec![EligibilityRule::unconstrained(Mode::Subway), EligibilityRule::unconstrained(Mode::PrivateEv)],
        None,
    )
    .unwrap();
    let pop = uniform_population(100_000);
    let scn = build_scenario(
        &pop,
        &zones,
        &rules,
        &no_wfh(),
        &WeightVector::EQUAL,
        WfhLevel::Medium,
        "equal",
        5,
        &Default::default(),
    )
    .unwrap();
    let ev = scn.assignments.iter().filter(|a| a.mode == Mode::PrivateEv).count() as f64 / pop.len() as f64;
    assert!((ev - 0.5).abs() <= 0.01, "{ev}");
}

#[test]
fn zero_weight_modes_are_never_drawn() {
    let zones = line_zones();
    let pop = uniform_population(20_000);
    let wfh = WfhTable::new([[0.4; 7]; 2]).unwrap();
    let weights = WeightVector { transit: 1.0, car: 2.0, micromobility: 0.0, wfh: 0.0 };
    let scn = build_scenario(&pop, &zones, &demo_rules(), &wfh, &weights, WfhLevel::High, "z", 9, &Default::default())
        .unwrap();
    for a in &scn.assignments {
        let c = a.mode.category();
        assert!(c != Category::Micromobility && c != Category::Wfh, "{:?}", a.mode);
    }
    let mut rng = tk::rng(3);
    let eligible = BTreeSet::from([Mode::Subway, Mode::Ebike, Mode::Wfh]);
    let w = WeightVector { transit: 0.0, car: 0.0, micromobility: 1.0, wfh: 1.0 };
    for _ in 0..10_000 {
        let p_wfh = rng.random_range(0.0..1.0);
        assert_ne!(assign_mode(&eligible, &w, p_wfh, &mut rng).unwrap(), Mode::Subway);
    }
}

fn small_inputs(n: usize, seed: u64) -> Inputs {
    let mut src: Sources = demo::sources();
    src.population = PopulationSource::Synthesis { params: demo::SYNTHESIS_JSON.to_string(), n, seed };
    Inputs::from_sources(&src, demo::config().settings()).unwrap()
}

#[test]
fn sampling_is_independent_of_population_order() {
    let inputs = small_inputs(2_000, 1);
    let spec = ScenarioSpec::preset(PresetName::Mix, WfhLevel::Medium, 77);
    let a = inputs.scenario(&spec).unwrap();
    let mut shuffled = inputs.clone();
    shuffled.population.reverse();
    let b = shuffled.scenario(&spec).unwrap();
    let (a, b) = (a.by_id(), b.by_id());
    assert_eq!(a.len(), b.len());
    for (id, x) in &a {
        assert_eq!(x, &b[id]);
    }
    let again = inputs.scenario(&spec).unwrap();
    assert_eq!(again.by_id(), a);
}

#[test]
fn daily_energy_is_equal_across_policies_for_random_scenarios() {
    let inputs = small_inputs(800, 4);
    let mut rng = tk::rng(2024);
    let levels = [WfhLevel::High, WfhLevel::Medium, WfhLevel::Zero];
    for k in 0..100 {
        let weights = WeightVector {
            transit: rng.random_range(0.0..5.0),
            car: rng.random_range(0.0..5.0),
            micromobility: rng.random_range(0.0..5.0),
            wfh: rng.random_range(0.0..5.0),
        };
        let spec = ScenarioSpec {
            name: None,
            preset: None,
            weights: Some(weights),
            wfh_level: levels[k % 3],
            seed: rng.random(),
        };
        let scn = inputs.scenario(&spec).unwrap();
        let (profiles, _) = inputs.profiles(&scn, &Policy::ALL).unwrap();
        let e: Vec<f64> = Policy::ALL.iter().map(|p| profiles[p].daily_energy_kwh()).collect();
        assert!((e[0] - e[1]).abs() <= 1e-6 && (e[0] - e[2]).abs() <= 1e-6, "scenario {k}: {e:?}");
        let peaks: Vec<f64> = Policy::ALL.iter().map(|p| profiles[p].peak().1).collect();
        assert!(peaks[2] <= peaks[0].min(peaks[1]) + 1e-9, "scenario {k}: {peaks:?}");
    }
}

#[test]
fn share_maps_sum_to_one() {
    let inputs = small_inputs(3_000, 8);
    for preset in PresetName::ALL {
        for level in [WfhLevel::High, WfhLevel::Medium, WfhLevel::Zero] {
            let scn = inputs.scenario(&ScenarioSpec::preset(preset, level, 3)).unwrap();
            let s = shares(&scn, &inputs.population, &inputs.zones).unwrap();
            let t: f64 = s.by_trips.values().sum();
            let d: f64 = s.by_distance.values().sum();
            assert!((t - 1.0).abs() <= 1e-9 && (d - 1.0).abs() <= 1e-9, "{preset} {level:?}: {t} {d}");
            assert_eq!(s.by_trips.len(), 4);
            assert_eq!(s.by_distance[&Category::Wfh], 0.0);
        }
    }
}

#[test]
fn long_car_trips_weigh_more_by_distance() {
    let zones = line_zones();
    let pop = vec![person(1, 40, "HOME", "FAR"), person(2, 40, "HOME", "NEAR"), person(3, 40, "HOME", "NEAR")];
    let assign = |id, mode| Assignment { individual_id: id, mode, charge_location: ChargeLocation::None };
    let scn = Scenario {
        name: "long car".into(),
        wfh_level: WfhLevel::Medium,
        seed: 0,
        weights: None,
        assignments: vec![assign(1, Mode::PrivateEv), assign(2, Mode::Subway), assign(3, Mode::Subway)],
    };
    let s = shares(&scn, &pop, &zones).unwrap();
    let car_trips = s.by_trips[&Category::Car];
    let car_dist = s.by_distance[&Category::Car];
    assert!((car_trips - 1.0 / 3.0).abs() < 1e-12);
    assert!((car_dist - 30.0 / 40.0).abs() < 1e-12);
    assert!(car_dist > car_trips);
}

#[test]
fn demo_peak_ordering_under_earliest() {
    let inputs = Inputs::from_sources(&demo::sources(), demo::config().settings()).unwrap();
    assert_eq!(inputs.population.len(), 10_000);
    let peak = |p: PresetName| {
        let scn = inputs.scenario(&ScenarioSpec::preset(p, WfhLevel::Medium, 42)).unwrap();
        let (profiles, _) = inputs.profiles(&scn, &[Policy::Earliest]).unwrap();
        profiles[&Policy::Earliest].peak().1
    };
    let car = peak(PresetName::CarFocused);
    let mix = peak(PresetName::Mix);
    let transit = peak(PresetName::TransitFocused);
    let micro = peak(PresetName::MicromobilityFocused);
    assert!(car > mix && mix > transit, "car {car} mix {mix} transit {transit}");
    assert!(mix > micro, "mix {mix} micromobility {micro}");
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let inputs = small_inputs(1_500, 2);
    let (env, _) = inputs.capacity(0.0).unwrap();
    let spec = ScenarioSpec::preset(PresetName::CarFocused, WfhLevel::Medium, 42);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let eval = inputs.evaluate(&spec, &Policy::ALL, &env).unwrap();
        write_artifacts(d.path(), &eval, &env).unwrap();
    }
    let (a, b) = (tk::hash_dir(dirs[0].path()), tk::hash_dir(dirs[1].path()));
    assert!(a.len() >= 9, "{a:?}");
    assert_eq!(a, b);
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_tree(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

/// A writable copy of the bundled data; returns the demo config path.
fn data_copy(dir: &Path) -> PathBuf {
    copy_tree(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"), dir);
    dir.join("demo/config.json")
}

fn edit_config(path: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    std::fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

#[test]
fn bundled_config_validates_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    assert_eq!(config::validate(&cfg), vec![]);
    let loaded = RunConfig::load(&cfg).unwrap();
    assert_eq!(loaded.scenario.preset, Some(PresetName::CarFocused));
}

#[test]
fn all_zero_weights_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    edit_config(&cfg, |v| {
        v["scenario"] = serde_json::json!({
            "weights": {"transit": 0, "car": 0, "micromobility": 0, "wfh": 0},
            "seed": 1
        });
    });
    let d = config::validate(&cfg);
    assert!(d.iter().any(|d| d.field == "scenario.weights"), "{d:?}");
}

#[test]
fn inverted_age_rule_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    let rules = dir.path().join("demo/rules.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rules).unwrap()).unwrap();
    v["rules"].as_array_mut().unwrap().push(serde_json::json!({"mode": "motorcycle", "min_age": 65, "max_age": 18}));
    std::fs::write(&rules, v.to_string()).unwrap();
    let d = config::validate(&cfg);
    assert!(d.iter().any(|d| d.field == "rules" && d.message.contains("motorcycle")), "{d:?}");
}

#[test]
fn missing_network_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    edit_config(&cfg, |v| v["network"] = "../networks/nowhere".into());
    let d = config::validate(&cfg);
    assert!(d.iter().any(|d| d.field == "network" && d.message.contains("nowhere")), "{d:?}");
    let err = RunConfig::load(&cfg).unwrap().sources().unwrap_err().to_string();
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn unknown_config_field_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    edit_config(&cfg, |v| v["scenario"]["wfh_level"] = "sometimes".into());
    let d = config::validate(&cfg);
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(d[0].field, "scenario.wfh_level");
}

#[test]
fn wfh_level_zero_removes_wfh() {
    let inputs = small_inputs(2_000, 5);
    let scn = inputs.scenario(&ScenarioSpec::preset(PresetName::Mix, WfhLevel::Zero, 1)).unwrap();
    assert!(scn.assignments.iter().all(|a| a.mode != Mode::Wfh));
    let high = inputs.scenario(&ScenarioSpec::preset(PresetName::Mix, WfhLevel::High, 1)).unwrap();
    let count = |s: &Scenario| s.assignments.iter().filter(|a| a.mode == Mode::Wfh).count();
    let medium = inputs.scenario(&ScenarioSpec::preset(PresetName::Mix, WfhLevel::Medium, 1)).unwrap();
    assert!(count(&high) > count(&medium) && count(&medium) > 0);
}

#[test]
fn baseline_copies_surveyed_modes() {
    let inputs = small_inputs(1_000, 6);
    let scn = inputs.scenario(&ScenarioSpec::preset(PresetName::Baseline2019, WfhLevel::Medium, 1)).unwrap();
    let surveyed: BTreeMap<u64, Mode> = inputs.population.iter().map(|i| (i.id, i.baseline_mode)).collect();
    for a in &scn.assignments {
        assert_eq!(a.mode, surveyed[&a.individual_id]);
    }
}
