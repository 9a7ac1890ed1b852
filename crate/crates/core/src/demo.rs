//! Bundled demo dataset: a synthetic 10,000-person population commuting into
//! the designated buses of the six-bus network.

use crate::config::RunConfig;
use crate::energy::{DEFAULT_MODE_SPECS_CSV, DEFAULT_TRANSIT_JSON};
use crate::pipeline::{PopulationSource, Sources};

pub const CONFIG_JSON: &str = include_str!("../data/demo/config.json");
pub const ZONES_CSV: &str = include_str!("../data/demo/zones.csv");
pub const SYNTHESIS_JSON: &str = include_str!("../data/demo/synthesis.json");
pub const RULES_JSON: &str = include_str!("../data/demo/rules.json");
pub const WFH_JSON: &str = include_str!("../data/demo/wfh.json");

pub const POPULATION: usize = 10_000;
pub const POPULATION_SEED: u64 = 2019;

/// The demo config as shipped (paths relative to its own directory).
pub fn config() -> RunConfig {
    RunConfig::parse(CONFIG_JSON, "").expect("bundled config parses")
}

pub fn sources() -> Sources {
    let net = crate::grid::fixtures::SIX_BUS;
    Sources {
        zones: ZONES_CSV.to_string(),
        population: PopulationSource::Synthesis { params: SYNTHESIS_JSON.to_string(), n: POPULATION, seed: POPULATION_SEED },
        rules: RULES_JSON.to_string(),
        wfh_table: WFH_JSON.to_string(),
        mode_specs: DEFAULT_MODE_SPECS_CSV.to_string(),
        transit: DEFAULT_TRANSIT_JSON.to_string(),
        presets: None,
        network: net.map(str::to_string),
    }
}
