//! DC network model and the additional-load capacity program.

mod audit;
mod capacity;
mod network;
mod projection;
mod ptdf;

use thiserror::Error;

pub use audit::audit;
pub use capacity::{
    capacity_envelope, max_additional_load, AuxConstraint, CapacityEnvelope, CapacityOptions, CapacityResult,
    HourSolution, Layout, LinearRow, ReserveMargin,
};
pub use network::{Bus, Generator, Line, Network, NetworkMeta};
pub use ptdf::{dc_flows, ptdf};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}: {message}")]
    Parse { file: &'static str, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("network is disconnected: {}", format_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("susceptance matrix is singular")]
    Singular,
    #[error("hour {hour}: base case without additional load is infeasible")]
    InfeasibleBaseCase { hour: usize },
    #[error("hour {hour}: additional load is unbounded (no limiting constraint)")]
    Unbounded { hour: usize },
}

fn format_components(c: &[Vec<String>]) -> String {
    c.iter().map(|g| format!("{{{}}}", g.join(", "))).collect::<Vec<_>>().join(" ")
}

/// Bundled networks.
pub mod fixtures {
    use super::Network;

    macro_rules! bundled {
        ($fn:ident, $raw:ident, $dir:literal) => {
            /// `meta.json`, `buses.csv`, `lines.csv`, `generators.csv`.
            pub const $raw: [&str; 4] = [
                include_str!(concat!("../../data/networks/", $dir, "/meta.json")),
                include_str!(concat!("../../data/networks/", $dir, "/buses.csv")),
                include_str!(concat!("../../data/networks/", $dir, "/lines.csv")),
                include_str!(concat!("../../data/networks/", $dir, "/generators.csv")),
            ];

            pub fn $fn() -> Network {
                let [m, b, l, g] = $raw;
                Network::from_strs(m, b, l, g).expect("bundled network is valid")
            }
        };
    }

    bundled!(two_bus, TWO_BUS, "two_bus");
    bundled!(three_bus, THREE_BUS, "three_bus");
    bundled!(six_bus, SIX_BUS, "six_bus");
    bundled!(symmetric_pair, SYMMETRIC_PAIR, "symmetric_pair");
}
