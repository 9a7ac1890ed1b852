//! Commute modes and their aggregate categories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Aggregate commute category used for weighting and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Transit,
    Car,
    Micromobility,
    Wfh,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Transit,
        Category::Car,
        Category::Micromobility,
        Category::Wfh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Transit => "transit",
            Category::Car => "car",
            Category::Micromobility => "micromobility",
            Category::Wfh => "wfh",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concrete commute mode. Every mode belongs to exactly one [`Category`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Subway,
    Rail,
    Bus,
    Ferry,
    #[serde(alias = "private_e_v", alias = "ev")]
    PrivateEv,
    Taxi,
    Motorcycle,
    #[serde(alias = "e_bike", alias = "bike")]
    Ebike,
    Walk,
    Scooter,
    Wfh,
}

impl Mode {
    pub const ALL: [Mode; 11] = [
        Mode::Subway,
        Mode::Rail,
        Mode::Bus,
        Mode::Ferry,
        Mode::PrivateEv,
        Mode::Taxi,
        Mode::Motorcycle,
        Mode::Ebike,
        Mode::Walk,
        Mode::Scooter,
        Mode::Wfh,
    ];

    pub fn category(self) -> Category {
        match self {
            Mode::Subway | Mode::Rail | Mode::Bus | Mode::Ferry => Category::Transit,
            Mode::PrivateEv | Mode::Taxi | Mode::Motorcycle => Category::Car,
            Mode::Ebike | Mode::Walk | Mode::Scooter => Category::Micromobility,
            Mode::Wfh => Category::Wfh,
        }
    }

    /// Modes whose commuter owns a battery that must be recharged after use.
    pub fn is_personal_battery(self) -> bool {
        matches!(
            self,
            Mode::PrivateEv | Mode::Ebike | Mode::Scooter | Mode::Motorcycle
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Subway => "subway",
            Mode::Rail => "rail",
            Mode::Bus => "bus",
            Mode::Ferry => "ferry",
            Mode::PrivateEv => "private_ev",
            Mode::Taxi => "taxi",
            Mode::Motorcycle => "motorcycle",
            Mode::Ebike => "ebike",
            Mode::Walk => "walk",
            Mode::Scooter => "scooter",
            Mode::Wfh => "wfh",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMode(pub String);

impl fmt::Display for UnknownMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown mode `{}`", self.0)
    }
}

impl std::error::Error for UnknownMode {}

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let mode = match norm.as_str() {
            "subway" => Mode::Subway,
            "rail" | "commuter_rail" => Mode::Rail,
            "bus" => Mode::Bus,
            "ferry" => Mode::Ferry,
            "private_ev" | "privateev" | "ev" | "car" => Mode::PrivateEv,
            "taxi" => Mode::Taxi,
            "motorcycle" => Mode::Motorcycle,
            "ebike" | "e_bike" | "bike" | "bicycle" => Mode::Ebike,
            "walk" => Mode::Walk,
            "scooter" => Mode::Scooter,
            "wfh" | "work_from_home" => Mode::Wfh,
            _ => return Err(UnknownMode(s.to_string())),
        };
        Ok(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_mode_has_one_category() {
        let transit: Vec<_> = Mode::ALL
            .iter()
            .filter(|m| m.category() == Category::Transit)
            .collect();
        assert_eq!(transit.len(), 4);
        assert_eq!(Mode::Wfh.category(), Category::Wfh);
        assert_eq!(Mode::Taxi.category(), Category::Car);
        assert_eq!(Mode::Scooter.category(), Category::Micromobility);
    }

    #[test]
    fn parse_round_trips_display() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("hovercraft".parse::<Mode>().is_err());
    }
}
