use serde::{Deserialize, Serialize};

use crate::mode::Category;

pub const HOURS: usize = 24;

/// Hourly electric demand in MW, split by commute category.
///
/// Each entry is the average power over that hour, so the sum of a row is
/// also the energy in MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub transit_mw: [f64; HOURS],
    pub car_mw: [f64; HOURS],
    pub micromobility_mw: [f64; HOURS],
    pub total_mw: [f64; HOURS],
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self::zero()
    }
}

impl LoadProfile {
    pub fn zero() -> Self {
        Self {
            transit_mw: [0.0; HOURS],
            car_mw: [0.0; HOURS],
            micromobility_mw: [0.0; HOURS],
            total_mw: [0.0; HOURS],
        }
    }

    /// Builds a profile from per-category kW arrays; WFH has no row.
    pub fn from_kw(transit: &[f64; HOURS], car: &[f64; HOURS], micro: &[f64; HOURS]) -> Self {
        let mut p = Self::zero();
        for h in 0..HOURS {
            p.transit_mw[h] = transit[h] / 1000.0;
            p.car_mw[h] = car[h] / 1000.0;
            p.micromobility_mw[h] = micro[h] / 1000.0;
        }
        p.recompute_total();
        p
    }

    pub fn category(&self, c: Category) -> Option<&[f64; HOURS]> {
        match c {
            Category::Transit => Some(&self.transit_mw),
            Category::Car => Some(&self.car_mw),
            Category::Micromobility => Some(&self.micromobility_mw),
            Category::Wfh => None,
        }
    }

    fn recompute_total(&mut self) {
        for h in 0..HOURS {
            self.total_mw[h] = self.transit_mw[h] + self.car_mw[h] + self.micromobility_mw[h];
        }
    }

    pub fn add(&self, other: &LoadProfile) -> LoadProfile {
        let mut p = self.clone();
        for h in 0..HOURS {
            p.transit_mw[h] += other.transit_mw[h];
            p.car_mw[h] += other.car_mw[h];
            p.micromobility_mw[h] += other.micromobility_mw[h];
        }
        p.recompute_total();
        p
    }

    pub fn scaled(&self, k: f64) -> LoadProfile {
        let mut p = self.clone();
        for h in 0..HOURS {
            p.transit_mw[h] *= k;
            p.car_mw[h] *= k;
            p.micromobility_mw[h] *= k;
        }
        p.recompute_total();
        p
    }

    pub fn peak(&self) -> (usize, f64) {
        let mut best = (0, self.total_mw[0]);
        for (h, &v) in self.total_mw.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (h, v);
            }
        }
        best
    }

    pub fn daily_energy_mwh(&self) -> f64 {
        self.total_mw.iter().sum()
    }

    pub fn daily_energy_kwh(&self) -> f64 {
        self.daily_energy_mwh() * 1000.0
    }

    /// `hour,transit_mw,car_mw,micromobility_mw,total_mw`
    pub fn write_csv(&self, writer: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["hour", "transit_mw", "car_mw", "micromobility_mw", "total_mw"])?;
        for h in 0..HOURS {
            w.write_record([
                h.to_string(),
                self.transit_mw[h].to_string(),
                self.car_mw[h].to_string(),
                self.micromobility_mw[h].to_string(),
                self.total_mw[h].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
