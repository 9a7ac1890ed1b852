//! Mode shares and demand-versus-capacity summaries.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{LoadProfile, Policy, HOURS};
use crate::mode::Category;
use crate::population::{individual_distance, Individual, PopulationError, ZoneTable};
use crate::sampler::{Scenario, WfhLevel};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("scenario has no assignments")]
    EmptyPopulation,
    #[error("total commute distance is zero; distance shares are undefined")]
    ZeroDistance,
    #[error("individual {0} is assigned but not in the population")]
    UnknownIndividual(u64),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("capacity has {found} values, expected {HOURS}")]
    Length { found: usize },
    #[error("capacity contains a non-finite value at hour {0}")]
    NonFinite(usize),
}

const CATEGORIES: [Category; 4] = [Category::Transit, Category::Car, Category::Micromobility, Category::Wfh];

fn zeroed() -> BTreeMap<Category, f64> {
    CATEGORIES.iter().map(|c| (*c, 0.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareBreakdown {
    pub by_trips: BTreeMap<Category, f64>,
    /// Weighted by round-trip distance; WFH carries no distance.
    pub by_distance: BTreeMap<Category, f64>,
    pub wfh_level: WfhLevel,
}

/// Trip shares within one home zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneShare {
    pub zone: String,
    pub individuals: usize,
    pub by_trips: BTreeMap<Category, f64>,
}

pub fn shares(scn: &Scenario, pop: &[Individual], zones: &ZoneTable) -> Result<ShareBreakdown, ReportError> {
    if scn.assignments.is_empty() {
        return Err(ReportError::EmptyPopulation);
    }
    let by_id: HashMap<u64, &Individual> = pop.iter().map(|i| (i.id, i)).collect();
    let mut trips = zeroed();
    let mut dist = zeroed();
    for a in &scn.assignments {
        let ind = by_id.get(&a.individual_id).ok_or(ReportError::UnknownIndividual(a.individual_id))?;
        let c = a.mode.category();
        *trips.get_mut(&c).expect("all categories present") += 1.0;
        if c != Category::Wfh {
            *dist.get_mut(&c).expect("all categories present") += 2.0 * individual_distance(ind, zones)?;
        }
    }
    let n = scn.assignments.len() as f64;
    let total_dist: f64 = dist.values().sum();
    if total_dist <= 0.0 {
        return Err(ReportError::ZeroDistance);
    }
    trips.values_mut().for_each(|v| *v /= n);
    dist.values_mut().for_each(|v| *v /= total_dist);
    Ok(ShareBreakdown { by_trips: trips, by_distance: dist, wfh_level: scn.wfh_level })
}

/// Trip shares grouped by home zone, in zone-id order.
pub fn zone_shares(scn: &Scenario, pop: &[Individual]) -> Result<Vec<ZoneShare>, ReportError> {
    let by_id: HashMap<u64, &Individual> = pop.iter().map(|i| (i.id, i)).collect();
    let mut counts: BTreeMap<&str, BTreeMap<Category, f64>> = BTreeMap::new();
    for a in &scn.assignments {
        let ind = by_id.get(&a.individual_id).ok_or(ReportError::UnknownIndividual(a.individual_id))?;
        let entry = counts.entry(ind.home_zone.as_str()).or_insert_with(zeroed);
        *entry.get_mut(&a.mode.category()).expect("all categories present") += 1.0;
    }
    Ok(counts
        .into_iter()
        .map(|(zone, mut by_trips)| {
            let n: f64 = by_trips.values().sum();
            by_trips.values_mut().for_each(|v| *v /= n);
            ZoneShare { zone: zone.to_string(), individuals: n as usize, by_trips }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadroomReport {
    pub profile: LoadProfile,
    pub capacity: [f64; HOURS],
    pub peak_mw: f64,
    pub peak_hour: usize,
    /// Peak demand over the capacity at the peak hour.
    pub utilization: f64,
    pub exceeded_hours: Vec<usize>,
}

pub fn headroom(profile: &LoadProfile, capacity: &[f64]) -> Result<HeadroomReport, ReportError> {
    let capacity: [f64; HOURS] =
        capacity.try_into().map_err(|_| ReportError::Length { found: capacity.len() })?;
    if let Some(h) = capacity.iter().position(|c| !c.is_finite()) {
        return Err(ReportError::NonFinite(h));
    }
    let (peak_hour, peak_mw) = profile.peak();
    let cap = capacity[peak_hour];
    let utilization = if cap > 0.0 {
        peak_mw / cap
    } else if peak_mw > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let exceeded_hours = (0..HOURS).filter(|&h| profile.total_mw[h] > capacity[h]).collect();
    Ok(HeadroomReport { profile: profile.clone(), capacity, peak_mw, peak_hour, utilization, exceeded_hours })
}

/// Plain-text table for terminal output.
pub fn summary_table(name: &str, shares: &ShareBreakdown, reports: &[(Policy, HeadroomReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {name} (wfh {})", shares.wfh_level.as_str());
    let _ = writeln!(s, "{:<15} {:>8} {:>10}", "category", "trips", "distance");
    for c in CATEGORIES {
        let _ = writeln!(
            s,
            "{:<15} {:>7.1}% {:>9.1}%",
            c.as_str(),
            100.0 * shares.by_trips[&c],
            100.0 * shares.by_distance[&c]
        );
    }
    let _ = writeln!(s, "{:<12} {:>10} {:>5} {:>12} {:>9}", "policy", "peak_mw", "hour", "utilization", "exceeded");
    for (p, r) in reports {
        let _ = writeln!(
            s,
            "{:<12} {:>10.2} {:>5} {:>11.1}% {:>9}",
            p.as_str(),
            r.peak_mw,
            r.peak_hour,
            100.0 * r.utilization,
            r.exceeded_hours.len()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::LoadProfile;

    #[test]
    fn headroom_examples() {
        let z = LoadProfile::zero();
        let r = headroom(&z, &[100.0; HOURS]).unwrap();
        assert!(r.exceeded_hours.is_empty());
        assert_eq!(r.peak_mw, 0.0);

        let mut kw = [0.0; HOURS];
        kw[8] = 120_000.0;
        let p = LoadProfile::from_kw(&[0.0; HOURS], &kw, &[0.0; HOURS]);
        let r = headroom(&p, &[100.0; HOURS]).unwrap();
        assert_eq!(r.exceeded_hours, vec![8]);
        assert_eq!(r.peak_hour, 8);
        assert!((r.utilization - 1.2).abs() < 1e-12);

        assert!(matches!(headroom(&p, &[1.0; 23]), Err(ReportError::Length { found: 23 })));
    }
}
