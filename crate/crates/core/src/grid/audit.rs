//! Independent feasibility check of capacity solutions.
//!
//! Flows are recomputed from bus angles rather than from the PTDF matrix
//! used by the solver.

use super::capacity::CapacityResult;
use super::{dc_flows, GridError, Network};

/// Returns a description of every violated constraint (empty when feasible).
pub fn audit(net: &Network, result: &CapacityResult, reserve_margin: f64, tol: f64) -> Result<Vec<String>, GridError> {
    let mut out = Vec::new();
    for sol in &result.hours {
        let t = sol.hour;
        let d = net.base_load(t);
        if sol.additional_mw.len() != net.buses.len() || sol.dispatch_mw.len() != net.generators.len() {
            out.push(format!("hour {t}: solution dimensions do not match the network"));
            continue;
        }
        for (i, &a) in sol.additional_mw.iter().enumerate() {
            if a < -tol {
                out.push(format!("hour {t}: negative additional load {a} at bus {}", net.buses[i].id));
            }
            if !net.buses[i].is_manhattan && a.abs() > tol {
                out.push(format!("hour {t}: additional load {a} outside the designated set at bus {}", net.buses[i].id));
            }
        }
        let gen: f64 = sol.dispatch_mw.iter().sum();
        let load: f64 = d.iter().sum::<f64>() + sol.additional_mw.iter().sum::<f64>();
        if (gen - load).abs() > tol {
            out.push(format!("hour {t}: imbalance {}", gen - load));
        }
        for (g, (p, spec)) in sol.dispatch_mw.iter().zip(&net.generators).enumerate() {
            if *p < spec.p_min_mw - tol || *p > spec.p_max_mw + tol {
                out.push(format!("hour {t}: generator {g} output {p} outside [{}, {}]", spec.p_min_mw, spec.p_max_mw));
            }
        }
        let mut inj: Vec<f64> = d.iter().zip(&sol.additional_mw).map(|(d, a)| -d - a).collect();
        for (g, &bus) in net.gen_bus().iter().enumerate() {
            inj[bus] += sol.dispatch_mw[g];
        }
        let flows = dc_flows(net, &inj)?;
        for (l, (f, line)) in flows.iter().zip(&net.lines).enumerate() {
            if f.abs() > line.capacity_mw + tol {
                out.push(format!("hour {t}: line {l} flow {f} exceeds {}", line.capacity_mw));
            }
            if let Some(reported) = sol.flows_mw.get(l) {
                if (reported - f).abs() > tol {
                    out.push(format!("hour {t}: line {l} reported flow {reported} differs from {f}"));
                }
            }
        }
        if reserve_margin > 0.0 && net.generators.iter().all(|g| g.p_max_mw.is_finite()) {
            let headroom: f64 = net.generators.iter().zip(&sol.dispatch_mw).map(|(g, p)| g.p_max_mw - p).sum();
            let need = reserve_margin * d.iter().sum::<f64>();
            if headroom < need - tol {
                out.push(format!("hour {t}: reserve {headroom} below {need}"));
            }
        }
    }
    Ok(out)
}
