//! Maximum additional load servable at the designated buses.
//!
//! For each hour `t`, with generator dispatch `p`, base loads `d` and
//! additional load `a` (non-zero only on designated buses):
//!
//! ```text
//! maximize   sum(a) - lambda * sum_i (a_i / d_i)^2
//! subject to sum(p) = sum(d) + sum(a)
//!            p_min <= p <= p_max
//!            -f_max <= PTDF (G p - d - a) <= f_max
//!            auxiliary rows (reserve margin, ...)
//! ```
//!
//! Buses with zero base load are left out of the quadratic term. With
//! `lambda = 0` this is a linear program; otherwise the LP optimum seeds a
//! projected-gradient ascent. No built-in constraint couples hours, so each
//! hour is solved independently.

use std::sync::Arc;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::projection::Polytope;
use super::{ptdf, GridError, Network};
use crate::energy::HOURS;

/// Variable layout of one hourly problem: dispatch first, then additional
/// load at each designated bus.
#[derive(Debug, Clone)]
pub struct Layout {
    pub n_gen: usize,
    /// Bus index of each additional-load variable.
    pub add_buses: Vec<usize>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n_gen + self.add_buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gen(&self, g: usize) -> usize {
        g
    }

    pub fn add(&self, k: usize) -> usize {
        self.n_gen + k
    }
}

/// `coeffs . x <= rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub label: String,
}

/// Extra per-hour constraints on dispatch and additional load.
pub trait AuxConstraint: Send + Sync + std::fmt::Debug {
    fn rows(&self, net: &Network, hour: usize, layout: &Layout) -> Vec<LinearRow>;
}

/// System spinning reserve: `sum(p_max - p) >= fraction * sum(d)`.
/// Vacuous when any generator has unbounded output.
#[derive(Debug, Clone, Copy)]
pub struct ReserveMargin {
    pub fraction: f64,
}

impl AuxConstraint for ReserveMargin {
    fn rows(&self, net: &Network, hour: usize, layout: &Layout) -> Vec<LinearRow> {
        if self.fraction <= 0.0 || net.generators.iter().any(|g| g.p_max_mw.is_infinite()) {
            return Vec::new();
        }
        let cap: f64 = net.generators.iter().map(|g| g.p_max_mw).sum();
        let demand: f64 = net.base_load(hour).iter().sum();
        let mut coeffs = vec![0.0; layout.len()];
        for g in 0..layout.n_gen {
            coeffs[layout.gen(g)] = 1.0;
        }
        vec![LinearRow { coeffs, rhs: cap - self.fraction * demand, label: "reserve".into() }]
    }
}

#[derive(Debug, Clone)]
pub struct CapacityOptions {
    /// Fraction of base demand held as reserve; 0 disables the row.
    pub reserve_margin: f64,
    pub extra: Vec<Arc<dyn AuxConstraint>>,
    /// Slack below which an inequality is reported as binding.
    pub binding_tolerance: f64,
    pub max_iterations: usize,
    /// Stop when the objective moves less than this over ten iterations.
    pub convergence: f64,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self {
            reserve_margin: 0.0,
            extra: Vec::new(),
            binding_tolerance: 1e-6,
            max_iterations: 20_000,
            convergence: 1e-7,
        }
    }
}

impl CapacityOptions {
    fn aux(&self) -> Vec<Arc<dyn AuxConstraint>> {
        let mut v: Vec<Arc<dyn AuxConstraint>> = vec![Arc::new(ReserveMargin { fraction: self.reserve_margin })];
        v.extend(self.extra.iter().cloned());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourSolution {
    pub hour: usize,
    /// Per bus, zero outside the designated set.
    pub additional_mw: Vec<f64>,
    /// Per generator.
    pub dispatch_mw: Vec<f64>,
    /// Per line, positive from `from` to `to`.
    pub flows_mw: Vec<f64>,
    pub total_additional_mw: f64,
    pub objective: f64,
    pub binding: Vec<String>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub network: String,
    pub lambda: f64,
    pub objective: f64,
    pub hours: Vec<HourSolution>,
}

impl CapacityResult {
    pub fn total_additional_mw(&self) -> Vec<f64> {
        self.hours.iter().map(|h| h.total_additional_mw).collect()
    }
}

/// One hour's problem in dense form.
#[derive(Debug, Clone)]
pub(crate) struct HourProblem {
    pub layout: Layout,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eq: Vec<f64>,
    pub eq_rhs: f64,
    pub rows: Vec<LinearRow>,
    /// Per-variable quadratic penalty weight (`lambda / d^2` on load variables).
    pub quad: Vec<f64>,
    pub linear: Vec<f64>,
}

impl HourProblem {
    pub fn build(
        net: &Network,
        ptdf: &DMatrix<f64>,
        hour: usize,
        lambda: f64,
        aux: &[Arc<dyn AuxConstraint>],
    ) -> Self {
        let layout = Layout { n_gen: net.generators.len(), add_buses: net.manhattan() };
        let n = layout.len();
        let d = net.base_load(hour);
        let mut lower = vec![0.0; n];
        let mut upper = vec![f64::INFINITY; n];
        for (g, gen) in net.generators.iter().enumerate() {
            lower[layout.gen(g)] = gen.p_min_mw;
            upper[layout.gen(g)] = gen.p_max_mw;
        }
        let mut eq = vec![0.0; n];
        for g in 0..layout.n_gen {
            eq[layout.gen(g)] = 1.0;
        }
        for k in 0..layout.add_buses.len() {
            eq[layout.add(k)] = -1.0;
        }
        let eq_rhs: f64 = d.iter().sum();

        let mut rows = Vec::with_capacity(2 * net.lines.len());
        for (l, line) in net.lines.iter().enumerate() {
            let mut coeffs = vec![0.0; n];
            for (g, &bus) in net.gen_bus().iter().enumerate() {
                coeffs[layout.gen(g)] = ptdf[(l, bus)];
            }
            for (k, &bus) in layout.add_buses.iter().enumerate() {
                coeffs[layout.add(k)] = -ptdf[(l, bus)];
            }
            let base: f64 = (0..d.len()).map(|b| ptdf[(l, b)] * d[b]).sum();
            let name = format!("line {}-{}", line.from, line.to);
            rows.push(LinearRow { coeffs: coeffs.clone(), rhs: line.capacity_mw + base, label: format!("{name} forward") });
            rows.push(LinearRow {
                coeffs: coeffs.iter().map(|c| -c).collect(),
                rhs: line.capacity_mw - base,
                label: format!("{name} reverse"),
            });
        }
        for a in aux {
            rows.extend(a.rows(net, hour, &layout));
        }

        let mut quad = vec![0.0; n];
        let mut linear = vec![0.0; n];
        for (k, &bus) in layout.add_buses.iter().enumerate() {
            linear[layout.add(k)] = 1.0;
            if lambda > 0.0 && d[bus].abs() > 1e-12 {
                quad[layout.add(k)] = lambda / (d[bus] * d[bus]);
            }
        }
        Self { layout, lower, upper, eq, eq_rhs, rows, quad, linear }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.linear)
            .zip(&self.quad)
            .map(|((x, c), q)| c * x - q * x * x)
            .sum()
    }

    /// Solves the linear part with loads optionally pinned to zero.
    fn solve_lp(&self, pin_additional: bool) -> Result<Vec<f64>, minilp::Error> {
        let mut pb = Problem::new(OptimizationDirection::Maximize);
        let n = self.layout.len();
        let vars: Vec<_> = (0..n)
            .map(|j| {
                let is_add = j >= self.layout.n_gen;
                let bounds = if is_add && pin_additional { (0.0, 0.0) } else { (self.lower[j], self.upper[j]) };
                let obj = if pin_additional { 0.0 } else { self.linear[j] };
                pb.add_var(obj, bounds)
            })
            .collect();
        let expr = |coeffs: &[f64]| -> Vec<(minilp::Variable, f64)> {
            coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (vars[j], *c)).collect()
        };
        pb.add_constraint(expr(&self.eq), ComparisonOp::Eq, self.eq_rhs);
        for row in &self.rows {
            let e = expr(&row.coeffs);
            if e.is_empty() {
                if row.rhs < -1e-9 {
                    return Err(minilp::Error::Infeasible);
                }
                continue;
            }
            pb.add_constraint(e, ComparisonOp::Le, row.rhs);
        }
        let sol = pb.solve()?;
        let x: Vec<f64> = vars.iter().map(|v| *sol.var_value(*v)).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(minilp::Error::Unbounded);
        }
        Ok(x)
    }

    fn polytope(&self) -> Polytope {
        let n = self.layout.len();
        let mut dense: Vec<(Vec<f64>, f64)> = self.rows.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
        for j in 0..n {
            if self.upper[j].is_finite() {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                dense.push((c, self.upper[j]));
            }
            if self.lower[j].is_finite() {
                let mut c = vec![0.0; n];
                c[j] = -1.0;
                dense.push((c, -self.lower[j]));
            }
        }
        let m = dense.len();
        let mut rows = DMatrix::zeros(m, n);
        let mut rhs = DVector::zeros(m);
        for (i, (c, b)) in dense.into_iter().enumerate() {
            rows.set_row(i, &nalgebra::RowDVector::from_vec(c));
            rhs[i] = b;
        }
        Polytope {
            rows,
            rhs,
            eq: DMatrix::from_row_slice(1, n, &self.eq),
            eq_rhs: DVector::from_element(1, self.eq_rhs),
        }
    }

    /// Projected-gradient ascent with step `1 / L`, `L` the curvature bound
    /// of the penalty.
    fn ascend(&self, start: Vec<f64>, opts: &CapacityOptions) -> (Vec<f64>, usize) {
        let curvature = 2.0 * self.quad.iter().copied().fold(0.0, f64::max);
        if curvature <= 0.0 {
            return (start, 0);
        }
        let step = 1.0 / curvature;
        let poly = self.polytope();
        let mut x = DVector::from_vec(start);
        let mut history = vec![self.objective(x.as_slice())];
        for it in 1..=opts.max_iterations {
            let grad = DVector::from_iterator(
                x.len(),
                (0..x.len()).map(|j| self.linear[j] - 2.0 * self.quad[j] * x[j]),
            );
            let target = &x + step * grad;
            let next = poly.project(&target, &x);
            if poly.max_violation(&next) > 1e-7 {
                return (x.as_slice().to_vec(), it);
            }
            x = next;
            history.push(self.objective(x.as_slice()));
            if it >= 10 && (history[it] - history[it - 10]).abs() < opts.convergence {
                return (x.as_slice().to_vec(), it);
            }
        }
        (x.as_slice().to_vec(), opts.max_iterations)
    }
}

fn solve_hour(
    net: &Network,
    ptdf: &DMatrix<f64>,
    hour: usize,
    lambda: f64,
    opts: &CapacityOptions,
    aux: &[Arc<dyn AuxConstraint>],
) -> Result<HourSolution, GridError> {
    let prob = HourProblem::build(net, ptdf, hour, lambda, aux);
    let base = match prob.solve_lp(true) {
        Ok(x) => Some(x),
        Err(minilp::Error::Infeasible) => return Err(GridError::InfeasibleBaseCase { hour }),
        Err(minilp::Error::Unbounded) => None,
    };
    // the penalty bounds the program only if it covers every designated bus
    let penalized = lambda > 0.0 && (0..prob.layout.add_buses.len()).all(|k| prob.quad[prob.layout.add(k)] > 0.0);
    let start = match (prob.solve_lp(false), base) {
        (Ok(x), _) => x,
        (Err(minilp::Error::Infeasible), _) => return Err(GridError::InfeasibleBaseCase { hour }),
        (Err(minilp::Error::Unbounded), Some(b)) if penalized => b,
        (Err(minilp::Error::Unbounded), _) => return Err(GridError::Unbounded { hour }),
    };
    let (x, iterations) = if lambda > 0.0 { prob.ascend(start, opts) } else { (start, 0) };

    let layout = &prob.layout;
    let mut additional = vec![0.0; net.buses.len()];
    for (k, &bus) in layout.add_buses.iter().enumerate() {
        additional[bus] = x[layout.add(k)];
    }
    let dispatch: Vec<f64> = (0..layout.n_gen).map(|g| x[layout.gen(g)]).collect();
    let d = net.base_load(hour);
    let mut injection: Vec<f64> = d.iter().zip(&additional).map(|(d, a)| -d - a).collect();
    for (g, &bus) in net.gen_bus().iter().enumerate() {
        injection[bus] += dispatch[g];
    }
    let flows: Vec<f64> = (0..net.lines.len())
        .map(|l| (0..net.buses.len()).map(|b| ptdf[(l, b)] * injection[b]).sum())
        .collect();

    let tol = opts.binding_tolerance;
    let mut binding: Vec<String> = prob
        .rows
        .iter()
        .filter(|r| r.rhs - r.coeffs.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() <= tol)
        .map(|r| r.label.clone())
        .collect();
    for (g, gen) in net.generators.iter().enumerate() {
        if gen.p_max_mw - dispatch[g] <= tol {
            binding.push(format!("generator {g} at {} max", gen.bus));
        } else if dispatch[g] - gen.p_min_mw <= tol {
            binding.push(format!("generator {g} at {} min", gen.bus));
        }
    }

    Ok(HourSolution {
        hour,
        total_additional_mw: additional.iter().sum(),
        objective: prob.objective(&x),
        additional_mw: additional,
        dispatch_mw: dispatch,
        flows_mw: flows,
        binding,
        iterations,
    })
}

/// Solves the capacity program for hours `0..horizon`.
pub fn max_additional_load(
    net: &Network,
    horizon: usize,
    lambda: f64,
    opts: &CapacityOptions,
) -> Result<CapacityResult, GridError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(GridError::Invalid(format!("lambda must be finite and >= 0, found {lambda}")));
    }
    if horizon == 0 || horizon > HOURS {
        return Err(GridError::Invalid(format!("horizon must be 1..={HOURS}, found {horizon}")));
    }
    if net.manhattan().is_empty() {
        return Err(GridError::Invalid("no bus is marked as able to take additional load".into()));
    }
    let ptdf = ptdf(net)?;
    let aux = opts.aux();
    let hours = (0..horizon)
        .into_par_iter()
        .map(|t| solve_hour(net, &ptdf, t, lambda, opts, &aux))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CapacityResult {
        network: net.name.clone(),
        lambda,
        objective: hours.iter().map(|h| h.objective).sum(),
        hours,
    })
}

/// Hourly maximum total load at the designated buses: base load plus the
/// optimal additional load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEnvelope {
    pub network: String,
    pub lambda: f64,
    pub envelope_mw: [f64; HOURS],
    pub base_load_mw: [f64; HOURS],
    pub additional_mw: [f64; HOURS],
    pub objective: f64,
}

impl CapacityEnvelope {
    /// `hour,base_load_mw,additional_mw,envelope_mw`
    pub fn write_csv(&self, writer: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["hour", "base_load_mw", "additional_mw", "envelope_mw"])?;
        for h in 0..HOURS {
            w.write_record([
                h.to_string(),
                self.base_load_mw[h].to_string(),
                self.additional_mw[h].to_string(),
                self.envelope_mw[h].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn capacity_envelope(
    net: &Network,
    lambda: f64,
    opts: &CapacityOptions,
) -> Result<(CapacityEnvelope, CapacityResult), GridError> {
    let result = max_additional_load(net, HOURS, lambda, opts)?;
    let m = net.manhattan();
    let mut env = CapacityEnvelope {
        network: net.name.clone(),
        lambda,
        envelope_mw: [0.0; HOURS],
        base_load_mw: [0.0; HOURS],
        additional_mw: [0.0; HOURS],
        objective: result.objective,
    };
    for (h, sol) in result.hours.iter().enumerate() {
        env.base_load_mw[h] = m.iter().map(|&b| net.buses[b].load_mw[h]).sum();
        env.additional_mw[h] = sol.total_additional_mw;
        env.envelope_mw[h] = env.base_load_mw[h] + sol.total_additional_mw;
    }
    Ok((env, result))
}
