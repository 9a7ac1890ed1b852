use nalgebra::{DMatrix, DVector};

use super::{GridError, Network};

const CLEAN: f64 = 1e-12;

/// Reduced nodal susceptance matrix with the slack row and column removed,
/// and the map from bus index to reduced index.
fn reduced_susceptance(net: &Network) -> (DMatrix<f64>, Vec<Option<usize>>) {
    let n = net.buses.len();
    let slack = net.slack();
    let map: Vec<Option<usize>> = (0..n)
        .map(|i| match i.cmp(&slack) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();
    let mut b = DMatrix::zeros(n - 1, n - 1);
    for (l, &(f, t)) in net.line_ends().iter().enumerate() {
        let s = net.lines[l].susceptance;
        if let Some(i) = map[f] {
            b[(i, i)] += s;
        }
        if let Some(j) = map[t] {
            b[(j, j)] += s;
        }
        if let (Some(i), Some(j)) = (map[f], map[t]) {
            b[(i, j)] -= s;
            b[(j, i)] -= s;
        }
    }
    (b, map)
}

fn ensure_connected(net: &Network) -> Result<(), GridError> {
    let comps = net.components();
    if comps.len() > 1 {
        return Err(GridError::Disconnected(comps));
    }
    Ok(())
}

/// Power transfer distribution factors, `lines x buses`.
///
/// Entry `(l, b)` is the flow on line `l` (positive from `from` to `to`) when
/// 1 MW is injected at bus `b` and withdrawn at the slack bus. The slack
/// column is zero.
pub fn ptdf(net: &Network) -> Result<DMatrix<f64>, GridError> {
    ensure_connected(net)?;
    let n = net.buses.len();
    let m = net.lines.len();
    if n == 1 {
        return Ok(DMatrix::zeros(m, 1));
    }
    let (b, map) = reduced_susceptance(net);
    let x = b.lu().try_inverse().ok_or(GridError::Singular)?;
    let angle = |bus: usize, inj: usize| match (map[bus], map[inj]) {
        (Some(i), Some(j)) => x[(i, j)],
        _ => 0.0,
    };
    let mut out = DMatrix::zeros(m, n);
    for (l, &(f, t)) in net.line_ends().iter().enumerate() {
        let s = net.lines[l].susceptance;
        for inj in 0..n {
            let v = s * (angle(f, inj) - angle(t, inj));
            out[(l, inj)] = if v.abs() < CLEAN { 0.0 } else { v };
        }
    }
    Ok(out)
}

/// Line flows from a nodal injection vector by solving for bus angles
/// directly, without forming the PTDF matrix. Injections must balance; any
/// residual is absorbed at the slack bus.
pub fn dc_flows(net: &Network, injections: &[f64]) -> Result<Vec<f64>, GridError> {
    ensure_connected(net)?;
    let n = net.buses.len();
    if n == 1 {
        return Ok(vec![0.0; net.lines.len()]);
    }
    let (b, map) = reduced_susceptance(net);
    let mut rhs = DVector::zeros(n - 1);
    for (bus, &p) in injections.iter().enumerate() {
        if let Some(i) = map[bus] {
            rhs[i] = p;
        }
    }
    let theta = b.lu().solve(&rhs).ok_or(GridError::Singular)?;
    let angle = |bus: usize| map[bus].map_or(0.0, |i| theta[i]);
    Ok(net
        .line_ends()
        .iter()
        .enumerate()
        .map(|(l, &(f, t))| net.lines[l].susceptance * (angle(f) - angle(t)))
        .collect())
}
