//! Reference implementations for tests. Everything here is deliberately
//! naive and shares no solver code with the library.

use std::collections::BTreeMap;
use std::path::Path;

use commute_grid::energy::{ChargeTask, TaskLocation, HOURS};
use commute_grid::grid::{Bus, Generator, Line, Network};
use commute_grid::Mode;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Grid

/// Line-by-bus sensitivity matrix built from scratch: ground the slack bus,
/// solve the Laplacian for a unit injection at each bus.
pub fn sensitivities(net: &Network) -> DMatrix<f64> {
    let n = net.buses.len();
    let idx = |id: &str| net.buses.iter().position(|b| b.id == id).expect("bus exists");
    let slack = net.slack();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for l in &net.lines {
        let (f, t) = (idx(&l.from), idx(&l.to));
        lap[(f, f)] += l.susceptance;
        lap[(t, t)] += l.susceptance;
        lap[(f, t)] -= l.susceptance;
        lap[(t, f)] -= l.susceptance;
    }
    // replace the slack equation with theta_slack = 0
    for j in 0..n {
        lap[(slack, j)] = 0.0;
    }
    lap[(slack, slack)] = 1.0;
    let lu = lap.lu();
    let mut out = DMatrix::zeros(net.lines.len(), n);
    for b in 0..n {
        if b == slack {
            continue;
        }
        let mut e = DVector::zeros(n);
        e[b] = 1.0;
        let theta = lu.solve(&e).expect("connected network");
        for (k, l) in net.lines.iter().enumerate() {
            out[(k, b)] = l.susceptance * (theta[idx(&l.from)] - theta[idx(&l.to)]);
        }
    }
    out
}

/// Line flows from angles for nodal injections (absorbed at the slack).
pub fn flows(net: &Network, injection: &[f64]) -> Vec<f64> {
    let s = sensitivities(net);
    (0..net.lines.len()).map(|l| (0..injection.len()).map(|b| s[(l, b)] * injection[b]).sum()).collect()
}

fn designated(net: &Network) -> Vec<usize> {
    (0..net.buses.len()).filter(|&b| net.buses[b].is_manhattan).collect()
}

fn gen_bus(net: &Network) -> Vec<usize> {
    net.generators.iter().map(|g| net.buses.iter().position(|b| b.id == g.bus).expect("bus exists")).collect()
}

/// `(rows, rhs)` for `rows x <= rhs` plus the balance row, over
/// `x = [p, a]`, every bound written as a row.
fn dense_problem(net: &Network, hour: usize, reserve: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let s = sensitivities(net);
    let gens = gen_bus(net);
    let adds = designated(net);
    let ng = gens.len();
    let n = ng + adds.len();
    let d: Vec<f64> = net.buses.iter().map(|b| b.load_mw[hour]).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (l, line) in net.lines.iter().enumerate() {
        let mut c = vec![0.0; n];
        for (g, &b) in gens.iter().enumerate() {
            c[g] = s[(l, b)];
        }
        for (k, &b) in adds.iter().enumerate() {
            c[ng + k] = -s[(l, b)];
        }
        let base: f64 = (0..d.len()).map(|b| s[(l, b)] * d[b]).sum();
        rows.push(c.clone());
        rhs.push(line.capacity_mw + base);
        rows.push(c.iter().map(|v| -v).collect());
        rhs.push(line.capacity_mw - base);
    }
    for (g, gen) in net.generators.iter().enumerate() {
        let mut c = vec![0.0; n];
        c[g] = 1.0;
        rows.push(c.clone());
        rhs.push(gen.p_max_mw);
        c[g] = -1.0;
        rows.push(c);
        rhs.push(-gen.p_min_mw);
    }
    for k in 0..adds.len() {
        let mut c = vec![0.0; n];
        c[ng + k] = -1.0;
        rows.push(c);
        rhs.push(0.0);
    }
    if reserve > 0.0 {
        let mut c = vec![0.0; n];
        c[..ng].iter_mut().for_each(|v| *v = 1.0);
        rows.push(c);
        rhs.push(net.generators.iter().map(|g| g.p_max_mw).sum::<f64>() - reserve * d.iter().sum::<f64>());
    }
    let mut eq = vec![0.0; n];
    eq[..ng].iter_mut().for_each(|v| *v = 1.0);
    eq[ng..].iter_mut().for_each(|v| *v = -1.0);
    (rows, rhs, eq, d.iter().sum())
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Maximum total additional load in one hour by enumerating every vertex of
/// the feasible polytope. Requires finite generator limits. `None` when the
/// polytope is empty.
pub fn vertex_capacity(net: &Network, hour: usize, reserve: f64) -> Option<f64> {
    let (rows, rhs, eq, eq_rhs) = dense_problem(net, hour, reserve);
    let n = eq.len();
    let ng = net.generators.len();
    let tol = 1e-7;
    let mut best: Option<f64> = None;
    combinations(rows.len(), n - 1, |active| {
        let mut m = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, &i) in active.iter().enumerate() {
            for j in 0..n {
                m[(r, j)] = rows[i][j];
            }
            b[r] = rhs[i];
        }
        for j in 0..n {
            m[(n - 1, j)] = eq[j];
        }
        b[n - 1] = eq_rhs;
        let Some(x) = m.lu().solve(&b) else { return };
        if x.iter().any(|v| !v.is_finite()) {
            return;
        }
        let scale = 1.0 + x.amax();
        let ok = rows
            .iter()
            .zip(&rhs)
            .all(|(r, &h)| r.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() <= h + tol * scale)
            && (eq.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() - eq_rhs).abs() <= tol * scale;
        if ok {
            let obj: f64 = x.iter().skip(ng).sum();
            if best.is_none_or(|v| obj > v) {
                best = Some(obj);
            }
        }
    });
    best
}

/// Same program in angle form (no sensitivity matrix), solved as an LP.
/// `None` when infeasible or unbounded.
pub fn angle_lp_capacity(net: &Network, hour: usize, reserve: f64) -> Option<f64> {
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let idx = |id: &str| net.buses.iter().position(|b| b.id == id).expect("bus exists");
    let nb = net.buses.len();
    let slack = net.slack();
    let theta: Vec<_> = (0..nb)
        .map(|b| if b == slack { pb.add_var(0.0, (0.0, 0.0)) } else { pb.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)) })
        .collect();
    let p: Vec<_> = net.generators.iter().map(|g| pb.add_var(0.0, (g.p_min_mw, g.p_max_mw))).collect();
    let a: Vec<_> = (0..nb)
        .map(|b| if net.buses[b].is_manhattan { Some(pb.add_var(1.0, (0.0, f64::INFINITY))) } else { None })
        .collect();
    // nodal balance: generation - load - additional = sum of outgoing flows
    #[allow(clippy::needless_range_loop)]
    for b in 0..nb {
        let mut expr = Vec::new();
        for (g, gen) in net.generators.iter().enumerate() {
            if idx(&gen.bus) == b {
                expr.push((p[g], 1.0));
            }
        }
        if let Some(v) = a[b] {
            expr.push((v, -1.0));
        }
        let mut coef = vec![0.0; nb];
        for l in &net.lines {
            let (f, t) = (idx(&l.from), idx(&l.to));
            if f == b {
                coef[f] -= l.susceptance;
                coef[t] += l.susceptance;
            }
            if t == b {
                coef[t] -= l.susceptance;
                coef[f] += l.susceptance;
            }
        }
        for (k, c) in coef.iter().enumerate() {
            if *c != 0.0 {
                expr.push((theta[k], *c));
            }
        }
        pb.add_constraint(expr, ComparisonOp::Eq, net.buses[b].load_mw[hour]);
    }
    for l in &net.lines {
        let (f, t) = (idx(&l.from), idx(&l.to));
        let e = vec![(theta[f], l.susceptance), (theta[t], -l.susceptance)];
        pb.add_constraint(e.clone(), ComparisonOp::Le, l.capacity_mw);
        pb.add_constraint(e, ComparisonOp::Ge, -l.capacity_mw);
    }
    if reserve > 0.0 {
        let d: f64 = net.buses.iter().map(|b| b.load_mw[hour]).sum();
        let cap: f64 = net.generators.iter().map(|g| g.p_max_mw).sum();
        pb.add_constraint(p.iter().map(|v| (*v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Le, cap - reserve * d);
    }
    pb.solve().ok().map(|s| s.objective())
}

/// A connected random network with `n` buses (2..=10): a random spanning
/// tree plus a few extra lines, one to three designated buses and finite
/// generator limits. Base loads vary by hour.
pub fn random_network(rng: &mut impl Rng, n: usize) -> Network {
    let ids: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let mut lines = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        seen.insert((j, i));
        lines.push(Line {
            from: ids[j].clone(),
            to: ids[i].clone(),
            susceptance: rng.random_range(2.0..20.0),
            capacity_mw: rng.random_range(30.0..200.0),
        });
    }
    for _ in 0..rng.random_range(0..=n) {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let key = (i.min(j), i.max(j));
        if i == j || !seen.insert(key) {
            continue;
        }
        lines.push(Line {
            from: ids[key.0].clone(),
            to: ids[key.1].clone(),
            susceptance: rng.random_range(2.0..20.0),
            capacity_mw: rng.random_range(30.0..200.0),
        });
    }
    let n_designated = rng.random_range(1..=3.min(n - 1));
    let mut buses: Vec<Bus> = ids
        .iter()
        .map(|id| {
            let base = rng.random_range(0.0..40.0);
            let mut load = [0.0; HOURS];
            for (h, v) in load.iter_mut().enumerate() {
                *v = base * (0.6 + 0.4 * ((h as f64 - 4.0) * std::f64::consts::PI / 24.0).sin().abs());
            }
            Bus { id: id.clone(), load_mw: load, is_manhattan: false }
        })
        .collect();
    for b in buses.iter_mut().skip(n - n_designated) {
        b.is_manhattan = true;
    }
    let mut generators = vec![Generator { bus: ids[0].clone(), p_min_mw: 0.0, p_max_mw: rng.random_range(100.0..600.0) }];
    for id in ids.iter().take(n - n_designated).skip(1) {
        if rng.random_bool(0.4) {
            let p_max = rng.random_range(20.0..200.0);
            let p_min = if rng.random_bool(0.2) { rng.random_range(0.0..p_max / 4.0) } else { 0.0 };
            generators.push(Generator { bus: id.clone(), p_min_mw: p_min, p_max_mw: p_max });
        }
    }
    Network::new(format!("random{n}"), &ids[0], buses, lines, generators).expect("generated network is valid")
}

// ---------------------------------------------------------------------------
// Scheduling

/// kW per hour slot of `task` started `offset` hours after its window opens,
/// computed by interval overlap over two days.
pub fn placement_load(task: &ChargeTask, offset: f64) -> [f64; HOURS] {
    let mut out = [0.0; HOURS];
    if task.energy_kwh <= 0.0 {
        return out;
    }
    let start = f64::from(task.window_start_hour) + offset;
    let end = start + task.energy_kwh / task.power_kw;
    for day in 0..3 {
        for (h, slot) in out.iter_mut().enumerate() {
            let lo = (h + HOURS * day) as f64;
            let overlap = (end.min(lo + 1.0) - start.max(lo)).max(0.0);
            *slot += overlap * task.power_kw;
        }
    }
    out
}

fn window(task: &ChargeTask) -> f64 {
    let len = (i32::from(task.window_end_hour) - i32::from(task.window_start_hour)).rem_euclid(24);
    f64::from(if len == 0 { 24 } else { len })
}

/// Whole-hour offsets and the latest fitting offset.
pub fn offsets(task: &ChargeTask) -> Vec<f64> {
    let slack = (window(task) - task.energy_kwh / task.power_kw).max(0.0);
    let mut v: Vec<f64> = (0..=slack.floor() as usize).map(|k| k as f64).collect();
    if slack.fract() > 1e-9 {
        v.push(slack);
    }
    v
}

/// Minimum achievable peak (kW) over all combinations of [`offsets`], by
/// depth-first search with peak pruning.
pub fn min_peak(tasks: &[ChargeTask]) -> f64 {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| tasks[b].energy_kwh.total_cmp(&tasks[a].energy_kwh));
    let options: Vec<Vec<[f64; HOURS]>> =
        order.iter().map(|&i| offsets(&tasks[i]).iter().map(|&o| placement_load(&tasks[i], o)).collect()).collect();
    let mut best = f64::INFINITY;
    fn dfs(k: usize, load: &mut [f64; HOURS], options: &[Vec<[f64; HOURS]>], best: &mut f64) {
        let peak = load.iter().copied().fold(0.0, f64::max);
        if peak >= *best - 1e-12 {
            return;
        }
        if k == options.len() {
            *best = peak;
            return;
        }
        for opt in &options[k] {
            for h in 0..HOURS {
                load[h] += opt[h];
            }
            dfs(k + 1, load, options, best);
            for h in 0..HOURS {
                load[h] -= opt[h];
            }
        }
    }
    dfs(0, &mut [0.0; HOURS], &options, &mut best);
    best
}

pub fn random_task(rng: &mut impl Rng, id: u64) -> ChargeTask {
    let start = rng.random_range(0..24u8);
    let len = rng.random_range(1..=10u8);
    let power = [3.3, 7.2, 11.0, 50.0][rng.random_range(0..4)];
    let energy = rng.random_range(0.0..=1.0) * power * f64::from(len);
    ChargeTask {
        individual_id: id,
        mode: Mode::PrivateEv,
        energy_kwh: energy,
        power_kw: power,
        window_start_hour: start,
        window_end_hour: (start + len) % 24,
        location: TaskLocation::Work,
    }
}

// ---------------------------------------------------------------------------
// Files

/// SHA-256 of every regular file in `dir`, keyed by file name.
pub fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("readable directory") {
        let entry = entry.expect("directory entry");
        if entry.file_type().expect("file type").is_file() {
            let bytes = std::fs::read(entry.path()).expect("readable file");
            let digest = format!("{:x}", Sha256::digest(&bytes));
            out.insert(entry.file_name().to_string_lossy().into_owned(), digest);
        }
    }
    out
}
