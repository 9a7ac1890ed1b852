//! Charging start-time policies.
//!
//! A task charges at constant power for `energy / power` hours somewhere
//! inside its window. A policy only chooses the start offset within the
//! window, so every policy delivers exactly the requested energy.

use serde::{Deserialize, Serialize};

use super::profile::{LoadProfile, HOURS};
use super::ChargeTask;
use crate::mode::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[serde(alias = "Earliest")]
    Earliest,
    #[serde(alias = "Latest")]
    Latest,
    #[serde(alias = "Distributed")]
    Distributed,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Earliest, Policy::Latest, Policy::Distributed];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Earliest => "earliest",
            Policy::Latest => "latest",
            Policy::Distributed => "distributed",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "earliest" => Ok(Policy::Earliest),
            "latest" => Ok(Policy::Latest),
            "distributed" => Ok(Policy::Distributed),
            other => Err(format!("unknown policy `{other}` (expected earliest, latest or distributed)")),
        }
    }
}

const EPS: f64 = 1e-9;

impl ChargeTask {
    /// Hours of charging at full power.
    pub fn duration_hours(&self) -> f64 {
        if self.energy_kwh <= 0.0 {
            0.0
        } else {
            self.energy_kwh / self.power_kw
        }
    }

    /// Latest feasible start offset within the window.
    pub fn slack_hours(&self) -> f64 {
        (f64::from(self.window_len()) - self.duration_hours()).max(0.0)
    }

    /// Start offsets considered by the peak-minimizing policy: every whole
    /// hour that fits, plus the just-in-time offset.
    pub fn candidate_offsets(&self) -> Vec<f64> {
        let slack = self.slack_hours();
        let whole = (slack + EPS).floor() as usize;
        let mut out: Vec<f64> = (0..=whole).map(|k| k as f64).collect();
        if slack - whole as f64 > EPS {
            out.push(slack);
        }
        out
    }
}

/// Adds the load of `task` started `offset` hours into its window (kW per
/// hour slot, wrapping past midnight).
pub fn add_task_load(load: &mut [f64; HOURS], task: &ChargeTask, offset: f64, sign: f64) {
    let dur = task.duration_hours();
    if dur <= 0.0 {
        return;
    }
    let mut t = f64::from(task.window_start_hour) + offset;
    let end = t + dur;
    while t < end - 1e-12 {
        let slot = t.floor();
        let next = (slot + 1.0).min(end);
        let idx = (slot as i64).rem_euclid(HOURS as i64) as usize;
        load[idx] += sign * task.power_kw * (next - t);
        t = next;
    }
}

/// Load of a single task in kW per hour.
pub fn task_load(task: &ChargeTask, offset: f64) -> [f64; HOURS] {
    let mut load = [0.0; HOURS];
    add_task_load(&mut load, task, offset, 1.0);
    load
}

fn peak(load: &[f64; HOURS]) -> f64 {
    load.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn sum_sq(load: &[f64; HOURS]) -> f64 {
    load.iter().map(|v| v * v).sum()
}

/// Chooses a start offset for every task.
pub fn plan(tasks: &[ChargeTask], policy: Policy) -> Vec<f64> {
    plan_over(tasks, policy, &[0.0; HOURS])
}

/// Like [`plan`], with the peak-minimizing policy accounting for a fixed
/// `background` load (kW) that the tasks are stacked on.
pub fn plan_over(tasks: &[ChargeTask], policy: Policy, background: &[f64; HOURS]) -> Vec<f64> {
    match policy {
        Policy::Earliest => vec![0.0; tasks.len()],
        Policy::Latest => tasks.iter().map(ChargeTask::slack_hours).collect(),
        Policy::Distributed => distributed(tasks, background),
    }
}

fn profile_of(tasks: &[ChargeTask], offsets: &[f64], background: &[f64; HOURS]) -> [f64; HOURS] {
    let mut load = *background;
    for (t, &o) in tasks.iter().zip(offsets) {
        add_task_load(&mut load, t, o, 1.0);
    }
    load
}

/// Best offset for `task` on top of `load`: lowest resulting peak, then
/// lowest sum of squares, then earliest.
fn best_offset(load: &mut [f64; HOURS], task: &ChargeTask) -> f64 {
    let mut best: Option<(f64, f64, f64)> = None;
    for o in task.candidate_offsets() {
        add_task_load(load, task, o, 1.0);
        let (pk, sq) = (peak(load), sum_sq(load));
        add_task_load(load, task, o, -1.0);
        let better = match best {
            None => true,
            Some((bp, bs, _)) => {
                let tol = EPS * bp.abs().max(1.0);
                pk < bp - tol || (pk <= bp + tol && sq < bs - EPS * bs.abs().max(1.0))
            }
        };
        if better {
            best = Some((pk, sq, o));
        }
    }
    best.map_or(0.0, |b| b.2)
}

const PAIR_CANDIDATES: usize = 40;
const PAIR_ROUNDS: usize = 50;
const REFINE_ROUNDS: usize = 5;
const KICK_LIMIT: usize = 256;
const KICK_ROUNDS: usize = 10;
const KICK_CANDIDATES: usize = 8;
const SEARCH_NODES: usize = 200_000;

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    let tp = EPS * b.0.abs().max(1.0);
    a.0 < b.0 - tp || (a.0 <= b.0 + tp && a.1 < b.1 - EPS * b.1.abs().max(1.0))
}

fn window_mask(task: &ChargeTask) -> u32 {
    (0..task.window_len()).fold(0, |m, k| m | 1 << ((usize::from(task.window_start_hour) + usize::from(k)) % HOURS))
}

/// Joint moves of a task charging in the peak hour and a task whose window
/// overlaps its own. Escapes the local optima where no single task can move
/// without raising the peak.
fn improve_pairs(tasks: &[ChargeTask], offsets: &mut [f64], load: &mut [f64; HOURS]) -> bool {
    let masks: Vec<u32> = tasks.iter().map(window_mask).collect();
    let mut by_energy: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].slack_hours() > EPS).collect();
    by_energy.sort_by(|&a, &b| tasks[b].energy_kwh.total_cmp(&tasks[a].energy_kwh).then(a.cmp(&b)));
    let options = |i: usize| -> Vec<(f64, [f64; HOURS])> {
        tasks[i].candidate_offsets().into_iter().map(|o| (o, task_load(&tasks[i], o))).collect()
    };
    let mut improved = false;
    for _ in 0..PAIR_ROUNDS {
        let h = (0..HOURS).fold(0, |b, i| if load[i] > load[b] { i } else { b });
        let mut at_peak: Vec<(usize, f64)> = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (i, task_load(t, offsets[i])[h]))
            .filter(|(_, v)| *v > 0.0)
            .collect();
        at_peak.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        at_peak.truncate(PAIR_CANDIDATES);
        let mut current = (peak(load), sum_sq(load));
        let mut chosen = None;
        for &(i, _) in &at_peak {
            let oi_all = options(i);
            let partners =
                by_energy.iter().copied().filter(|&j| j != i && masks[i] & masks[j] != 0).take(PAIR_CANDIDATES);
            for j in partners {
                let oj_all = options(j);
                let mut rest = *load;
                add_task_load(&mut rest, &tasks[i], offsets[i], -1.0);
                add_task_load(&mut rest, &tasks[j], offsets[j], -1.0);
                for (oi, li) in &oi_all {
                    for (oj, lj) in &oj_all {
                        let trial: [f64; HOURS] = std::array::from_fn(|k| rest[k] + li[k] + lj[k]);
                        let score = (peak(&trial), sum_sq(&trial));
                        if better(score, current) {
                            current = score;
                            chosen = Some((i, *oi, j, *oj));
                        }
                    }
                }
            }
        }
        let Some((i, oi, j, oj)) = chosen else { break };
        improved = true;
        add_task_load(load, &tasks[i], offsets[i], -1.0);
        add_task_load(load, &tasks[j], offsets[j], -1.0);
        offsets[i] = oi;
        offsets[j] = oj;
        add_task_load(load, &tasks[i], oi, 1.0);
        add_task_load(load, &tasks[j], oj, 1.0);
    }
    improved
}

/// Peak-minimizing placement.
///
/// Several starting plans (greedy insertion in decreasing-energy order, with
/// and without look-ahead, least-flexible-first, and the two fixed policies)
/// are improved by re-insertion passes and pairwise moves around the peak
/// hour; small sets also get kick moves. The best plan then seeds a
/// node-limited exhaustive search. If charging on arrival or just in time
/// still gives a lower peak, that placement is returned instead, so the
/// result never peaks above either of the other policies. Sequential.
fn distributed(tasks: &[ChargeTask], background: &[f64; HOURS]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| tasks[b].energy_kwh.total_cmp(&tasks[a].energy_kwh).then(a.cmp(&b)));

    let mut tight = order.clone();
    tight.sort_by(|&a, &b| tasks[a].slack_hours().total_cmp(&tasks[b].slack_hours()).then(a.cmp(&b)));
    let starts = [
        construct(tasks, &order, background, false),
        construct(tasks, &order, background, true),
        construct(tasks, &tight, background, true),
        plan(tasks, Policy::Earliest),
        plan(tasks, Policy::Latest),
    ];
    let mut best: Option<((f64, f64), Vec<f64>)> = None;
    for mut offsets in starts {
        let load = refine(tasks, &order, &mut offsets, background);
        let score = (peak(&load), sum_sq(&load));
        if best.as_ref().is_none_or(|(b, _)| better(score, *b)) {
            best = Some((score, offsets));
        }
    }
    let (score, offsets) = best.expect("at least one construction");
    let (score, offsets) = if tasks.len() <= KICK_LIMIT { kick(tasks, &order, score, offsets, background) } else { (score, offsets) };
    let offsets = improve_exhaustive(tasks, &order, score.0, offsets, background);
    let mut best = (peak(&profile_of(tasks, &offsets, background)), offsets);
    for policy in [Policy::Earliest, Policy::Latest] {
        let alt = plan(tasks, policy);
        let pk = peak(&profile_of(tasks, &alt, background));
        if pk < best.0 - EPS * best.0.abs().max(1.0) {
            best = (pk, alt);
        }
    }
    best.1
}

/// Perturbs the plan by forcing each task in the peak hour to each of its
/// other offsets and re-running the local search; keeps any improvement.
fn kick(
    tasks: &[ChargeTask],
    order: &[usize],
    mut score: (f64, f64),
    mut offsets: Vec<f64>,
    background: &[f64; HOURS],
) -> ((f64, f64), Vec<f64>) {
    for _ in 0..KICK_ROUNDS {
        let load = profile_of(tasks, &offsets, background);
        let h = (0..HOURS).fold(0, |b, i| if load[i] > load[b] { i } else { b });
        let mut at_peak: Vec<(usize, f64)> = (0..tasks.len())
            .map(|i| (i, task_load(&tasks[i], offsets[i])[h]))
            .filter(|(_, v)| *v > 0.0)
            .collect();
        at_peak.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        at_peak.truncate(KICK_CANDIDATES);
        let mut found = None;
        for &(i, _) in &at_peak {
            for o in tasks[i].candidate_offsets() {
                if (o - offsets[i]).abs() <= EPS {
                    continue;
                }
                let mut trial = offsets.clone();
                trial[i] = o;
                let load = refine(tasks, order, &mut trial, background);
                let s = (peak(&load), sum_sq(&load));
                if better(s, found.as_ref().map_or(score, |(fs, _)| *fs)) {
                    found = Some((s, trial));
                }
            }
        }
        match found {
            Some((s, trial)) => {
                score = s;
                offsets = trial;
            }
            None => break,
        }
    }
    (score, offsets)
}

/// Depth-first search over all candidate offsets, pruned by the best peak so
/// far and stopped after a fixed number of nodes. Returns the best plan seen,
/// which is `offsets` unless a strictly lower peak was found.
fn improve_exhaustive(
    tasks: &[ChargeTask],
    order: &[usize],
    peak_now: f64,
    offsets: Vec<f64>,
    background: &[f64; HOURS],
) -> Vec<f64> {
    struct Search<'a> {
        order: &'a [usize],
        options: Vec<Vec<(f64, [f64; HOURS])>>,
        chosen: Vec<f64>,
        best: (f64, Option<Vec<f64>>),
        nodes: usize,
    }
    impl Search<'_> {
        fn dfs(&mut self, k: usize, load: &mut [f64; HOURS]) {
            self.nodes += 1;
            if self.nodes > SEARCH_NODES || peak(load) >= self.best.0 - EPS * self.best.0.abs().max(1.0) {
                return;
            }
            if k == self.order.len() {
                self.best = (peak(load), Some(self.chosen.clone()));
                return;
            }
            for c in 0..self.options[k].len() {
                let (o, l) = self.options[k][c];
                for h in 0..HOURS {
                    load[h] += l[h];
                }
                self.chosen[self.order[k]] = o;
                self.dfs(k + 1, load);
                for h in 0..HOURS {
                    load[h] -= l[h];
                }
            }
        }
    }
    let options = order
        .iter()
        .map(|&i| tasks[i].candidate_offsets().into_iter().map(|o| (o, task_load(&tasks[i], o))).collect())
        .collect();
    let mut search =
        Search { order, options, chosen: vec![0.0; tasks.len()], best: (peak_now, None), nodes: 0 };
    search.dfs(0, &mut background.clone());
    search.best.1.unwrap_or(offsets)
}

/// Energy of `task` spread evenly over its whole window.
fn add_expected(load: &mut [f64; HOURS], task: &ChargeTask, sign: f64) {
    if task.energy_kwh <= 0.0 {
        return;
    }
    let len = task.window_len();
    let per_hour = task.energy_kwh / f64::from(len);
    for k in 0..len {
        load[(usize::from(task.window_start_hour) + usize::from(k)) % HOURS] += sign * per_hour;
    }
}

/// Greedy insertion in `order`. With `lookahead`, offsets are scored
/// against the expected load of the tasks not yet placed as well.
fn construct(tasks: &[ChargeTask], order: &[usize], background: &[f64; HOURS], lookahead: bool) -> Vec<f64> {
    let mut offsets = vec![0.0; tasks.len()];
    let mut load = *background;
    let mut expected = [0.0; HOURS];
    if lookahead {
        for t in tasks {
            add_expected(&mut expected, t, 1.0);
        }
    }
    for &i in order {
        if lookahead {
            add_expected(&mut expected, &tasks[i], -1.0);
        }
        let mut scored: [f64; HOURS] = std::array::from_fn(|h| load[h] + expected[h]);
        let o = best_offset(&mut scored, &tasks[i]);
        offsets[i] = o;
        add_task_load(&mut load, &tasks[i], o, 1.0);
    }
    offsets
}

/// Alternating re-insertion passes and pairwise moves until neither helps.
/// Returns the resulting load.
fn refine(tasks: &[ChargeTask], order: &[usize], offsets: &mut [f64], background: &[f64; HOURS]) -> [f64; HOURS] {
    let mut load = profile_of(tasks, offsets, background);
    for _ in 0..REFINE_ROUNDS {
        for &i in order {
            add_task_load(&mut load, &tasks[i], offsets[i], -1.0);
            offsets[i] = best_offset(&mut load, &tasks[i]);
            add_task_load(&mut load, &tasks[i], offsets[i], 1.0);
        }
        if !improve_pairs(tasks, offsets, &mut load) {
            break;
        }
    }
    load
}

/// Schedules every task under `policy` and returns the per-category profile.
pub fn schedule(tasks: &[ChargeTask], policy: Policy) -> LoadProfile {
    let offsets = plan(tasks, policy);
    profile_from_offsets(tasks, &offsets)
}

/// Schedules on top of `background` and returns background plus charging.
pub fn schedule_over(tasks: &[ChargeTask], policy: Policy, background: &LoadProfile) -> LoadProfile {
    let kw = background.total_mw.map(|mw| mw * 1000.0);
    let offsets = plan_over(tasks, policy, &kw);
    profile_from_offsets(tasks, &offsets).add(background)
}

pub fn profile_from_offsets(tasks: &[ChargeTask], offsets: &[f64]) -> LoadProfile {
    let mut transit = [0.0; HOURS];
    let mut car = [0.0; HOURS];
    let mut micro = [0.0; HOURS];
    for (t, &o) in tasks.iter().zip(offsets) {
        let target = match t.mode.category() {
            Category::Transit => &mut transit,
            Category::Car => &mut car,
            Category::Micromobility => &mut micro,
            Category::Wfh => continue,
        };
        add_task_load(target, t, o, 1.0);
    }
    LoadProfile::from_kw(&transit, &car, &micro)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::TaskLocation;
    use crate::mode::Mode;

    fn task(id: u64, energy: f64, power: f64, start: u8, end: u8) -> ChargeTask {
        ChargeTask {
            individual_id: id,
            mode: Mode::PrivateEv,
            energy_kwh: energy,
            power_kw: power,
            window_start_hour: start,
            window_end_hour: end,
            location: TaskLocation::Work,
        }
    }

    #[test]
    fn single_task_earliest_and_latest() {
        let t = [task(1, 10.0, 10.0, 9, 17)];
        let e = schedule(&t, Policy::Earliest);
        assert_eq!(e.car_mw[9], 0.01);
        assert_eq!(e.total_mw.iter().filter(|v| **v > 0.0).count(), 1);
        let l = schedule(&t, Policy::Latest);
        assert_eq!(l.car_mw[16], 0.01);
        assert_eq!(l.total_mw.iter().filter(|v| **v > 0.0).count(), 1);
    }

    #[test]
    fn eight_identical_tasks_flatten() {
        let tasks: Vec<_> = (0..8).map(|i| task(i, 10.0, 10.0, 9, 17)).collect();
        let d = schedule(&tasks, Policy::Distributed);
        for h in 9..17 {
            assert!((d.car_mw[h] - 0.01).abs() < 1e-15, "hour {h}: {}", d.car_mw[h]);
        }
        assert!((d.peak().1 - 0.01).abs() < 1e-15);
        assert!((schedule(&tasks, Policy::Earliest).peak().1 - 0.08).abs() < 1e-15);
    }

    #[test]
    fn fractional_hours_are_prorated() {
        // 5 kWh at 10 kW: half an hour
        let t = [task(1, 5.0, 10.0, 22, 2)];
        let e = task_load(&t[0], 0.0);
        assert_eq!(e[22], 5.0);
        let l = task_load(&t[0], t[0].slack_hours());
        assert_eq!(l[1], 5.0);
        assert_eq!(t[0].candidate_offsets(), vec![0.0, 1.0, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn wrap_around_window() {
        let t = task(1, 30.0, 10.0, 22, 6);
        assert_eq!(t.window_len(), 8);
        let load = task_load(&t, 1.0);
        assert_eq!((load[23], load[0], load[1]), (10.0, 10.0, 10.0));
    }

    #[test]
    fn zero_energy_task_contributes_nothing() {
        let t = [task(1, 0.0, 7.0, 9, 17)];
        for p in Policy::ALL {
            assert_eq!(schedule(&t, p).daily_energy_kwh(), 0.0);
        }
    }
}
