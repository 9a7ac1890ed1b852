use std::path::PathBuf;
use std::time::{Duration, Instant};

use commute_grid::energy::HOURS;
use commute_grid::grid::{
    audit, capacity_envelope, dc_flows, fixtures, max_additional_load, ptdf, Bus, CapacityOptions, CapacityResult,
    Generator, GridError, Line, Network,
};
use commute_grid_testkit as tk;
use serde::{Deserialize, Serialize};

fn bundled() -> Vec<Network> {
    vec![fixtures::two_bus(), fixtures::three_bus(), fixtures::six_bus()]
}

fn all_fixtures() -> Vec<Network> {
    let mut v = bundled();
    v.push(fixtures::symmetric_pair());
    v
}

fn injections(net: &Network, sol: &commute_grid::grid::HourSolution) -> Vec<f64> {
    let mut inj: Vec<f64> = net.base_load(sol.hour).iter().map(|d| -d).collect();
    for (b, a) in sol.additional_mw.iter().enumerate() {
        inj[b] -= a;
    }
    for (g, p) in sol.dispatch_mw.iter().enumerate() {
        inj[net.gen_bus()[g]] += p;
    }
    inj
}

#[test]
fn lp_matches_vertex_and_angle_oracles_on_bundled_networks() {
    let opts = CapacityOptions::default();
    for net in bundled() {
        let t0 = Instant::now();
        let res = max_additional_load(&net, HOURS, 0.0, &opts).unwrap();
        let took = t0.elapsed();
        assert!(took < Duration::from_secs(5), "{}: {:?}", net.name, took);
        for sol in &res.hours {
            let vertex = tk::vertex_capacity(&net, sol.hour, 0.0).expect("feasible");
            let angle = tk::angle_lp_capacity(&net, sol.hour, 0.0).expect("feasible");
            assert!(
                (sol.total_additional_mw - vertex).abs() <= 1e-4,
                "{} hour {}: solver {} vertex {}",
                net.name,
                sol.hour,
                sol.total_additional_mw,
                vertex
            );
            assert!((vertex - angle).abs() <= 1e-4, "{} hour {}: oracles disagree", net.name, sol.hour);
        }
    }
}

#[test]
fn lp_matches_oracles_with_reserve_margin() {
    let opts = CapacityOptions { reserve_margin: 0.15, ..Default::default() };
    for net in bundled() {
        let res = max_additional_load(&net, HOURS, 0.0, &opts).unwrap();
        assert!(audit(&net, &res, 0.15, 1e-6).unwrap().is_empty());
        for sol in &res.hours {
            let vertex = tk::vertex_capacity(&net, sol.hour, 0.15).expect("feasible");
            assert!((sol.total_additional_mw - vertex).abs() <= 1e-4, "{} hour {}", net.name, sol.hour);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Golden {
    network: String,
    base_load_mw: Vec<f64>,
    additional_mw: Vec<f64>,
    envelope_mw: Vec<f64>,
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/six_bus_envelope.json")
}

fn oracle_golden() -> Golden {
    let net = fixtures::six_bus();
    let m = net.manhattan();
    let base: Vec<f64> = (0..HOURS).map(|h| m.iter().map(|&b| net.buses[b].load_mw[h]).sum()).collect();
    let add: Vec<f64> = (0..HOURS).map(|h| tk::vertex_capacity(&net, h, 0.0).expect("feasible")).collect();
    let env = base.iter().zip(&add).map(|(b, a)| b + a).collect();
    Golden { network: net.name.clone(), base_load_mw: base, additional_mw: add, envelope_mw: env }
}

#[test]
#[ignore = "rewrites the golden file"]
fn regenerate_six_bus_golden() {
    let g = oracle_golden();
    std::fs::write(golden_path(), serde_json::to_string_pretty(&g).unwrap() + "\n").unwrap();
}

#[test]
fn golden_file_is_the_vertex_oracle() {
    let stored: Golden = serde_json::from_str(&std::fs::read_to_string(golden_path()).unwrap()).unwrap();
    let fresh = oracle_golden();
    for h in 0..HOURS {
        assert!((stored.envelope_mw[h] - fresh.envelope_mw[h]).abs() <= 1e-9, "hour {h}");
    }
}

#[test]
fn six_bus_envelope_matches_golden() {
    let stored: Golden = serde_json::from_str(&std::fs::read_to_string(golden_path()).unwrap()).unwrap();
    let (env, _) = capacity_envelope(&fixtures::six_bus(), 0.0, &CapacityOptions::default()).unwrap();
    assert_eq!(env.network, stored.network);
    for h in 0..HOURS {
        assert!((env.base_load_mw[h] - stored.base_load_mw[h]).abs() <= 1e-9);
        assert!((env.envelope_mw[h] - stored.envelope_mw[h]).abs() <= 1e-4, "hour {h}");
    }
}

#[test]
fn ptdf_flows_match_direct_solve() {
    for net in all_fixtures() {
        let p = ptdf(&net).unwrap();
        let s = tk::sensitivities(&net);
        assert_eq!(p.shape(), s.shape());
        for (a, b) in p.iter().zip(s.iter()) {
            assert!((a - b).abs() <= 1e-8, "{}", net.name);
        }
        for lambda in [0.0, 0.1] {
            let res = max_additional_load(&net, HOURS, lambda, &CapacityOptions::default()).unwrap();
            for sol in &res.hours {
                let inj = injections(&net, sol);
                let direct = dc_flows(&net, &inj).unwrap();
                let reference = tk::flows(&net, &inj);
                for l in 0..net.lines.len() {
                    assert!((sol.flows_mw[l] - direct[l]).abs() <= 1e-8, "{} hour {} line {l}", net.name, sol.hour);
                    assert!((direct[l] - reference[l]).abs() <= 1e-8, "{} hour {} line {l}", net.name, sol.hour);
                }
            }
        }
    }
}

#[test]
fn randomized_networks_pass_audit_and_match_angle_oracle() {
    let mut rng = tk::rng(7);
    let mut checked = 0;
    let mut infeasible = 0;
    for i in 0..60 {
        let n = 2 + i % 9;
        let net = tk::random_network(&mut rng, n);
        let horizon = 6;
        match max_additional_load(&net, horizon, 0.0, &CapacityOptions::default()) {
            Ok(res) => {
                let problems = audit(&net, &res, 0.0, 1e-6).unwrap();
                assert!(problems.is_empty(), "network {i}: {problems:?}");
                for sol in &res.hours {
                    let oracle = tk::angle_lp_capacity(&net, sol.hour, 0.0).expect("oracle feasible too");
                    assert!((sol.total_additional_mw - oracle).abs() <= 1e-4, "network {i} hour {}", sol.hour);
                }
                let reg = max_additional_load(&net, horizon, 0.05, &CapacityOptions::default()).unwrap();
                let problems = audit(&net, &reg, 0.0, 1e-6).unwrap();
                assert!(problems.is_empty(), "network {i} regularized: {problems:?}");
                checked += 1;
            }
            Err(GridError::InfeasibleBaseCase { hour }) => {
                assert!(tk::angle_lp_capacity(&net, hour, 0.0).is_none(), "network {i} hour {hour}");
                infeasible += 1;
            }
            Err(e) => panic!("network {i}: {e}"),
        }
    }
    assert!(checked >= 50, "only {checked} feasible networks ({infeasible} infeasible)");
}

fn hour_objective(net: &Network, add: &[f64], hour: usize, lambda: f64) -> f64 {
    let d = net.base_load(hour);
    add.iter()
        .zip(&d)
        .map(|(a, d)| if *d > 0.0 { a - lambda * (a / d).powi(2) } else { *a })
        .sum()
}

#[test]
fn regularizer_spread_is_non_increasing() {
    let net = fixtures::symmetric_pair();
    let m = net.manhattan();
    assert_eq!(m.len(), 2);
    let spreads: Vec<Vec<f64>> = [0.0, 0.01, 0.1, 1.0]
        .iter()
        .map(|&l| {
            let res = max_additional_load(&net, HOURS, l, &CapacityOptions::default()).unwrap();
            res.hours
                .iter()
                .map(|s| {
                    let d = net.base_load(s.hour);
                    (s.additional_mw[m[0]] / d[m[0]] - s.additional_mw[m[1]] / d[m[1]]).abs()
                })
                .collect()
        })
        .collect();
    for w in spreads.windows(2) {
        for (h, (before, after)) in w[0].iter().zip(&w[1]).enumerate() {
            assert!(after <= &(before + 1e-6), "hour {h}: {before} then {after}");
        }
    }
}

#[test]
fn regularized_solution_beats_lp_vertex_under_penalty() {
    let opts = CapacityOptions::default();
    for net in all_fixtures() {
        let lp = max_additional_load(&net, HOURS, 0.0, &opts).unwrap();
        for lambda in [0.01, 0.1, 1.0] {
            let qp = max_additional_load(&net, HOURS, lambda, &opts).unwrap();
            for (a, b) in lp.hours.iter().zip(&qp.hours) {
                let f_lp = hour_objective(&net, &a.additional_mw, a.hour, lambda);
                let f_qp = hour_objective(&net, &b.additional_mw, b.hour, lambda);
                assert!(f_qp >= f_lp - 1e-5, "{} λ={lambda} hour {}: {f_qp} < {f_lp}", net.name, a.hour);
                assert!((b.objective - f_qp).abs() <= 1e-6);
                assert!(b.total_additional_mw <= a.total_additional_mw + 1e-6);
            }
        }
    }
}

#[test]
fn single_bus_penalty_has_closed_form() {
    // one designated bus: maximise a - λ(a/d)² on [0, cap], so a = min(d²/2λ, cap)
    let net = fixtures::two_bus();
    let bus = net.manhattan()[0];
    let lp = max_additional_load(&net, HOURS, 0.0, &CapacityOptions::default()).unwrap();
    for lambda in [5.0, 50.0, 500.0] {
        let qp = max_additional_load(&net, HOURS, lambda, &CapacityOptions::default()).unwrap();
        for (a, b) in lp.hours.iter().zip(&qp.hours) {
            let d = net.buses[bus].load_mw[a.hour];
            let expected = (d * d / (2.0 * lambda)).min(a.total_additional_mw);
            assert!((b.total_additional_mw - expected).abs() <= 1e-4, "λ={lambda} hour {}", a.hour);
        }
    }
}

fn bus(id: &str, load: f64, designated: bool) -> Bus {
    Bus { id: id.into(), load_mw: [load; HOURS], is_manhattan: designated }
}

fn line(a: &str, b: &str, cap: f64) -> Line {
    Line { from: a.into(), to: b.into(), susceptance: 10.0, capacity_mw: cap }
}

#[test]
fn disconnected_network_names_components() {
    let net = Network::new(
        "split",
        "a",
        vec![bus("a", 0.0, false), bus("b", 10.0, true), bus("c", 5.0, false)],
        vec![line("a", "b", 50.0)],
        vec![Generator { bus: "a".into(), p_min_mw: 0.0, p_max_mw: 100.0 }],
    )
    .unwrap();
    match max_additional_load(&net, 1, 0.0, &CapacityOptions::default()) {
        Err(GridError::Disconnected(parts)) => {
            assert_eq!(parts.len(), 2);
            assert!(parts.iter().any(|p| p == &vec!["c".to_string()]));
        }
        other => panic!("expected Disconnected, got {other:?}"),
    }
}

#[test]
fn infeasible_base_case_is_an_error() {
    let net = Network::new(
        "short",
        "a",
        vec![bus("a", 0.0, false), bus("b", 80.0, true)],
        vec![line("a", "b", 50.0)],
        vec![Generator { bus: "a".into(), p_min_mw: 0.0, p_max_mw: 500.0 }],
    )
    .unwrap();
    assert!(matches!(
        max_additional_load(&net, 3, 0.0, &CapacityOptions::default()),
        Err(GridError::InfeasibleBaseCase { hour: 0 })
    ));
    assert!(tk::angle_lp_capacity(&net, 0, 0.0).is_none());
}

#[test]
fn local_unlimited_generator_is_unbounded() {
    let net = Network::new(
        "local",
        "a",
        vec![bus("a", 0.0, false), bus("b", 10.0, true)],
        vec![line("a", "b", 50.0)],
        vec![
            Generator { bus: "a".into(), p_min_mw: 0.0, p_max_mw: 100.0 },
            Generator { bus: "b".into(), p_min_mw: 0.0, p_max_mw: f64::INFINITY },
        ],
    )
    .unwrap();
    let r = max_additional_load(&net, 1, 0.0, &CapacityOptions::default());
    assert!(matches!(r, Err(GridError::Unbounded { hour: 0 })), "{r:?}");
    // the penalty makes the same network bounded
    let res = max_additional_load(&net, 1, 1.0, &CapacityOptions::default()).unwrap();
    assert!((res.hours[0].total_additional_mw - 50.0).abs() <= 1e-3, "{}", res.hours[0].total_additional_mw);
}

#[test]
fn invalid_arguments_are_rejected() {
    let net = fixtures::two_bus();
    let opts = CapacityOptions::default();
    assert!(matches!(max_additional_load(&net, HOURS, -1.0, &opts), Err(GridError::Invalid(_))));
    assert!(matches!(max_additional_load(&net, HOURS, f64::NAN, &opts), Err(GridError::Invalid(_))));
    assert!(matches!(max_additional_load(&net, 0, 0.0, &opts), Err(GridError::Invalid(_))));
    assert!(matches!(max_additional_load(&net, 25, 0.0, &opts), Err(GridError::Invalid(_))));
}

#[test]
fn network_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for net in all_fixtures() {
        let d = dir.path().join(&net.name);
        net.write_dir(&d).unwrap();
        let back = Network::load_dir(&d).unwrap();
        assert_eq!(back.buses, net.buses);
        assert_eq!(back.lines, net.lines);
        assert_eq!(back.generators, net.generators);
        assert_eq!(back.slack_id(), net.slack_id());
    }
}

#[test]
fn audit_flags_tampered_solution() {
    let net = fixtures::three_bus();
    let mut res: CapacityResult = max_additional_load(&net, 2, 0.0, &CapacityOptions::default()).unwrap();
    assert!(audit(&net, &res, 0.0, 1e-6).unwrap().is_empty());
    let b = net.manhattan()[0];
    res.hours[0].additional_mw[b] += 5.0;
    assert!(!audit(&net, &res, 0.0, 1e-6).unwrap().is_empty());
}
