use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use commute_grid_testkit as tk;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_commute-grid"));
    c.env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const ARTIFACTS: [&str; 10] = [
    "scenario.csv",
    "profile_earliest.csv",
    "profile_latest.csv",
    "profile_distributed.csv",
    "capacity.csv",
    "headroom.json",
    "shares.json",
    "zone_shares.json",
    "issues.json",
    "summary.txt",
];

#[test]
fn demo_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let o = run(&["demo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("car_focused"), "{stdout}");
    assert!(stdout.contains("wrote 10 files"), "{stdout}");
    for f in ARTIFACTS {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let headroom: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("headroom.json")).unwrap()).unwrap();
    assert!(headroom["earliest"]["peak_mw"].as_f64().unwrap() > headroom["distributed"]["peak_mw"].as_f64().unwrap());
    let capacity = std::fs::read_to_string(out.join("capacity.csv")).unwrap();
    assert_eq!(capacity.lines().next().unwrap(), "hour,base_load_mw,additional_mw,envelope_mw");
    assert_eq!(capacity.lines().count(), 25);
}

#[test]
fn demo_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["--quiet", "demo", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        assert!(o.stdout.is_empty());
    }
    let (ha, hb) = (tk::hash_dir(&a), tk::hash_dir(&b));
    assert_eq!(ha.len(), ARTIFACTS.len());
    assert_eq!(ha, hb);
}

#[test]
fn seed_and_policy_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run(&["--quiet", "demo", "--out", a.to_str().unwrap(), "--policy", "distributed"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(a.join("profile_distributed.csv").is_file());
    assert!(!a.join("profile_earliest.csv").exists());
    let o = run(&["--quiet", "demo", "--out", b.to_str().unwrap(), "--policy", "distributed", "--seed", "7"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("scenario.csv")).unwrap(), std::fs::read(b.join("scenario.csv")).unwrap());
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_tree(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

fn data_copy(dir: &Path) -> PathBuf {
    copy_tree(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data"), dir);
    dir.join("demo/config.json")
}

fn edit(path: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    std::fs::write(path, v.to_string()).unwrap();
}

#[test]
fn run_with_config_writes_to_configured_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    edit(&cfg, |v| {
        v["population"]["n"] = 1500.into();
        v["policies"] = serde_json::json!(["earliest"]);
    });
    let o = run(&["--quiet", "run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = dir.path().join("demo/out");
    assert!(out.join("profile_earliest.csv").is_file());
    assert!(!out.join("profile_latest.csv").exists());
}

#[test]
fn missing_network_fails_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    edit(&cfg, |v| v["network"] = "../networks/nowhere".into());
    let out = dir.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = text(&o.stderr);
    assert!(err.contains("nowhere") && err.contains("network"), "{err}");
    assert!(!out.exists(), "nothing is written on failure");
}

#[test]
fn validate_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_copy(dir.path());
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stdout));
    assert!(text(&o.stdout).contains("ok"));

    edit(&cfg, |v| {
        v["lambda"] = (-1.0).into();
        v["scenario"] = serde_json::json!({"weights": {"transit": 0, "car": 0, "micromobility": 0, "wfh": 0}, "seed": 1});
    });
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let out = text(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("lambda:")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("scenario.weights:")), "{out}");

    let o = run(&["validate", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn scenario_command_requires_a_choice() {
    let o = run(&["scenario", "--server", "http://127.0.0.1:9"]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("--preset"));
    let o = run(&["scenario", "--weights", "1,2", "--server", "http://127.0.0.1:9"]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("four values"));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn client_commands_talk_to_a_running_server() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port().to_string();
    let _server = Server(
        bin()
            .args(["--quiet", "serve", "--port", &port])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let url = format!("http://127.0.0.1:{port}");
    let start = Instant::now();
    let capacity = loop {
        let o = run(&["capacity", "--server", &url]);
        if o.status.success() {
            break text(&o.stdout);
        }
        assert!(start.elapsed() < Duration::from_secs(60), "server never became ready: {}", text(&o.stderr));
        std::thread::sleep(Duration::from_millis(200));
    };
    let v: serde_json::Value = serde_json::from_str(&capacity).unwrap();
    assert_eq!(v["envelope"]["envelope_mw"].as_array().unwrap().len(), 24);

    let o = run(&["scenario", "--server", &url, "--preset", "car_focused", "--seed", "42"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let s = text(&o.stdout);
    assert!(s.contains("scenario car_focused") && s.contains("peak"), "{s}");

    let o = run(&["scenario", "--server", &url, "--weights", "1,1,1,0", "--policy", "distributed", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&text(&o.stdout)).unwrap();
    assert_eq!(v["policy"], "distributed");

    let o = run(&["scenario", "--server", &url, "--weights", "0,0,0,0"]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("weights"));
}
