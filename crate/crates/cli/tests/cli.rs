use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn hubcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_cfg() -> PathBuf {
    data("tiny").join("run.cfg")
}

#[test]
fn tiny_stress_test_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = hubcap(&[
        "stress-test",
        "--config",
        s(&tiny_cfg()),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&dir.path().join("reports/BDN.json"));
    assert_eq!(report["status"], "optimal");
    assert!((report["objective"].as_f64().unwrap() - 17.0).abs() < 1e-9);
    for name in ["BDN", "SDN", "SDiN", "ISN"] {
        let plan = json(&dir.path().join(format!("plans/{name}.json")));
        assert_eq!(plan["hubs"][0]["hub"], "H");
    }
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "plan,level,capacity,active_hubs,avg_capacity,connectivity,on_time_rate,avg_daily_total_cost,resilience_slope"
    );
    assert_eq!(lines.count(), 16);
}

#[test]
fn generate_writes_four_deterministic_sets() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = data("example").join("run.cfg");
    for d in [&a, &b] {
        let out = hubcap(&["generate", "--config", s(&cfg), "--out", s(d.path())]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for level in 1..=4 {
        let rel = format!("scenarios/L{level}.json");
        let text_a = fs::read(a.path().join(&rel)).unwrap();
        assert_eq!(
            text_a,
            fs::read(b.path().join(&rel)).unwrap(),
            "{rel} differs between runs"
        );
        let set = json(&a.path().join(&rel));
        let scenarios = set["scenarios"].as_array().unwrap();
        assert_eq!(scenarios.len(), 50);
        if level == 1 {
            assert!(scenarios.iter().all(|x| x == &scenarios[0]));
        }
    }
}

#[test]
fn optimize_reads_generated_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_cfg();
    let out = hubcap(&[
        "generate",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "--level",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = hubcap(&[
        "optimize",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "--level",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plan = json(&dir.path().join("plans/BDN.json"));
    assert_eq!(plan["hubs"][0]["capacity"], 5);
}

#[test]
fn missing_scenario_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hubcap(&[
        "optimize",
        "--config",
        s(&tiny_cfg()),
        "--out",
        s(dir.path()),
        "--level",
        "2",
    ]);
    assert_eq!(code(&out), 74);
    assert!(stderr(&out).contains("L2.json"), "{}", stderr(&out));
}

#[test]
fn usage_and_config_errors_exit_64() {
    assert_eq!(code(&hubcap(&["optimize", "--no-such-flag"])), 64);
    assert_eq!(
        code(&hubcap(&[
            "generate",
            "--config",
            s(&tiny_cfg()),
            "--level",
            "9"
        ])),
        64
    );
    let dir = tempfile::tempdir().unwrap();
    let out = hubcap(&[
        "generate",
        "--config",
        s(&tiny_cfg()),
        "--out",
        s(dir.path()),
        "--demand-quantile",
        "1.5",
    ]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("--demand-quantile"));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "nodes = x.csv\nspeed = fast\n").unwrap();
    let out = hubcap(&["generate", "--config", s(&bad)]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("bad.cfg:2"), "{}", stderr(&out));
}

#[test]
fn infeasible_without_overflow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = hubcap(&[
        "stress-test",
        "--config",
        s(&tiny_cfg()),
        "--out",
        s(dir.path()),
        "--capacity-cap",
        "3",
        "--overflow-penalty",
        "none",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn simulate_matrix_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_cfg();
    let out = hubcap(&["stress-test", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let one = dir.path().join("one");
    let bdn = dir.path().join("plans/BDN.json");
    let out = hubcap(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&one),
        "--plan",
        s(&bdn),
        "--level",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = json(&one.join("kpi.json"));
    assert_eq!(m["cells"].as_array().unwrap().len(), 1);
    assert_eq!(m["cells"][0]["plan"], "BDN");
    assert_eq!(m["cells"][0]["level"], "L3");

    let all = dir.path().join("all");
    let mut args = vec!["simulate", "--config", s(&cfg), "--out", s(&all)];
    let plans: Vec<PathBuf> = ["BDN", "SDN", "SDiN", "ISN"]
        .iter()
        .map(|n| dir.path().join(format!("plans/{n}.json")))
        .collect();
    for p in &plans {
        args.extend(["--plan", s(p)]);
    }
    let out = hubcap(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        json(&all.join("kpi.json"))["cells"]
            .as_array()
            .unwrap()
            .len(),
        16
    );
}

#[test]
fn zero_demand_replay_costs_hub_share_only() {
    let dir = tempfile::tempdir().unwrap();
    let history = dir.path().join("history.csv");
    fs::write(
        &history,
        "date,origin,destination,quantity\n2024-01-01,O,D,0\n2024-01-02,O,D,0\n2024-01-03,O,D,0\n",
    )
    .unwrap();
    let plan = dir.path().join("open.json");
    fs::write(&plan, r#"{"hubs":[{"hub":"H","open":true,"capacity":5}]}"#).unwrap();
    let out = hubcap(&[
        "simulate",
        "--config",
        s(&tiny_cfg()),
        "--history",
        s(&history),
        "--out",
        s(dir.path()),
        "--plan",
        s(&plan),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = json(&dir.path().join("kpi.json"));
    // s * C + f / horizon = 1 * 5 + 10 / 3
    let share = 5.0 + 10.0 / 3.0;
    for cell in m["cells"].as_array().unwrap() {
        let r = &cell["report"];
        assert_eq!(r["on_time_rate"], 1.0);
        assert!((r["avg_daily_total_cost"].as_f64().unwrap() - share).abs() < 1e-9);
        assert_eq!(r["avg_daily_fleet_cost"], 0.0);
    }
}

#[test]
fn metrics_from_reports_and_plans() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_cfg();
    let out = hubcap(&["stress-test", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = dir.path().join("m");
    let out = hubcap(&[
        "metrics",
        "--config",
        s(&cfg),
        "--out",
        s(&m),
        "--report",
        s(&dir.path().join("reports/BDN.json")),
        "--plan",
        s(&dir.path().join("plans/ISN.json")),
        "--degree-scope",
        "hubs",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(m.join("metrics.csv")).unwrap();
    assert_eq!(
        csv,
        "plan,capacity,active_hubs,avg_capacity,connectivity\nBDN,5,1,5.0,0.0\nISN,5,1,5.0,0.0\n"
    );
    assert_eq!(
        code(&hubcap(&["metrics", "--config", s(&cfg), "--out", s(&m)])),
        64
    );
}

#[test]
fn synth_minimal_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let args = [
            "synth",
            "--origins",
            "1",
            "--hubs",
            "1",
            "--destinations",
            "1",
            "--days",
            "3",
            "--seed",
            "11",
            "--out",
            s(d.path()),
        ];
        let out = hubcap(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for f in [
        "nodes.csv",
        "arcs.csv",
        "economics.csv",
        "history.csv",
        "run.cfg",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let nodes = fs::read_to_string(a.path().join("nodes.csv")).unwrap();
    assert_eq!(nodes.lines().count(), 4);
    let out_dir = a.path().join("out");
    let out = hubcap(&[
        "stress-test",
        "--config",
        s(&a.path().join("run.cfg")),
        "--out",
        s(&out_dir),
        "--scenario-count",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_dir.join("comparison.json").exists());
}

#[test]
fn zero_counts_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = hubcap(&["synth", "--hubs", "0", "--out", s(dir.path())]);
    assert_eq!(code(&out), 64);
}
