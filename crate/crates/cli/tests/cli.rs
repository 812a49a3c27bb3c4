use std::path::Path;
use std::process::{Command, Output};

fn megpc(args: &[&str]) -> Output {
    megpc_threads(args, None)
}

fn megpc_threads(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_megpc"));
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, tag: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{tag}.json"));
    let cfg = serde_json::json!({
        "problem": "linear-ode",
        "method": "me-lha",
        "m": 50000,
        "seed": 7,
        "order": 3,
        "output": {
            "report": dir.join(format!("{tag}-report.json")),
            "trace": dir.join(format!("{tag}-trace.csv")),
            "cache": dir.join(format!("{tag}-cache.json")),
            "events": dir.join(format!("{tag}-events.csv")),
        }
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("megpc-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn without_wall_time(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn runs_are_reproducible() {
    let dir = scratch("repro");
    let cfg = write_config(&dir, "a");
    let suffixes = ["report.json", "trace.csv", "cache.json", "events.csv"];
    let mut first = Vec::new();
    // Same config, different thread pools.
    for (round, threads) in [1, 4].into_iter().enumerate() {
        let out = megpc_threads(&["estimate", "--config", cfg.to_str().unwrap()], Some(threads));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        if round == 0 {
            first = suffixes
                .iter()
                .map(|s| std::fs::read(dir.join(format!("a-{s}"))).unwrap())
                .collect();
            std::fs::write(dir.join("first-report.json"), &first[0]).unwrap();
        }
    }
    assert_eq!(
        without_wall_time(&dir.join("first-report.json")),
        without_wall_time(&dir.join("a-report.json"))
    );
    for (s, a) in suffixes.iter().zip(&first).skip(1) {
        assert_eq!(a, &std::fs::read(dir.join(format!("a-{s}"))).unwrap(), "{s} differs");
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = scratch("echo");
    let out = megpc(&["estimate", "--config", write_config(&dir, "a").to_str().unwrap()]);
    assert!(out.status.success());
    let report = without_wall_time(&dir.join("a-report.json"));
    let mut echo = report["config"].clone();
    echo["output"] = serde_json::json!({ "report": dir.join("b-report.json") });
    std::fs::write(dir.join("echo.json"), echo.to_string()).unwrap();
    let out = megpc(&["estimate", "--config", dir.join("echo.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again = without_wall_time(&dir.join("b-report.json"));
    assert_eq!(report["estimate"], again["estimate"]);
    assert_eq!(report["n_exact"], again["n_exact"]);
    assert_eq!(report["elements"], again["elements"]);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn cached_surrogate_gives_the_same_estimate() {
    let dir = scratch("cache");
    let cache = dir.join("mesh.json");
    let out = megpc(&[
        "refine",
        "--problem",
        "burgers",
        "--order",
        "3",
        "--cache",
        cache.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let base = serde_json::json!({ "problem": "burgers", "method": "me-gha", "m": 20000, "seed": 3, "order": 3 });
    std::fs::write(dir.join("fresh.json"), base.to_string()).unwrap();
    let mut cached = base.clone();
    cached["cache"] = cache.to_str().unwrap().into();
    std::fs::write(dir.join("cached.json"), cached.to_string()).unwrap();
    let parse = |o: Output| serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap();
    let fresh = parse(megpc(&[
        "estimate",
        "--config",
        dir.join("fresh.json").to_str().unwrap(),
    ]));
    let reused = parse(megpc(&[
        "estimate",
        "--config",
        dir.join("cached.json").to_str().unwrap(),
    ]));
    assert_eq!(fresh["estimate"], reused["estimate"]);
    assert_eq!(fresh["n_exact"], reused["n_exact"]);
    assert_eq!(fresh["elements"], reused["elements"]);
    assert_eq!(reused["construction_calls"], 0);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn set_overrides_apply() {
    let dir = scratch("set");
    let cfg = write_config(&dir, "a");
    let out = megpc(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "method=mc",
        "--set",
        "m=1000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["m"], 1000);
    assert_eq!(v["elements"], 0);
    assert_eq!(v["n_exact"], 1000);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exit_codes() {
    assert_eq!(megpc(&["--help"]).status.code(), Some(0));
    assert_eq!(megpc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(megpc(&["table", "9"]).status.code(), Some(1));

    let dir = scratch("exit");
    let cfg = write_config(&dir, "a");
    let missing = megpc(&["estimate", "--config", cfg.to_str().unwrap(), "--set", "gamma=0.2"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("`gamma`"));

    // A huge initial perturbation makes the exact KO trajectory blow up.
    let ko = dir.join("ko.json");
    let cfg = serde_json::json!({ "problem": "ko3", "method": "mc", "m": 10, "seed": 1, "params": { "amplitude": 1e100, "dt": 0.5 } });
    std::fs::write(&ko, cfg.to_string()).unwrap();
    let numerical = megpc(&["estimate", "--config", ko.to_str().unwrap()]);
    assert_eq!(
        numerical.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&numerical.stderr)
    );
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn validate_reports_corrupted_cache() {
    let dir = scratch("validate");
    let cache = dir.join("mesh.json");
    assert!(
        megpc(&["refine", "--problem", "linear-ode", "--cache", cache.to_str().unwrap()])
            .status
            .success()
    );
    let ok = megpc(&["validate", "--cache", cache.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");

    // Stretch element 1 over its neighbour.
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cache).unwrap()).unwrap();
    v["elements"][1]["upper"][0] = serde_json::json!(0.99);
    std::fs::write(&cache, v.to_string()).unwrap();
    let bad = megpc(&["validate", "--cache", cache.to_str().unwrap()]);
    assert_ne!(bad.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    let line = stdout.lines().find(|l| l.contains("cache partition")).unwrap();
    assert!(line.starts_with("FAIL") && line.contains("element"), "{line}");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn table_csv_has_side_by_side_columns() {
    let out = megpc(&["table", "1", "--m", "20000", "--seed", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 3 * 3);
    assert!(header.contains("p=7 abs_diff"));
    assert_eq!(text.lines().count(), 4);
}
