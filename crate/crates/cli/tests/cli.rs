use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapf-aa")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn solve_random(dir: &tempfile::TempDir, algo: &str) -> (Output, PathBuf, PathBuf) {
    let sol = dir.path().join(format!("{algo}.json"));
    let stats = dir.path().join(format!("{algo}-stats.json"));
    let map = data("random-8-8.map");
    let scen = data("random-8-8.scen");
    let out = run(&[
        "solve", "--map", &map, "--scen", &scen, "--agents", "4", "--speeds-seed", "4", "--algo", algo,
        "--time-limit", "20", "--out", sol.to_str().unwrap(), "--stats", stats.to_str().unwrap(),
    ]);
    (out, sol, stats)
}

#[test]
fn solve_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let (out, sol, stats) = solve_random(&dir, "cmas");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("solved soc="));

    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(stats).unwrap()).unwrap();
    assert_eq!(stats["outcome"], "solved");
    assert!(stats["expansions"].as_u64().unwrap() >= 1);

    let check = run(&["validate", "--map", &data("random-8-8.map"), "--solution", sol.to_str().unwrap()]);
    assert!(check.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&check)).unwrap();
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn every_algorithm_agrees_on_cost() {
    let dir = tempfile::tempdir().unwrap();
    let soc = |algo: &str| {
        let (out, sol, _) = solve_random(&dir, algo);
        assert!(out.status.success(), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(sol).unwrap()).unwrap();
        v["soc"].as_str().unwrap().to_string()
    };
    let reference = soc("oracle");
    for algo in ["csa", "cma", "cmas"] {
        assert_eq!(soc(algo), reference, "{algo}");
    }

    let alias = run(&[
        "oracle", "--map", &data("random-8-8.map"), "--scen", &data("random-8-8.scen"), "--agents", "4",
        "--speeds-seed", "4",
    ]);
    assert!(stdout(&alias).contains(&format!("soc={reference} ")));
}

#[test]
fn tampered_solution_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (out, sol, _) = solve_random(&dir, "cma");
    assert!(out.status.success());
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    // Make agent 1 teleport: its first move now lands on agent 0's start.
    v["agents"][1]["actions"][0]["to"] = "0,0".into();
    fs::write(&sol, v.to_string()).unwrap();
    let check = run(&["validate", "--map", &data("random-8-8.map"), "--solution", sol.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&check)).unwrap();
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn speeds_file_overrides_seed() {
    let dir = tempfile::tempdir().unwrap();
    let speeds = dir.path().join("speeds.txt");
    fs::write(&speeds, "1, 2\n3 4\n").unwrap();
    let sol = dir.path().join("s.json");
    let out = run(&[
        "solve", "--map", &data("random-8-8.map"), "--scen", &data("random-8-8.scen"), "--agents", "4", "--speeds",
        speeds.to_str().unwrap(), "--algo", "cma", "--out", sol.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(sol).unwrap()).unwrap();
    let got: Vec<u64> = v["agents"].as_array().unwrap().iter().map(|a| a["speed"].as_u64().unwrap()).collect();
    assert_eq!(got, vec![1, 2, 3, 4]);

    fs::write(&speeds, "1 2 3").unwrap();
    let short = run(&[
        "solve", "--map", &data("random-8-8.map"), "--agents", "4", "--speeds", speeds.to_str().unwrap(),
    ]);
    assert!(!short.status.success());
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = |tag: &str| {
        let runs = dir.path().join(format!("runs-{tag}.csv"));
        let summary = dir.path().join(format!("summary-{tag}.csv"));
        let out = run(&[
            "bench", "--maps", &data("empty-8-8.map"), "--agents", "2,3", "--algos", "csa,cma,cmas,oracle",
            "--seeds", "3", "--time-limit", "10", "--max-speed", "3", "--no-timing", "--out",
            runs.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read_to_string(runs).unwrap(), fs::read_to_string(summary).unwrap())
    };
    let (runs, summary) = sweep("a");
    let mut lines = runs.lines();
    assert_eq!(lines.next(), Some("map,N,mode,seed,outcome,soc,expansions,lowlevel_calls,wall_ms"));
    assert_eq!(lines.count(), 2 * 3 * 4);
    assert!(summary.starts_with("map,N,mode,runs,solved,success_rate,common_solved"));
    assert_eq!(sweep("b"), (runs, summary));
}

#[test]
fn bench_with_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs.csv");
    let out = run(&[
        "bench", "--maps", &data("random-8-8.map"), "--scens", &data("random-8-8.scen"), "--agents", "5",
        "--algos", "cma", "--seeds", "2", "--time-limit", "10", "--out", runs.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(runs).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",solved,")).count(), 2);

    let too_many = run(&[
        "bench", "--maps", &data("random-8-8.map"), "--scens", &data("random-8-8.scen"), "--agents", "6",
        "--algos", "cma", "--seeds", "1", "--out", dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert!(too_many.status.success());
    assert!(fs::read_to_string(dir.path().join("x.csv")).unwrap().contains(",error,"));
}

#[test]
fn malformed_map_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("bad.map");
    fs::write(&map, "type octile\nheight 2\nwidth 3\nmap\n...\n.x.\n").unwrap();
    let out = run(&["solve", "--map", map.to_str().unwrap(), "--agents", "1"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6"), "{err}");
}
