use std::path::Path;
use std::process::{Command, Output};

fn mosse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mosse")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const TINY: &str = r#"{"trials":2,"horizon":20,"budgets":[25,50],"basis":{"dims":2,"modes_per_dim":4},
"solver":{"max_iters":5},"pilot_iters":2,"weight_steps":2}"#;

#[test]
fn plan_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("plan");
    let out_s = out.to_str().unwrap();
    for planner in ["mosse", "uniform", "probabilistic"] {
        let run = mosse(&["plan", "--config", &cfg, "--out-dir", out_s, "--budget", "50", "--planner", planner]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let eval = mosse(&[
            "eval",
            "--plan",
            out.join("plan.json").to_str().unwrap(),
            "--scenario",
            out.join("scenario.json").to_str().unwrap(),
        ]);
        assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
        let scores: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&eval.stdout).unwrap();
        assert_eq!(scores.len(), 3);
        assert!(scores.values().all(|v| v.as_f64().is_some_and(|x| x >= 0.0)));
    }
}

#[test]
fn gen_maps_writes_one_file_per_objective() {
    let dir = tempfile::tempdir().unwrap();
    let run = mosse(&["gen-maps", "--seed", "5", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(run.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn ingest_dem_writes_shade_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let mut dem = String::from("ncols 8\nnrows 8\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n");
    for r in 0..8 {
        let row: Vec<String> = (0..8).map(|c| format!("{}", if (3..5).contains(&r) && (3..5).contains(&c) { 9 } else { r })).collect();
        dem.push_str(&row.join(" "));
        dem.push('\n');
    }
    let dem_path = dir.path().join("dem.asc");
    std::fs::write(&dem_path, dem).unwrap();
    let out = dir.path().join("maps");
    let run = mosse(&["ingest-dem", "--dem", dem_path.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("shade.txt").exists() && out.join("slope.txt").exists());
}

#[test]
fn bench_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let cfg = write_config(dir.path(), TINY);
    let ok = mosse(&["--parallel", "1", "bench", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    for f in ["results.csv", "summary.csv", "traces.csv", "timings.csv"] {
        assert!(out.join(f).exists());
    }

    let bad = write_config(dir.path(), r#"{"trials":0}"#);
    assert_eq!(mosse(&["bench", "--config", &bad]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(mosse(&["bench", "--config", missing.to_str().unwrap()]).status.code(), Some(1));

    // One time step cannot carry three sensors, so every row fails.
    let starved = write_config(
        dir.path(),
        r#"{"trials":2,"horizon":1,"budgets":[50],"basis":{"dims":2,"modes_per_dim":3},"solver":{"max_iters":3},"pilot_iters":2,"weight_steps":1}"#,
    );
    let run = mosse(&["bench", "--config", &starved, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}
