use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn cmfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmfg"))
        .args(args)
        .env_remove("CMFG_THREADS")
        .output()
        .expect("spawn cmfg")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the example's game and flow into a fresh directory.
fn example_dir() -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = cmfg(&["example", "section5", "--alpha", "1/2", "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let game = dir.path().join("game.json");
    let flow = dir.path().join("rho.json");
    (dir, game, flow)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn example_writes_its_artifacts() {
    let (dir, _, _) = example_dir();
    for f in ["game.json", "rho.json", "verdict.json", "values.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let verdict = read_json(&dir.path().join("verdict.json"));
    assert_eq!(verdict["verdict"], "pass");
    assert_eq!(verdict["optimality_gap"], "0");
    assert_eq!(verdict["V_plus"][2], json!(["-5/32", "5/32"]));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
    let values = fs::read_to_string(dir.path().join("values.csv")).unwrap();
    assert!(values.starts_with("table,t,state,value,exact\n"));
}

#[test]
fn example_outside_the_region_fails() {
    let out = cmfg(&["example", "section5", "--alpha", "1/2", "--c1", "3/32"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cmfg(&["example", "section5", "--c1", "5/64"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "tie");
}

#[test]
fn verify_round_trips_the_example() {
    let (dir, game, flow) = example_dir();
    let out_dir = dir.path().join("verify");
    let out = cmfg(&["mfg", "verify", "--game", path(&game), "--flow", path(&flow), "-o", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn broken_consistency_exits_one_with_residuals() {
    let (dir, game, flow) = example_dir();
    let mut rho = read_json(&flow);
    let frozen = json!([["1/2", "1/2"], ["1/2", "1/2"], ["1/2", "1/2"]]);
    rho["atoms"][0]["flow"] = frozen;
    let broken = dir.path().join("broken.json");
    fs::write(&broken, rho.to_string()).unwrap();
    let out = cmfg(&["mfg", "verify", "--game", path(&game), "--flow", path(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("residual"), "{stderr}");
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "fail");
    assert_eq!(v["consistent"], false);
}

#[test]
fn invalid_game_fails_validation() {
    let (dir, game, _) = example_dir();
    let mut g = read_json(&game);
    g["transition"]["base"][0][0][0] = json!(["1/2", "1/4"]);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, g.to_string()).unwrap();
    assert_eq!(cmfg(&["validate", path(&game)]).status.code(), Some(0));
    let out = cmfg(&["validate", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn lp_cap_is_exit_three() {
    let (_dir, game, _) = example_dir();
    let out = cmfg(&["nplayer", "solve-ce", "--game", path(&game), "-N", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

#[test]
fn parse_errors_are_exit_two() {
    let out = cmfg(&["lift", "--flow", "r.json", "--game", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("-N"));
    assert_eq!(cmfg(&["validate", "g.json", "--bogus"]).status.code(), Some(2));
    assert_eq!(cmfg(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_an_error() {
    let out = cmfg(&["validate", "/nonexistent/game.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solve_ce_then_epsilon() {
    let (dir, game, _) = example_dir();
    let ce = dir.path().join("ce");
    let out = cmfg(&["nplayer", "solve-ce", "--game", path(&game), "-N", "2", "--dump-lp", "-o", path(&ce)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lp = fs::read_to_string(ce.join("lp.txt")).unwrap();
    assert!(lp.starts_with("variables 136\n"));
    let deviation = fs::read_to_string(ce.join("deviation.csv")).unwrap();
    assert!(deviation.starts_with("player,recommendation,cost,best_response,gap"));
    let out = cmfg(&[
        "nplayer",
        "epsilon",
        "--game",
        path(&game),
        "--profile",
        path(&ce.join("profile.json")),
        "--method",
        "exact",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["players"][0]["epsilon"], "0");
}

#[test]
fn lift_writes_a_factored_profile() {
    let (_dir, game, flow) = example_dir();
    let out = cmfg(&["lift", "--game", path(&game), "--flow", path(&flow), "-N", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["factored"]["n_players"], 4);
}

#[test]
fn monte_carlo_outputs_are_reproducible() {
    let (dir, game, flow) = example_dir();
    let profile = dir.path().join("profile.json");
    let lifted = cmfg(&["lift", "--game", path(&game), "--flow", path(&flow), "-N", "6"]);
    fs::write(&profile, &lifted.stdout).unwrap();
    let run = |name: &str, threads: &str| {
        let out_dir = dir.path().join(name);
        let out = cmfg(&[
            "nplayer",
            "epsilon",
            "--game",
            path(&game),
            "--profile",
            path(&profile),
            "--method",
            "mc",
            "--reps",
            "3000",
            "--seed",
            "11",
            "--threads",
            threads,
            "-o",
            path(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (
            fs::read(out_dir.join("deviation.csv")).unwrap(),
            fs::read(out_dir.join("epsilon.json")).unwrap(),
        )
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b);
}

#[test]
fn epsilon_curve_columns() {
    let (dir, game, flow) = example_dir();
    let out_dir = dir.path().join("curve");
    let out = cmfg(&[
        "limits",
        "epsilon-curve",
        "--game",
        path(&game),
        "--flow",
        path(&flow),
        "--Ns",
        "2,30",
        "--reps",
        "500",
        "--seed",
        "7",
        "-o",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("epsilon_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,epsilon,stderr,method,reps,seconds"));
    assert!(lines.next().unwrap().starts_with("2,0,,exact,,"));
    assert!(lines.next().unwrap().contains(",mc,500,"));
}

#[test]
fn converge_refuses_a_non_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmfg(&["example", "section5", "--c1", "3/32", "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = cmfg(&[
        "limits",
        "converge",
        "--game",
        path(&dir.path().join("game.json")),
        "--flow",
        path(&dir.path().join("rho.json")),
        "--Ns",
        "5",
        "--reps",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
