use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resource_games::json::{GameJson, PovmSetJson};
use resource_games::objects::{GameEnsemble, InstrumentSet, POVMSet};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resource-games"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}); stderr: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, v: &impl serde::Serialize) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path
}

#[test]
fn quantify_pure_qubit_and_maximally_mixed() {
    let out = run(&["quantify", "--input", p(&fixture("qubit_zero.json"))]);
    assert_eq!(code(&out), 0);
    let v = json_out(&out);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["kind"], "robustness");
    assert_eq!(v["config"]["free"], "max-mixed");
    assert!((v["diagnostics"]["normalization"].as_f64().unwrap() - 1.0).abs() <= 1e-6);

    let out = run(&["quantify", "--input", p(&fixture("qubit_max_mixed.json")), "--kind", "weight"]);
    assert_eq!(code(&out), 0);
    assert!(json_out(&out)["value"].as_f64().unwrap().abs() <= 1e-7);
}

#[test]
fn quantify_measurement_sets_and_gpt_objects() {
    let out = run(&["quantify", "--object", "povmset", "--input", p(&fixture("sharp_mub_pair.json"))]);
    assert_eq!(code(&out), 0);
    let r = json_out(&out)["value"].as_f64().unwrap();
    assert!((r - (3.0 - 2.0 * 2.0f64.sqrt())).abs() <= 1e-6);

    let model = fixture("gbit.json");
    let out = run(&["quantify", "--object", "gpt-state", "--model", p(&model), "--input", p(&fixture("gbit_vertex.json"))]);
    assert_eq!(code(&out), 0);
    assert!((json_out(&out)["value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    let out = run(&[
        "quantify",
        "--object",
        "gpt-mset",
        "--model",
        p(&model),
        "--input",
        p(&fixture("gbit_coordinate_pair.json")),
    ]);
    assert_eq!(code(&out), 0);
    assert!((json_out(&out)["value"].as_f64().unwrap() - 1.0 / 3.0).abs() <= 1e-6);
}

#[test]
fn quantify_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dim\": 2, \"matrix\": [").unwrap();
    let out = run(&["quantify", "--input", p(&bad)]);
    assert_eq!(code(&out), 3);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "schema");

    assert_eq!(code(&run(&["quantify", "--input", p(&dir.path().join("missing.json"))])), 2);
    assert_eq!(code(&run(&["quantify"])), 2);
    assert_eq!(code(&run(&["quantify", "--input", p(&fixture("qubit_zero.json")), "--free", "compatible"])), 2);
    assert_eq!(code(&run(&["quantify", "--kind", "sideways"])), 2);

    // trace 2: parses, but is not a state
    let not_state = dir.path().join("trace2.json");
    std::fs::write(&not_state, r#"{"dim":2,"matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#).unwrap();
    assert_eq!(code(&run(&["quantify", "--input", p(&not_state)])), 2);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("qubit_diag_3_1.json"), dir.path().join("rho.json")).unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"input": "rho.json", "kind": "weight"}"#).unwrap();

    let out = run(&["quantify", "--config", p(&cfg)]);
    assert_eq!(code(&out), 0);
    let v = json_out(&out);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
    assert_eq!(v["config"]["kind"], "weight");

    let out = run(&["quantify", "--config", p(&cfg), "--kind", "robustness"]);
    let v = json_out(&out);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
    assert_eq!(v["config"]["kind"], "robustness");
    assert_eq!(v["config"]["input"], p(&dir.path().join("rho.json")));

    std::fs::write(&cfg, r#"{"input": "rho.json", "knd": "weight"}"#).unwrap();
    assert_eq!(code(&run(&["quantify", "--config", p(&cfg)])), 3);
}

#[test]
fn reports_hash_their_inputs() {
    let path = fixture("qubit_zero.json");
    let v = json_out(&run(&["quantify", "--input", p(&path)]));
    let expect = hex::encode(Sha256::digest(std::fs::read(&path).unwrap()));
    assert_eq!(v["inputs"]["input"]["sha256"], expect.as_str());
    assert!(v["timestamp"]["unix_ms"].as_u64().unwrap() > 0);
}

#[test]
fn build_and_play_the_discrimination_game() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("game.json");
    let (rho, m) = (fixture("qubit_zero.json"), fixture("sharp_mub_pair.json"));
    let out = run(&["build-game", "--state", p(&rho), "--povmset", p(&m), "--out", p(&game)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let built: Value = serde_json::from_str(&std::fs::read_to_string(&game).unwrap()).unwrap();
    let cert = &built["certificate"];
    let alpha = cert["alpha"].as_f64().unwrap();
    assert!(alpha > 0.0);
    assert_eq!(cert["j"], 10_000);

    let out = run(&["play", "--game", p(&game), "--state", p(&rho), "--povmset", p(&m)]);
    assert_eq!(code(&out), 0);
    let v = json_out(&out);
    assert!(v["value"].as_f64().unwrap() >= alpha * cert["target"].as_f64().unwrap() - 1e-7);
    assert_eq!(v["optimal_strategy"]["x_of_y"].as_array().unwrap().len(), 2);

    // a bare game file works too
    let bare = write(dir.path(), "bare.json", &built["game"]);
    assert_eq!(code(&run(&["play", "--game", p(&bare), "--state", p(&rho), "--povmset", p(&m)])), 0);
}

#[test]
fn exclusion_on_a_pure_state_is_perfect() {
    let out = run(&[
        "build-game",
        "--state",
        p(&fixture("qubit_zero.json")),
        "--povmset",
        p(&fixture("sharp_mub_pair.json")),
        "--exclusion",
    ]);
    assert_eq!(code(&out), 0);
    let v = json_out(&out);
    assert_eq!(v["certificate"]["kind"], "exclusion");
    assert_eq!(v["certificate"]["perfect_exclusion"], true);
}

#[test]
fn free_pair_cannot_build_a_game() {
    let dir = tempfile::tempdir().unwrap();
    let trivial = write(dir.path(), "trivial.json", &PovmSetJson::from_set(&POVMSet::trivial(2, 2, 2)));
    let out = run(&["build-game", "--state", p(&fixture("qubit_max_mixed.json")), "--povmset", p(&trivial)]);
    assert_eq!(code(&out), 5);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "free-input");
}

#[test]
fn identity_game_and_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let game = write(
        dir.path(),
        "identity.json",
        &GameJson::from_game(&GameEnsemble::uniform(InstrumentSet::identity(2, 2))),
    );
    let m = fixture("sharp_mub_pair.json");
    let out = run(&["play", "--game", p(&game), "--state", p(&fixture("qubit_zero.json")), "--povmset", p(&m)]);
    assert_eq!(code(&out), 0);
    assert!((json_out(&out)["value"].as_f64().unwrap() - 1.0).abs() <= 1e-12);

    let qutrit = dir.path().join("qutrit.json");
    std::fs::write(
        &qutrit,
        r#"{"dim":3,"matrix":[[[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["play", "--game", p(&game), "--state", p(&qutrit), "--povmset", p(&m)])), 2);
}

#[test]
fn verify_default_fixtures_pass() {
    for result in ["1", "2", "3"] {
        let out = run(&["verify", "--result", result, "--samples", "50", "--games", "5"]);
        assert_eq!(code(&out), 0, "result {result}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_out(&out);
        assert_eq!(v["passed"], true);
        assert_eq!(v["command"], "verify");
        assert!(v["inputs"]["state"]["path"].as_str().unwrap().starts_with("builtin:"));
        assert!(!out.stderr.is_empty(), "summary table goes to stderr");
    }
}

#[test]
fn verify_bundled_configs_pass() {
    for cfg in ["result1.json", "result1_single_object.json", "result2.json", "result3.json"] {
        let out = run(&["verify", "--config", p(&fixture(cfg)), "--samples", "20", "--games", "3"]);
        assert_eq!(code(&out), 0, "{cfg}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_out(&out);
        assert_eq!(v["config"]["samples"], 20);
        assert!(!v["inputs"]["state"]["path"].as_str().unwrap().starts_with("builtin:"));
    }
}

#[test]
fn verify_rejects_bad_parameters() {
    assert_eq!(code(&run(&["verify", "--result", "1", "--samples", "0"])), 2);
    assert_eq!(code(&run(&["verify", "--result", "4"])), 2);
    assert_eq!(code(&run(&["verify"])), 2);
    let out = run(&["verify", "--result", "1", "--state", p(&fixture("qubit_max_mixed.json")), "--povmset", p(&fixture("qubit_zero.json"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = run(&["verify", "--result", "2", "--samples", "10", "--games", "2", "--report", p(&report)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["result"], "result2");
    assert_eq!(v["sample_values"].as_array().unwrap().len(), 11);
}

#[test]
fn thread_cap_must_be_positive() {
    let out = Command::new(env!("CARGO_BIN_EXE_resource-games"))
        .args(["verify", "--result", "1"])
        .env("RESOURCE_GAMES_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_resource-games"))
        .args(["verify", "--result", "1", "--samples", "10", "--games", "2"])
        .env("RESOURCE_GAMES_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn fixtures_are_listed_and_printed() {
    let out = run(&["fixture"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).lines().any(|l| l == "gbit.json"));
    let out = run(&["fixture", "gbit.json"]);
    assert_eq!(out.stdout, std::fs::read(fixture("gbit.json")).unwrap());
    assert_eq!(code(&run(&["fixture", "nope.json"])), 2);
}
