//! Black-box tests of the `riskbandit` binary (exit codes, artifacts) and
//! strict-schema fuzzing of the config parser.

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskbandit::cli::config::resolve_config;

const BIN: &str = env!("CARGO_BIN_EXE_riskbandit");

const TINY_CONFIG: &str = r#"
[instance]
level = 0.95
tau = 2.3

[[instance.arms]]
kind = "gaussian"
mu = 0.1
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.0
sigma = 1.0

[policy]
name = "rc_lcb"
sigma = 1.0

[run]
horizon = 100
reps = 2
base_seed = 7

[output]
dir = "out"

[analysis]
bounds = true
lower_bounds = true
"#;

fn run_bin(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("failed to spawn binary")
}

#[test]
fn missing_mode_flag_is_a_config_error() {
    let out = run_bin(&[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--config") && stderr.contains("--preset"), "{stderr}");
}

#[test]
fn both_mode_flags_is_a_config_error() {
    let out = run_bin(&["--config", "a.toml", "--preset", "feasible_3arm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_preset_is_a_config_error() {
    let out = run_bin(&["--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown preset") && stderr.contains("feasible_3arm"), "{stderr}");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = run_bin(&["--config", "/nonexistent/path.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn invalid_config_reports_all_errors_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    // Two independent mistakes: bad p and a reps of zero.
    let text = TINY_CONFIG
        .replace("name = \"rc_lcb\"\nsigma = 1.0", "name = \"rclcb_ht\"\np = 3.0\nb_bound = 1.0")
        .replace("reps = 2", "reps = 0");
    std::fs::write(&path, text).unwrap();
    let out = run_bin(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("p must be in (1, 2]"), "{stderr}");
    assert!(stderr.contains("run.reps"), "{stderr}");
}

#[test]
fn successful_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ok.toml");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    let out_dir = tmp.path().join("results");
    let out = run_bin(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "quiet run should print nothing");
    for name in ["trajectory_T100.csv", "summary_T100.json", "diagnostics_T100.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    // Overrides: --horizon and --seed change the artifacts accordingly.
    let out2_dir = tmp.path().join("results2");
    let out = run_bin(&[
        "--config",
        path.to_str().unwrap(),
        "--horizon",
        "150",
        "--reps",
        "3",
        "--seed",
        "99",
        "--out",
        out2_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = std::fs::read_to_string(out2_dir.join("summary_T150.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(doc["base_seed"], 99);
    assert_eq!(doc["reps"], 3);
}

#[test]
fn unwritable_output_dir_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ok.toml");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = run_bin(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(4));
    // No partial artifacts appear anywhere under the temp root.
    assert!(!Path::new(&blocker).join("sub").exists());
}

#[test]
fn preset_runs_end_to_end_with_small_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_bin(&[
        "--preset",
        "feasible_3arm",
        "--horizon",
        "300",
        "--reps",
        "4",
        "--out",
        tmp.path().join("p").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("flag error rate"), "one-screen summary missing: {stdout}");
}

#[test]
fn thread_cap_env_var_is_validated() {
    let out = Command::new(BIN)
        .args(["--preset", "feasible_3arm"])
        .env("RISKBANDIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args([
            "--preset",
            "feasible_3arm",
            "--horizon",
            "200",
            "--reps",
            "2",
            "--quiet",
            "--out",
            tmp.path().join("t").to_str().unwrap(),
        ])
        .env("RISKBANDIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Strict-schema fuzz: mutating any key in a valid document must be rejected.
#[test]
fn random_key_mutations_are_all_rejected() {
    assert!(resolve_config(TINY_CONFIG).is_ok());
    // Collect every key occurrence: "key = ..." lines and section headers.
    let lines: Vec<&str> = TINY_CONFIG.lines().collect();
    let key_lines: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.contains('=') || l.trim_start().starts_with('['))
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf0220);
    let mut rejected = 0;
    for _ in 0..100 {
        let idx = key_lines[rng.gen_range(0..key_lines.len())];
        let line = lines[idx];
        let mutated_line = if let Some(eq) = line.find('=') {
            let (key, rest) = line.split_at(eq);
            format!("{}x {rest}", key.trim_end())
        } else {
            // Section header: [instance] -> [instancex], [[...]] likewise.
            line.replacen(']', "x]", 1)
        };
        let mut doc: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        doc[idx] = mutated_line;
        let text = doc.join("\n");
        if resolve_config(&text).is_err() {
            rejected += 1;
        } else {
            panic!("mutation of line {idx} ({line:?}) was accepted");
        }
    }
    assert_eq!(rejected, 100);
}
