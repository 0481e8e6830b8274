//! End-to-end checks of the `spurbench` binary: artifact layout, exit
//! codes, and byte-level determinism of emitted files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spurbench"))
}

/// Fresh scratch directory per test; unique per process and test name.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spurbench-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary must spawn")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const DATASET_SPEC: &str = r#"{
    "generator": "circles",
    "params": {"r1_max": 2.0, "r2_max": 2.0, "mu1": 2.5, "mu2": 2.5},
    "n": 50,
    "beta": 0.5,
    "seed": 7
}"#;

fn experiment_config() -> String {
    r#"{
        "generator": "circles",
        "params": {"r1_max": 2.0, "r2_max": 2.0, "mu1": 2.5, "mu2": 2.5},
        "n_train": 200,
        "beta": 0.5,
        "arch": {"hidden_depth": 1, "hidden_width": 4},
        "scheme": "erm",
        "epochs": 2,
        "batch_size": 32,
        "n_test": 60
    }"#
    .to_string()
}

#[test]
fn gen_emits_deterministic_csv() {
    let dir = scratch("gen");
    let cfg = dir.join("spec.json");
    write(&cfg, DATASET_SPEC);

    let out1 = dir.join("d1.csv");
    let out2 = dir.join("d2.csv");
    assert_code(
        &run(bin().args(["gen", "--config"]).arg(&cfg).arg("--out").arg(&out1)),
        0,
    );
    assert_code(
        &run(bin().args(["gen", "--config"]).arg(&cfg).arg("--out").arg(&out2)),
        0,
    );
    let text1 = fs::read_to_string(&out1).unwrap();
    assert_eq!(text1, fs::read_to_string(&out2).unwrap());
    assert_eq!(text1.lines().next().unwrap(), "a,b,x1,x2,regime");
    assert_eq!(text1.lines().count(), 51);

    // Without --out the same CSV goes to stdout.
    let piped = run(bin().args(["gen", "--config"]).arg(&cfg));
    assert_code(&piped, 0);
    assert_eq!(String::from_utf8_lossy(&piped.stdout), text1);
}

#[test]
fn gen_rejects_bad_config_with_exit_2() {
    let dir = scratch("gen-bad");
    let cfg = dir.join("spec.json");
    write(&cfg, &DATASET_SPEC.replace("\"beta\": 0.5", "\"beta\": 2.0"));
    let out = run(bin().args(["gen", "--config"]).arg(&cfg));
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));

    let missing = run(bin().args(["gen", "--config"]).arg(dir.join("nope.json")));
    assert_code(&missing, 2);
}

#[test]
fn train_writes_checkpoints_and_manifest() {
    let dir = scratch("train");
    let cfg = dir.join("exp.json");
    write(&cfg, &experiment_config());
    let out_dir = dir.join("run");
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "11", "--out-dir"])
        .arg(&out_dir));
    assert_code(&out, 0);

    for name in ["model_a.json", "model_b.json", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["master"], 11);
    assert_eq!(manifest["config"]["generator"], "circles");
    assert!(manifest["metrics"]["acc_obs_a"].is_number());

    // The checkpoints are loadable models with the declared architecture.
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("model_a.json")).unwrap()).unwrap();
    assert_eq!(model["arch"]["hidden_depth"], 1);
}

#[test]
fn train_abort_exits_3() {
    let dir = scratch("train-abort");
    let cfg = dir.join("exp.json");
    write(&cfg, &experiment_config());
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "1", "--lr", "1e307", "--out-dir"])
        .arg(dir.join("run")));
    assert_code(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("aborted"));
}

fn sweep_config() -> String {
    format!(
        r#"{{
            "base": {},
            "axes": [{{"param": "beta", "values": [0.3, 0.7]}}],
            "replicate_seeds": [0, 1]
        }}"#,
        experiment_config()
    )
}

#[test]
fn sweep_requires_seed_flag() {
    let dir = scratch("sweep-noseed");
    let cfg = dir.join("sweep.json");
    write(&cfg, &sweep_config());
    let out = run(bin().args(["sweep", "--config"]).arg(&cfg));
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn sweep_reruns_byte_identically_across_worker_counts() {
    let dir = scratch("sweep");
    let cfg = dir.join("sweep.json");
    write(&cfg, &sweep_config());

    let mut outputs = Vec::new();
    for (name, workers) in [("r1.csv", "1"), ("r2.csv", "1"), ("r3.csv", "2")] {
        let path = dir.join(name);
        let out = run(bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--seed", "9", "--workers", workers, "--out"])
            .arg(&path));
        assert_code(&out, 0);
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 5, "header + 2 cells x 2 seeds");
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn grid_emits_lattice_and_validates_flags() {
    let dir = scratch("grid");
    let cfg = dir.join("exp.json");
    write(&cfg, &experiment_config());
    let run_dir = dir.join("run");
    assert_code(
        &run(bin()
            .args(["train", "--config"])
            .arg(&cfg)
            .args(["--seed", "5", "--out-dir"])
            .arg(&run_dir)),
        0,
    );

    let model_a = run_dir.join("model_a.json");
    let model_b = run_dir.join("model_b.json");
    let out = run(bin()
        .args(["grid", "--model-a"])
        .arg(&model_a)
        .arg("--model-b")
        .arg(&model_b)
        .args(["--bounds", "-1,1,-1,1", "--resolution", "3"]));
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,logit_a,logit_b");
    assert_eq!(lines.len(), 10, "header + 3x3 lattice");

    let bad_bounds = run(bin()
        .args(["grid", "--model-a"])
        .arg(&model_a)
        .arg("--model-b")
        .arg(&model_b)
        .args(["--bounds", "oops"]));
    assert_code(&bad_bounds, 2);

    let bad_res = run(bin()
        .args(["grid", "--model-a"])
        .arg(&model_a)
        .arg("--model-b")
        .arg(&model_b)
        .args(["--resolution", "1"]));
    assert_code(&bad_res, 2);
}

#[test]
fn metric_scores_feature_csvs() {
    let dir = scratch("metric");
    let fa = dir.join("fa.csv");
    let fb = dir.join("fb.csv");
    // Deterministic, dependent-ish columns; header line on one file to
    // exercise the skip-a-header path.
    let mut a = String::from("f0,f1\n");
    let mut b = String::new();
    for i in 0..40 {
        let t = i as f64 * 0.37;
        a.push_str(&format!("{},{}\n", t.sin(), t.cos()));
        b.push_str(&format!("{},{}\n", (t * 1.7).sin(), (t + 0.4).cos()));
    }
    write(&fa, &a);
    write(&fb, &b);

    let out = run(bin()
        .args(["metric", "--features-a"])
        .arg(&fa)
        .arg("--features-b")
        .arg(&fb)
        .args(["--m", "12", "--perm-seed", "3"]));
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).unwrap();
    for key in ["nhsic", "d_star", "delta", "m", "rois", "n", "perm_seed"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["n"], 40);
    assert_eq!(report["m"], 12);

    let rerun = run(bin()
        .args(["metric", "--features-a"])
        .arg(&fa)
        .arg("--features-b")
        .arg(&fb)
        .args(["--m", "12", "--perm-seed", "3"]));
    assert_eq!(out.stdout, rerun.stdout);

    // Mismatched row counts are a config error.
    let fc = dir.join("fc.csv");
    write(&fc, "1.0,2.0\n3.0,4.0\n");
    let mismatch = run(bin()
        .args(["metric", "--features-a"])
        .arg(&fa)
        .arg("--features-b")
        .arg(&fc));
    assert_code(&mismatch, 2);
}
