//! End-to-end runs on small configs, through the library and the CLI binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use uqsurro::layout::{self, RunLayout};
use uqsurro::train::SplitArtifact;
use uqsurro::uq::{read_predictions, summarize_all, UqSummary};
use uqsurro::{run_pipeline, run_stage, HarnessError, RunConfig, Stage};
use uqsurro_core::Method;

fn fgr_config(method: &str, out: &Path) -> Value {
    let mut v = json!({
        "problem": {"kind": "synth_fgr", "samples": 200, "lhs_iterations": 20},
        "method": method,
        "architecture": {"neurons": [8, 8, 2], "activation": "tanh"},
        "train": {"learning_rate": 0.005, "epochs": 5, "batch_size": 20,
                  "split": {"train": 0.85, "val": 0.05, "test": 0.1}},
        "pca": {"enabled": true, "threshold": 0.99, "curve_samples": 50},
        "seed": 11,
        "output_dir": out
    });
    match method {
        "mcd" => {
            v["architecture"]["neurons"] = json!([8, 8, 1]);
            v["dropout"] = json!(0.2);
        }
        "de" => v["members"] = json!(3),
        _ => v["prior"] = json!({"kind": "gaussian", "sigma": 1.0}),
    }
    v
}

fn gap_config(method: &str, out: &Path) -> Value {
    let mut v = fgr_config(method, out);
    v["problem"] = json!({"kind": "synth_gap", "samples": 60, "noise_std": 0.05});
    v.as_object_mut().unwrap().remove("pca");
    v
}

fn cfg(v: &Value) -> RunConfig {
    RunConfig::from_json(&v.to_string()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_uqsurro"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn fgr_pipeline_rows_coverage_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let c = cfg(&fgr_config("mcd", &out));
    run_pipeline(&c, false).unwrap();
    let layout = RunLayout::new(&out);

    // 200 designs with 5 inputs and 100 curve points each.
    let (header, rows) = layout::read_csv(&layout.dataset()).unwrap();
    assert_eq!(rows.len(), 200);
    assert_eq!(header.len(), 5 + 100, "{header:?}");

    let split: SplitArtifact = layout::load_json(&layout.split(Method::Mcd)).unwrap();
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (170, 10, 20));

    // 20 test cases for each of the two retained principal components.
    let preds = read_predictions(&layout.predictions(Method::Mcd)).unwrap();
    assert_eq!(preds.len(), 40);
    let (_, bars) = layout::read_csv(&layout.report_dir().join("error_bars.csv")).unwrap();
    assert_eq!(bars.len(), 40);

    let summary: UqSummary = layout::load_json(&layout.uq_summary(Method::Mcd)).unwrap();
    assert_eq!(summary.uq_samples, Some(200));
    assert_eq!(summary.n_test_cases, 20);
    let recomputed = summarize_all(&preds);
    assert_eq!(recomputed.len(), summary.responses.len());
    for (a, b) in recomputed.iter().zip(&summary.responses) {
        assert_eq!(a.response, b.response);
        assert!((a.coverage68 - b.coverage68).abs() <= 1e-12);
        assert!((a.coverage95 - b.coverage95).abs() <= 1e-12);
        assert!((a.rmse - b.rmse).abs() <= 1e-12 * a.rmse.max(1.0));
    }
    for r in &preds {
        assert!(r.ci95.0 <= r.ci68.0 && r.ci68.0 <= r.mean && r.mean <= r.ci68.1 && r.ci68.1 <= r.ci95.1);
    }

    // Variance decay table: fractions sum to one and cumulative is monotone.
    let (h, rows) = layout::read_csv(&layout.report_dir().join("variance_decay.csv")).unwrap();
    let frac = layout::column(&h, "fraction", Path::new("v")).unwrap();
    let total: f64 = rows.iter().map(|r| r[frac].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    // Curve bands in both propagation modes.
    let (h, rows) = layout::read_csv(&layout.curve_bands(Method::Mcd)).unwrap();
    let mode = layout::column(&h, "mode", Path::new("b")).unwrap();
    let mc = rows.iter().filter(|r| r[mode] == "monte_carlo").count();
    let cf = rows.iter().filter(|r| r[mode] == "closed_form").count();
    assert_eq!((mc, cf), (20 * 100, 20 * 100));
}

#[test]
fn ensemble_writes_member_artifacts_and_closed_form_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut v = gap_config("de", &out);
    v["members"] = json!(4);
    let c = cfg(&v);
    run_pipeline(&c, false).unwrap();
    let layout = RunLayout::new(&out);
    let dir = layout.response_dir(Method::De, "y");
    for i in 0..4 {
        assert!(dir.join(format!("member_{i}.json")).is_file());
    }
    assert!(!dir.join("member_4.json").exists());
    let summary: UqSummary = layout::load_json(&layout.uq_summary(Method::De)).unwrap();
    assert_eq!(summary.members, Some(4));
    assert_eq!(summary.uq_samples, None);
    assert!(summary.extrapolation.is_some());
    assert!(layout.extrapolation(Method::De).is_file());
}

#[test]
fn trace_trains_one_model_per_void_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let v = json!({
        "problem": {"kind": "synth_void", "cases": 10, "samples_per_case": 5, "lhs_iterations": 5},
        "method": "bnn",
        "architecture": {"neurons": [6, 2], "activation": "tanh"},
        "train": {"learning_rate": 0.002, "epochs": 2, "batch_size": 10,
                  "split": {"train": 0.7, "val": 0.15, "test": 0.15}},
        "prior": {"kind": "gaussian", "sigma": 1.0},
        "uq_samples": 20,
        "response_overrides": {"VoidF3": {"activation": "relu"}},
        "seed": 3,
        "output_dir": out
    });
    let c = cfg(&v);
    run_pipeline(&c, false).unwrap();
    let layout = RunLayout::new(&out);
    let (header, rows) = layout::read_csv(&layout.dataset()).unwrap();
    assert_eq!(rows.len(), 50);
    assert_eq!(header.len(), 9 + 4);
    for r in ["VoidF1", "VoidF2", "VoidF3", "VoidF4"] {
        assert!(layout.response_dir(Method::Bnn, r).join("model.json").is_file(), "{r}");
    }
    let preds = read_predictions(&layout.predictions(Method::Bnn)).unwrap();
    let n_test = preds.len() / 4;
    assert_eq!(preds.len(), 4 * n_test);
    let summary: UqSummary = layout::load_json(&layout.uq_summary(Method::Bnn)).unwrap();
    assert_eq!(summary.uq_samples, Some(20));
}

#[test]
fn single_sample_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut v = fgr_config("mcd", &out);
    v["problem"]["samples"] = json!(1);
    run_stage(Stage::Generate, &cfg(&v), false).unwrap();
    let (_, rows) = layout::read_csv(&RunLayout::new(&out).dataset()).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn pca_on_scalar_problem_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(&gap_config("mcd", &tmp.path().join("run")));
    run_stage(Stage::Generate, &c, false).unwrap();
    assert!(matches!(run_stage(Stage::Pca, &c, false), Err(HarnessError::Config(_))));
}

#[test]
fn stale_models_are_rejected_after_problem_change() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let c = cfg(&gap_config("mcd", &out));
    run_stage(Stage::Generate, &c, false).unwrap();
    run_stage(Stage::Train, &c, false).unwrap();
    let mut v = gap_config("mcd", &out);
    v["problem"]["samples"] = json!(61);
    let err = run_stage(Stage::Uq, &cfg(&v), false).unwrap_err();
    assert!(
        matches!(err, HarnessError::Data(ref m) if m.contains("compatib")),
        "{err}"
    );
}

#[test]
fn cli_exit_codes_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let good = write_config(tmp.path(), "good.json", &gap_config("mcd", &out));
    let good = good.to_str().unwrap();

    let (code, _) = cli(&["generate", "--config", good]);
    assert_eq!(code, 0);
    let (code, err) = cli(&["generate", "--config", good]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("--force"), "{err}");
    let (code, _) = cli(&["generate", "--config", good, "--force"]);
    assert_eq!(code, 0);

    // Report before training lists what is missing.
    let (code, err) = cli(&["report", "--config", good]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("predictions.csv") && err.contains("summary.json"), "{err}");

    // Malformed config names the key.
    let mut bad = gap_config("mcd", &out);
    bad["dropout"] = json!(1.2);
    let bad = write_config(tmp.path(), "bad.json", &bad);
    let (code, err) = cli(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("dropout"), "{err}");

    // An unreadable config file is a config error.
    let (code, _) = cli(&["train", "--config", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code, 2);

    // A learning rate large enough to overflow is reported as divergence.
    let mut wild = gap_config("mcd", &out);
    wild["train"]["learning_rate"] = json!(1e200);
    let wild = write_config(tmp.path(), "wild.json", &wild);
    let (code, err) = cli(&["train", "--config", wild.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");

    // --out and --seed override the file.
    let other = tmp.path().join("other");
    let (code, _) = cli(&[
        "generate",
        "--config",
        good,
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code, 0);
    let m: Value = layout::load_json(&RunLayout::new(&other).data_manifest()).unwrap();
    assert_eq!(m["seed"], json!(99));
}
