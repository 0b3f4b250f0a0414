//! Malformed configs are rejected with a message naming the offending key; shipped
//! defaults parse and carry the published hyperparameters.

use std::path::Path;

use serde_json::{json, Value};
use uqsurro::config::ProblemConfig;
use uqsurro::{HarnessError, RunConfig};
use uqsurro_core::net::Activation;

fn base() -> Value {
    json!({
        "problem": {"kind": "synth_gap", "samples": 50},
        "method": "mcd",
        "architecture": {"neurons": [16, 1], "activation": "tanh"},
        "train": {"learning_rate": 0.01, "epochs": 3, "batch_size": 8,
                  "split": {"train": 0.7, "val": 0.15, "test": 0.15}},
        "dropout": 0.2,
        "seed": 1
    })
}

fn set(v: &mut Value, path: &str, new: Option<Value>) {
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = v;
    for k in &keys[..keys.len() - 1] {
        cur = cur.get_mut(*k).unwrap();
    }
    let obj = cur.as_object_mut().unwrap();
    match new {
        Some(x) => {
            obj.insert(keys[keys.len() - 1].to_owned(), x);
        }
        None => {
            obj.remove(keys[keys.len() - 1]);
        }
    }
}

#[test]
fn base_fixture_is_valid() {
    RunConfig::from_json(&base().to_string()).unwrap();
}

#[test]
fn negative_corpus_names_the_key() {
    // (edit path, replacement or removal, key the message must mention)
    let corpus: Vec<(&str, Option<Value>, &str)> = vec![
        ("method", None, "method"),
        ("method", Some(json!("svm")), "method"),
        ("seed", None, "seed"),
        ("seed", Some(json!(-1)), "seed"),
        ("problem.kind", Some(json!("synth_x")), "problem"),
        ("problem.samples", Some(json!(0)), "problem.samples"),
        ("problem.noise_std", Some(json!(-0.1)), "problem.noise_std"),
        ("problem.extra", Some(json!(1)), "extra"),
        ("architecture", None, "architecture"),
        ("architecture.neurons", Some(json!([])), "architecture.neurons"),
        ("architecture.neurons", Some(json!([16, 0, 1])), "architecture.neurons"),
        ("architecture.neurons", Some(json!([16, 2])), "architecture.neurons"),
        (
            "architecture.activation",
            Some(json!("swish")),
            "architecture.activation",
        ),
        ("train.learning_rate", None, "learning_rate"),
        ("train.learning_rate", Some(json!(-1.0)), "train"),
        ("train.epochs", Some(json!(0)), "train"),
        ("train.batch_size", Some(json!("ten")), "train.batch_size"),
        ("train.momentum", Some(json!(0.9)), "momentum"),
        ("train.seed", Some(json!(5)), "train.seed"),
        ("train.split.train", Some(json!(0.9)), "train"),
        ("train.split.holdout", Some(json!(0.1)), "holdout"),
        ("dropout", None, "dropout"),
        ("dropout", Some(json!(1.0)), "dropout"),
        ("dropout", Some(json!(0.0)), "dropout"),
        ("predict_dropout", Some(json!(1.5)), "predict_dropout"),
        ("members", Some(json!(5)), "members"),
        ("prior", Some(json!({"kind": "gaussian", "sigma": 1.0})), "prior"),
        ("uq_samples", Some(json!(1)), "uq_samples"),
        ("pca", Some(json!({"enabled": true})), "pca.enabled"),
        ("pca", Some(json!({"threshold": 0.0})), "pca.threshold"),
        ("pca", Some(json!({"threshold": 1.5})), "pca.threshold"),
        ("pca", Some(json!({"curve_samples": 1})), "pca.curve_samples"),
        ("pca", Some(json!({"enable": true})), "enable"),
        ("responses", Some(json!([])), "responses"),
        ("responses", Some(json!(["y", "y"])), "responses"),
        (
            "response_overrides",
            Some(json!({"y": {"learning_rate": -1.0}})),
            "response_overrides.y.learning_rate",
        ),
        (
            "response_overrides",
            Some(json!({"y": {"epochs": 0}})),
            "response_overrides.y.epochs",
        ),
        ("response_overrides", Some(json!({"y": {"dropout": 0.1}})), "dropout"),
        ("output_dir", Some(json!("")), "output_dir"),
        ("colour", Some(json!("blue")), "colour"),
    ];
    for (path, new, key) in corpus {
        let mut v = base();
        set(&mut v, path, new.clone());
        match RunConfig::from_json(&v.to_string()) {
            Err(HarnessError::Config(msg)) => {
                assert!(
                    msg.contains(key),
                    "editing {path} -> {new:?}: message `{msg}` does not name `{key}`"
                )
            }
            other => panic!("editing {path} -> {new:?}: expected a config error, got {other:?}"),
        }
    }
}

#[test]
fn method_specific_requirements() {
    let mut v = base();
    set(&mut v, "method", Some(json!("de")));
    set(&mut v, "architecture.neurons", Some(json!([16, 2])));
    set(&mut v, "dropout", None);
    let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("members"), "{err}");
    set(&mut v, "members", Some(json!(1)));
    let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("members"), "{err}");
    set(&mut v, "members", Some(json!(3)));
    RunConfig::from_json(&v.to_string()).unwrap();

    set(&mut v, "method", Some(json!("bnn")));
    set(&mut v, "members", None);
    let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("prior"), "{err}");
    set(&mut v, "prior", Some(json!({"kind": "gaussian", "sigma": -1.0})));
    let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("prior"), "{err}");
    set(
        &mut v,
        "prior",
        Some(json!({"kind": "scale_mixture", "pi": 0.5, "sigma1": 1.0, "sigma2": 0.01})),
    );
    RunConfig::from_json(&v.to_string()).unwrap();
}

#[test]
fn malformed_json_is_a_config_error() {
    assert!(matches!(
        RunConfig::from_json("{ not json"),
        Err(HarnessError::Config(_))
    ));
    assert!(matches!(RunConfig::from_json("[]"), Err(HarnessError::Config(_))));
}

fn shipped(name: &str) -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

#[test]
fn bison_defaults_are_verbatim() {
    let mcd = shipped("bison_mcd.json");
    assert_eq!(mcd.architecture.neurons, [200, 500, 500, 200, 1]);
    assert_eq!(mcd.architecture.activation, Activation::Relu);
    assert_eq!(
        (mcd.train.learning_rate, mcd.train.epochs, mcd.train.batch_size),
        (0.0002, 2000, 20)
    );
    assert_eq!(mcd.dropout, Some(0.4));
    assert_eq!(mcd.uq_samples(), 200);
    let de = shipped("bison_de.json");
    assert_eq!(de.architecture.neurons, [50, 100, 100, 50, 2]);
    assert_eq!(de.architecture.activation, Activation::Tanh);
    assert_eq!(
        (de.train.learning_rate, de.train.epochs, de.train.batch_size),
        (0.0004, 2000, 32)
    );
    assert_eq!(de.members, Some(5));
    let bnn = shipped("bison_bnn.json");
    assert_eq!(bnn.architecture.neurons, [10, 10, 10, 2]);
    assert_eq!(bnn.architecture.activation, Activation::Relu);
    assert_eq!(
        (bnn.train.learning_rate, bnn.train.epochs, bnn.train.batch_size),
        (0.001, 1000, 5)
    );
    for c in [&mcd, &de, &bnn] {
        assert_eq!(
            (c.train.split.train, c.train.split.val, c.train.split.test),
            (0.85, 0.05, 0.1)
        );
        assert!(c.pca.enabled);
        assert_eq!(c.pca.threshold, 0.99);
        assert!(matches!(c.problem, ProblemConfig::SynthFgr { samples: 200, .. }));
    }
}

#[test]
fn trace_defaults_include_per_response_exceptions() {
    let mcd = shipped("trace_mcd.json");
    assert_eq!(mcd.architecture.neurons, [100, 200, 200, 100, 1]);
    assert_eq!(mcd.train_for("VoidF1").learning_rate, 0.001);
    assert_eq!(mcd.train_for("VoidF2").learning_rate, 0.002);
    assert_eq!(mcd.train.epochs, 2000);
    let de = shipped("trace_de.json");
    assert_eq!(de.architecture.neurons, [50, 50, 50, 2]);
    assert_eq!(de.train_for("VoidF1").learning_rate, 0.00025);
    assert_eq!(de.train_for("VoidF2").learning_rate, 0.00075);
    assert_eq!(de.train_for("VoidF3").learning_rate, 0.001);
    assert_eq!((de.train.epochs, de.train.batch_size, de.members), (500, 32, Some(5)));
    let bnn = shipped("trace_bnn.json");
    let act = |r: &str| bnn.layers_for(r)[0].activation;
    assert_eq!(
        (act("VoidF1"), bnn.train_for("VoidF1").learning_rate),
        (Activation::Tanh, 0.0006)
    );
    assert_eq!(
        (act("VoidF2"), bnn.train_for("VoidF2").learning_rate),
        (Activation::Tanh, 0.0015)
    );
    assert_eq!(
        (act("VoidF3"), bnn.train_for("VoidF3").learning_rate),
        (Activation::Relu, 0.002)
    );
    assert_eq!(
        (act("VoidF4"), bnn.train_for("VoidF4").learning_rate),
        (Activation::Relu, 0.002)
    );
    assert_eq!((bnn.train.epochs, bnn.train.batch_size), (1000, 20));
    for c in [&mcd, &de, &bnn] {
        assert_eq!(
            (c.train.split.train, c.train.split.val, c.train.split.test),
            (0.7, 0.15, 0.15)
        );
        assert!(matches!(
            c.problem,
            ProblemConfig::SynthVoid {
                cases: 86,
                samples_per_case: 30,
                ..
            }
        ));
    }
}

#[test]
fn every_shipped_config_parses() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") && !p.file_name().unwrap().to_string_lossy().contains("schema") {
            RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 9);
}

fn schema() -> Value {
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v["properties"].as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

#[test]
fn published_schema_lists_every_accepted_key() {
    let s = schema();
    // Every key the schema declares is accepted by the loader, and an undeclared one is not.
    let full = json!({
        "problem": {"kind": "synth_gap", "samples": 50, "noise_std": 0.1},
        "method": "mcd",
        "architecture": {"neurons": [16, 1], "activation": "tanh"},
        "train": {"learning_rate": 0.01, "epochs": 3, "batch_size": 8, "optimizer": "adam",
                  "l2_lambda": 0.0, "seed": 0,
                  "split": {"train": 0.7, "val": 0.15, "test": 0.15}},
        "dropout": 0.2,
        "dropout_scaling": "inverted",
        "predict_dropout": 0.3,
        "uq_samples": 50,
        "pca": {"enabled": false, "threshold": 0.9, "curve_samples": 10},
        "responses": ["y"],
        "response_overrides": {"y": {"learning_rate": 0.1, "epochs": 2, "batch_size": 4, "activation": "relu"}},
        "seed": 1,
        "output_dir": "runs/x"
    });
    RunConfig::from_json(&full.to_string()).unwrap();
    let mut declared = keys(&s);
    declared.retain(|k| k != "members" && k != "prior");
    let mut given: Vec<String> = full.as_object().unwrap().keys().cloned().collect();
    given.sort();
    assert_eq!(declared, given);
    assert_eq!(
        keys(&s["properties"]["train"]),
        [
            "batch_size",
            "epochs",
            "l2_lambda",
            "learning_rate",
            "optimizer",
            "seed",
            "split"
        ]
    );
    assert_eq!(keys(&s["properties"]["pca"]), ["curve_samples", "enabled", "threshold"]);
    let ov = &s["properties"]["response_overrides"]["additionalProperties"];
    assert_eq!(keys(ov), ["activation", "batch_size", "epochs", "learning_rate"]);
    assert_eq!(s["properties"]["method"]["enum"], json!(["mcd", "de", "bnn"]));
    let kinds: Vec<&str> = s["properties"]["problem"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["properties"]["kind"]["const"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["synth_fgr", "synth_void", "synth_gap", "csv"]);
    let mut required: Vec<&str> = s["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    required.sort();
    for k in &required {
        let mut v = base();
        set(&mut v, k, None);
        assert!(RunConfig::from_json(&v.to_string()).is_err(), "{k} is required");
    }
    assert_eq!(required, ["architecture", "method", "problem", "seed", "train"]);
}
