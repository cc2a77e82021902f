use std::fs;
use std::path::Path;
use std::process::Command;

use invsynth::cli::{expand_config, parse_step, run};
use invsynth::io::{load_inventory, read_pool, write_schema};
use invsynth_core::preprocess::StepRequest;
use invsynth_core::schema::{FeatureSchema, FeatureSpec};

fn invsynth(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["invsynth".to_string(), "--quiet".to_string()];
    argv.extend(args.iter().map(|a| {
        if a.ends_with(".csv") || a.ends_with(".json") || *a == "out" {
            dir.join(a).to_string_lossy().into_owned()
        } else {
            a.to_string()
        }
    }));
    run(argv)
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const TRAIN: &str = "slope,rain,kind\n10,1.5,a\n12,2.5,b\n15,2.0,a\n9,1.0,b\n20,3.5,a\n18,3.0,a\n11,1.8,b\n14,2.2,a\n";

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.csv", TRAIN);
    write(d, "holes.csv", "slope,rain\n10,\n12,2\n13,4\n");
    write(d, "bad.csv", "slope,rain\n10,x\n");
    let numeric = FeatureSchema::new(vec![FeatureSpec::numeric("slope"), FeatureSpec::numeric("rain")]).unwrap();
    write_schema(&numeric, &d.join("numeric.json")).unwrap();

    assert_eq!(invsynth(d, &["generate", "--train", "train.csv", "-N", "20", "--out", "pool.csv"]), 0);
    assert_eq!(invsynth(d, &["--help"]), 0);
    assert_eq!(invsynth(d, &["generate", "--train", "train.csv"]), 1);
    assert_eq!(invsynth(d, &["frobnicate"]), 1);
    assert_eq!(invsynth(d, &["generate", "--train", "train.csv", "-T", "0", "--out", "p.csv"]), 1);
    assert_eq!(invsynth(d, &["select", "--pool", "pool.csv", "--tau", "-3", "--top-q", "0.5", "--out", "a.csv"]), 1);
    assert_eq!(invsynth(d, &["generate", "--train", "absent.csv", "--out", "p.csv"]), 2);
    assert_eq!(invsynth(d, &["generate", "--train", "holes.csv", "--out", "p.csv"]), 2);
    assert_eq!(invsynth(d, &["ingest", "--input", "bad.csv"]), 0);
    assert_eq!(invsynth(d, &["--schema", "numeric.json", "ingest", "--input", "bad.csv", "--report", "r.json"]), 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["type_violations"][0]["column"], "rain");
    assert_eq!(invsynth(d, &["select", "--pool", "pool.csv", "--top-q", "0.1", "--out", "acc.csv"]), 0);
    // two accepted rows cannot make up half of an eight-row corpus
    assert_eq!(
        invsynth(d, &["mix", "--observed", "train.csv", "--accepted", "acc.csv", "--alpha", "0.5", "--out", "m.csv"]),
        3
    );
    assert_eq!(invsynth(d, &["baseline", "smote", "--train", "train.csv", "-k", "20", "-n", "5", "--out", "s.csv"]), 3);
}

#[test]
fn generate_select_mix_flow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.csv", TRAIN);
    assert_eq!(
        invsynth(
            d,
            &[
                "--seed",
                "4",
                "generate",
                "--train",
                "train.csv",
                "-N",
                "40",
                "-M",
                "2",
                "--condition",
                "kind=a",
                "--out",
                "pool.csv"
            ]
        ),
        0
    );
    let (schema, config, pool) = read_pool(&d.join("pool.csv")).unwrap();
    assert_eq!(pool.len(), 40);
    assert_eq!(config.seed, 4);
    let kind = schema.index_of("kind").unwrap();
    assert!(pool.iter().all(|c| c.row[kind].as_category() == Some(0)));

    assert_eq!(invsynth(d, &["select", "--pool", "pool.csv", "--top-q", "0.5", "--out", "acc.csv"]), 0);
    let (_, _, accepted) = read_pool(&d.join("acc.csv")).unwrap();
    assert_eq!(accepted.len(), 20);
    assert_eq!(
        invsynth(
            d,
            &["mix", "--observed", "train.csv", "--accepted", "acc.csv", "--alpha", "0.2", "--out", "mixed.csv"]
        ),
        0
    );
    let mixed = load_inventory(&d.join("mixed.csv"), None).unwrap();
    assert_eq!(mixed.n_rows(), 10);
    assert_eq!(mixed.schema().names().last(), Some("__source"));
}

#[test]
fn preprocess_round_trip_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.csv", TRAIN);
    let steps = [
        "preprocess",
        "--input",
        "train.csv",
        "--out",
        "z.csv",
        "--step",
        "log:rain",
        "--step",
        "zscore:slope",
        "--pipeline",
        "pipe.json",
    ];
    assert_eq!(invsynth(d, &steps), 0);
    assert_eq!(invsynth(d, &["preprocess", "--input", "z.csv", "--out", "back.csv", "--invert", "pipe.json"]), 0);
    let (orig, back) =
        (load_inventory(&d.join("train.csv"), None).unwrap(), load_inventory(&d.join("back.csv"), None).unwrap());
    for (a, b) in orig.rows().iter().zip(back.rows()) {
        assert!((a[0].as_number().unwrap() - b[0].as_number().unwrap()).abs() < 1e-9);
        assert!((a[1].as_number().unwrap() - b[1].as_number().unwrap()).abs() < 1e-9);
    }

    assert_eq!(invsynth(d, &["baseline", "mc", "--train", "train.csv", "-n", "50", "--out", "mc.csv"]), 0);
    assert_eq!(
        invsynth(
            d,
            &[
                "evaluate",
                "--orig",
                "train.csv",
                "--gen",
                "mc.csv",
                "--out",
                "eval.json",
                "--csv",
                "eval.csv",
                "--method",
                "mc"
            ]
        ),
        0
    );
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["method"], "mc");
    assert_eq!(report["meta"]["n_gen"], 50);
    assert!(report["features"]["slope"]["ks_stat"].is_number());
    assert!(report["features"]["kind"]["tv_distance"].is_number());
    let flat = fs::read_to_string(d.join("eval.csv")).unwrap();
    assert_eq!(flat.lines().count(), 4);
}

#[test]
fn config_file_flags_yield_to_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.csv", TRAIN);
    write(d, "cfg.json", r#"{"seed": 9, "generate": {"candidates": 15, "permutations": 2}, "select": {"top_q": 0.9}}"#);
    let cfg = d.join("cfg.json").to_string_lossy().into_owned();
    assert_eq!(invsynth(d, &["--config", &cfg, "generate", "--train", "train.csv", "--out", "a.csv"]), 0);
    let (_, config, pool) = read_pool(&d.join("a.csv")).unwrap();
    assert_eq!((pool.len(), config.permutations, config.seed), (15, 2, 9));
    assert_eq!(
        invsynth(
            d,
            &["--config", &cfg, "generate", "--train", "train.csv", "-N", "7", "--seed", "3", "--out", "b.csv"]
        ),
        0
    );
    let (_, config, pool) = read_pool(&d.join("b.csv")).unwrap();
    assert_eq!((pool.len(), config.seed), (7, 3));

    let argv: Vec<String> = ["invsynth", "--config", "x.json"].iter().map(|s| s.to_string()).collect();
    assert_eq!(expand_config(argv.clone()).unwrap(), argv);
}

#[test]
fn step_syntax() {
    assert_eq!(parse_step("zscore:slope").unwrap(), StepRequest::Zscore { column: "slope".into() });
    assert_eq!(parse_step("impute_knn:rain").unwrap(), StepRequest::ImputeKnn { column: "rain".into(), k: 5 });
    assert!(matches!(parse_step("winsorize:rain:0.05:0.95").unwrap(), StepRequest::Winsorize { .. }));
    assert_eq!(parse_step("missing_indicator").unwrap(), StepRequest::MissingIndicator);
    for bad in ["zscore", "log:", "winsorize:rain:0.05", "rank_quantile:x:cauchy", "square:x"] {
        assert!(parse_step(bad).is_err(), "{bad}");
    }
}

#[test]
fn binary_reports_usage_errors() {
    let out = Command::new(env!("CARGO_BIN_EXE_invsynth")).arg("select").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_invsynth")).arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
