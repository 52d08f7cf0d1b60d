use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdl_ensemble::data::OutcomeKind;
use mdl_ensemble::ensemble::{BagConfig, Ensemble, TrainingMeta};
use mdl_ensemble::glm::{Family, GlmFit, TermFit};
use mdl_ensemble::synthetic::{planted, PlantedSpec};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdl-ensemble"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_planted(dir: &Path, name: &str, n_obs: usize, seed: u64) -> PathBuf {
    let (data, _) = planted(&PlantedSpec {
        n_obs,
        n_features: 12,
        n_informative: 2,
        effect: 2.0,
        seed,
        ..Default::default()
    })
    .unwrap();
    let mut text = String::from("y");
    for name in data.feature_names() {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for i in 0..data.n_obs() {
        text.push_str(&data.outcome()[i].to_string());
        for j in 0..data.n_features() {
            text.push_str(&format!(",{}", data.features()[(i, j)]));
        }
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn fit_writes_ensemble_and_matrices() {
    let tmp = TempDir::new().unwrap();
    write_planted(tmp.path(), "d.csv", 60, 1);
    run(
        &["fit", "--data", "d.csv", "--outcome", "y", "--bags", "12", "--seed", "7", "--out", "fit"],
        tmp.path(),
    );
    let e = read_json(&tmp.path().join("fit/ensemble.json"));
    assert_eq!(e["models"].as_array().unwrap().len(), 12);
    assert_eq!(e["provenance"]["seed"], 7);
    assert_eq!(e["provenance"]["config"]["bag"]["bags"], 12);
    assert_eq!(e["provenance"]["version"], mdl_ensemble::VERSION);

    let s = fs::read_to_string(tmp.path().join("fit/S.csv")).unwrap();
    assert!(s.starts_with("# mdl-ensemble"));
    assert!(s.contains("# seed: 7"));
    let data_rows = s.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 13);
    assert!(tmp.path().join("fit/B.csv").exists());
}

#[test]
fn reruns_and_thread_counts_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    write_planted(tmp.path(), "d.csv", 60, 2);
    let args = |threads: &'static str, out: &'static str| {
        vec![
            "--threads", threads, "pipeline", "--data", "d.csv", "--outcome", "y", "--bags", "16", "--folds", "3",
            "--repeats", "2", "--seed", "11", "--out", out,
        ]
    };
    run(&args("1", "a"), tmp.path());
    run(&args("1", "b"), tmp.path());
    run(&args("8", "c"), tmp.path());
    let a = dir_contents(&tmp.path().join("a"));
    assert_eq!(a.len(), 8);
    assert_eq!(a, dir_contents(&tmp.path().join("b")));
    assert_eq!(a, dir_contents(&tmp.path().join("c")));
}

#[test]
fn strategy_flag_controls_outputs() {
    let tmp = TempDir::new().unwrap();
    write_planted(tmp.path(), "d.csv", 60, 3);
    run(
        &["fit", "--data", "d.csv", "--outcome", "y", "--bags", "10", "--out", "."],
        tmp.path(),
    );
    run(
        &[
            "compress", "--ensemble", "ensemble.json", "--data", "d.csv", "--outcome", "y", "--strategy", "both",
            "--out", "both",
        ],
        tmp.path(),
    );
    let both = tmp.path().join("both");
    assert!(both.join("costs.csv").exists());
    assert!(both.join("compressed_medoid.json").exists());
    assert!(both.join("compressed_centroid.json").exists());

    run(
        &["compress", "--ensemble", "ensemble.json", "--strategy", "medoid", "--out", "medoid"],
        tmp.path(),
    );
    let medoid = tmp.path().join("medoid");
    assert!(medoid.join("compressed_medoid.json").exists());
    assert!(!medoid.join("compressed_centroid.json").exists());
}

#[test]
fn manual_k_overrides_the_minimizer() {
    let tmp = TempDir::new().unwrap();
    write_planted(tmp.path(), "d.csv", 60, 4);
    run(
        &["fit", "--data", "d.csv", "--outcome", "y", "--bags", "10", "--out", "."],
        tmp.path(),
    );
    for k in ["2", "5"] {
        run(
            &["compress", "--ensemble", "ensemble.json", "--k", k, "--strategy", "medoid", "--out", k],
            tmp.path(),
        );
        let c = read_json(&tmp.path().join(k).join("compressed_medoid.json"));
        assert_eq!(c["k"].to_string(), k);
        let clusters = c["clusters"].as_array().unwrap();
        assert_eq!(clusters.len().to_string(), k);
        let total: u64 = clusters.iter().map(|c| c["size"].as_u64().unwrap()).sum();
        assert_eq!(total, 10);
    }
}

#[test]
fn single_bag_ensemble() {
    let tmp = TempDir::new().unwrap();
    write_planted(tmp.path(), "d.csv", 60, 5);
    run(
        &["fit", "--data", "d.csv", "--outcome", "y", "--bags", "1", "--out", "."],
        tmp.path(),
    );
    assert_eq!(read_json(&tmp.path().join("ensemble.json"))["models"].as_array().unwrap().len(), 1);
    run(
        &["compress", "--ensemble", "ensemble.json", "--data", "d.csv", "--outcome", "y", "--out", "."],
        tmp.path(),
    );
    let c = read_json(&tmp.path().join("compressed_medoid.json"));
    assert_eq!(c["k"], 1);
    assert_eq!(c["clusters"][0]["memberIndices"], serde_json::json!([0]));
}

fn fixture_model(terms: &[(usize, f64)], names: &[String]) -> GlmFit {
    GlmFit {
        family: Family::Binomial,
        intercept: -0.2,
        terms: terms
            .iter()
            .map(|&(index, p)| TermFit {
                index,
                name: names[index].clone(),
                beta: 0.5,
                se: 0.2,
                p,
            })
            .collect(),
        log_likelihood: -20.0,
        n_obs: 40,
        converged: true,
    }
}

/// Twenty models in two families: one uses a single term, the other two
/// terms, each with two nearby p-value levels.
fn two_family_ensemble() -> Ensemble {
    let names: Vec<String> = (0..6).map(|j| format!("gene{j}")).collect();
    let mut models = Vec::new();
    for i in 0..20 {
        let model = match (i % 2, i % 4 < 2) {
            (0, true) => fixture_model(&[(1, 0.0027)], &names),
            (0, false) => fixture_model(&[(1, 0.004)], &names),
            (_, true) => fixture_model(&[(2, 0.01), (4, 0.02)], &names),
            (_, false) => fixture_model(&[(2, 0.013), (4, 0.025)], &names),
        };
        models.push(model);
    }
    Ensemble::from_models(
        models,
        names,
        BagConfig::default(),
        TrainingMeta {
            n_obs: 40,
            outcome_kind: OutcomeKind::Binary,
            standardizer: None,
        },
    )
    .unwrap()
}

#[test]
fn two_family_fixture_compresses_to_two_models_and_three_terms() {
    let tmp = TempDir::new().unwrap();
    let e = two_family_ensemble();
    fs::write(
        tmp.path().join("ensemble.json"),
        serde_json::to_string(&e.to_json_value()).unwrap(),
    )
    .unwrap();
    run(
        &["compress", "--ensemble", "ensemble.json", "--strategy", "medoid", "--out", "."],
        tmp.path(),
    );
    let c = read_json(&tmp.path().join("compressed_medoid.json"));
    let clusters = c["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2);
    let terms: usize = clusters
        .iter()
        .map(|c| c["representative"]["terms"].as_array().unwrap().len())
        .sum();
    assert_eq!(terms, 3);
    let costs = fs::read_to_string(tmp.path().join("costs.csv")).unwrap();
    assert_eq!(costs.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn evaluate_table_has_p_values_only_for_several_datasets() {
    let tmp = TempDir::new().unwrap();
    for (i, name) in ["a.csv", "b.csv", "c.csv"].iter().enumerate() {
        write_planted(tmp.path(), name, 45, 20 + i as u64);
    }
    let common = ["--outcome", "y", "--bags", "8", "--folds", "3", "--repeats", "1", "--seed", "5"];

    let mut one = vec!["evaluate", "--data", "a.csv", "--out", "one"];
    one.extend(common);
    let out = run(&one, tmp.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("t-test column omitted"));
    let table = fs::read_to_string(tmp.path().join("one/report.txt")).unwrap();
    assert!(!table.contains("P-value"));
    assert!(read_json(&tmp.path().join("one/report.json"))["tTests"].is_null());

    let mut three = vec!["evaluate", "--data", "a.csv", "b.csv", "--data", "c.csv", "--out", "three"];
    three.extend(common);
    run(&three, tmp.path());
    let table = fs::read_to_string(tmp.path().join("three/report.txt")).unwrap();
    let body: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body.len(), 4);
    assert!(body[0].contains("P-value"));
    for name in ["a", "b", "c"] {
        assert!(body[0].contains(name));
    }
    let report = read_json(&tmp.path().join("three/report.json"));
    assert_eq!(report["datasets"].as_array().unwrap().len(), 3);
    assert_eq!(report["datasets"][0]["folds"].as_array().unwrap().len(), 3);
}

#[test]
fn failures_exit_nonzero() {
    let tmp = TempDir::new().unwrap();
    write_planted(tmp.path(), "d.csv", 30, 6);
    let status = |args: &[&str]| bin().args(args).current_dir(tmp.path()).output().unwrap();

    let missing = status(&["fit", "--data", "d.csv", "--outcome", "nope", "--bags", "2"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));

    assert!(!status(&["fit", "--data", "absent.csv", "--outcome", "y"]).status.success());

    run(&["fit", "--data", "d.csv", "--outcome", "y", "--bags", "4"], tmp.path());
    let centroid = status(&["compress", "--ensemble", "ensemble.json", "--strategy", "centroid"]);
    assert!(!centroid.status.success());
    let bad_k = status(&["compress", "--ensemble", "ensemble.json", "--strategy", "medoid", "--k", "9"]);
    assert!(!bad_k.status.success());
}
