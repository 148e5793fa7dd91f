use std::path::Path;

use fairlens_core::config::RunConfig;
use fairlens_core::ingest::DatasetSpec;
use fairlens_core::models::ModelKind;
use fairlens_core::pipeline::{recluster, reproject, run_pipeline};
use fairlens_core::rng::rng;
use fairlens_core::splits::FoldPlan;
use rand::Rng;

const SPEC: &str = r#"
name = "toy"
source = "toy.csv"
label = "y"
positive_class = "1"
positive_meaning = "assistive"
protected = ["sex", "region"]

[[columns]]
name = "x1"
kind = "numeric"

[[columns]]
name = "x2"
kind = "numeric"

[[columns]]
name = "sex"
kind = "binary"

[[columns]]
name = "region"
kind = "categorical"

[[columns]]
name = "y"
kind = "binary"
role = "label"
"#;

/// A learnable toy table whose base rate differs by region.
fn write_toy(dir: &Path, n: usize) -> DatasetSpec {
    let mut r = rng(77);
    let mut text = String::from("x1,x2,sex,region,y\n");
    for i in 0..n {
        let region = ["north", "south", "east", "west"][i % 4];
        let sex = if r.gen_bool(0.5) { "F" } else { "M" };
        let x1: f64 = r.gen_range(-2.0..2.0);
        let x2: f64 = r.gen_range(-2.0..2.0);
        let bias = (i % 4) as f64 * 0.3 - 0.45;
        let y = u8::from(x1 + 0.5 * x2 + bias + r.gen_range(-1.0..1.0) > 0.0);
        text.push_str(&format!("{x1:.4},{x2:.4},{sex},{region},{y}\n"));
    }
    std::fs::write(dir.join("toy.csv"), text).unwrap();
    DatasetSpec::from_toml_str(SPEC, dir).unwrap()
}

fn small_config(spec: DatasetSpec) -> RunConfig {
    let mut cfg = RunConfig::desk(vec![spec], vec![ModelKind::Logit, ModelKind::Rf]);
    cfg.plan = FoldPlan {
        k: 3,
        seeds: vec![0, 1],
        validation_fraction: 0.1,
    };
    cfg.search_draws = 2;
    cfg
}

#[test]
fn toy_run_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(write_toy(dir.path(), 240));
    let b = run_pipeline(&cfg).unwrap();
    assert!(b.is_complete(), "{:?}", b.failures);
    // one entry per feature and seed
    assert_eq!(b.entries.len(), 4);
    for e in &b.entries {
        let groups = if e.feature == "sex" { 2 } else { 4 };
        assert_eq!(e.matrix.n_rows(), 2 * groups);
        assert_eq!(e.column_linkage.merges.len(), 12);
        assert_eq!(e.row_linkage.merges.len(), 2 * groups - 1);
    }
    for run in &b.seed_runs {
        // a winner and a threshold per model and fold
        assert_eq!(run.winners.len(), 6);
        assert_eq!(run.thresholds.len(), 6);
        assert_eq!(run.model_auc.len(), 2);
        assert!(run.model_auc.iter().all(|m| m.auc > 0.6));
    }
    let r = b.robustness.as_ref().unwrap();
    assert_eq!(r.labels, vec!["toy/sex", "toy/region"]);
    assert_eq!(r.n_seeds, 2);
}

#[test]
fn toy_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(write_toy(dir.path(), 160));
    cfg.models = vec![ModelKind::Logit];
    let a = run_pipeline(&cfg).unwrap().to_json().unwrap();
    cfg.jobs = Some(1);
    let b = run_pipeline(&cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn too_many_folds_is_a_splits_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(write_toy(dir.path(), 8));
    cfg.plan.k = 20;
    let b = run_pipeline(&cfg).unwrap();
    assert!(!b.is_complete());
    assert!(b.entries.is_empty());
    assert_eq!(b.failures.len(), 2);
    for f in &b.failures {
        assert_eq!(f.stage, "splits");
        assert_eq!(f.feature, None);
        assert!(f.message.contains("20 folds"), "{}", f.message);
    }
}

#[test]
fn missing_source_is_an_ingest_failure() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec::from_toml_str(SPEC, dir.path()).unwrap();
    let b = run_pipeline(&small_config(spec)).unwrap();
    assert_eq!(b.failures.len(), 1);
    assert_eq!(b.failures[0].stage, "ingest");
    assert_eq!(b.failures[0].seed, None);
}

#[test]
fn recluster_and_reproject_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(write_toy(dir.path(), 200));
    let b = run_pipeline(&cfg).unwrap();

    let mut again = b.clone();
    recluster(&mut again).unwrap();
    reproject(&mut again, None).unwrap();
    assert_eq!(again, b);

    let mut refit = b.clone();
    reproject(&mut refit, Some("rf")).unwrap();
    for e in &refit.entries {
        if let Some(p) = &e.projection {
            assert_eq!(p.pca.fitted_on, "rf");
        }
    }
    assert!(reproject(&mut refit, Some("mlp")).is_err());
}
