use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fairlens() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fairlens"));
    c.env_remove("FAIRLENS_OUT").env_remove("RUST_LOG");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn fairlens");
    eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn predictions(dir: &Path, bad_score: bool) -> PathBuf {
    let mut text = String::from("y_true,y_score,region\n");
    for (k, g) in ["n", "s", "e"].iter().enumerate() {
        for i in 0..30 {
            let y = i % 2;
            let noise = ((i * 11 + k * 3) % 13) as f64 / 30.0 - 0.2;
            let s = ((if y == 1 { 0.65 } else { 0.35 }) + noise).clamp(0.0, 1.0);
            text.push_str(&format!("{y},{s:.4},{g}\n"));
        }
    }
    if bad_score {
        text.push_str("1,1.2,n\n");
    }
    let p = dir.join(if bad_score { "bad.csv" } else { "preds.csv" });
    std::fs::write(&p, text).unwrap();
    p
}

fn audit(dir: &Path, preds: &Path) -> Command {
    let mut c = fairlens();
    c.current_dir(dir).args([
        "audit",
        "--predictions",
        &format!("vendor={}", preds.display()),
        "--features",
        "region",
        "--threshold",
        "0.5",
        "--reference",
        "region=n",
    ]);
    c
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn help_lists_subcommands() {
    let out = run(fairlens().arg("--help"));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["run", "audit", "cluster", "pca", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn audit_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), false);
    let out = dir.path().join("result");
    let status = run(audit(dir.path(), &preds).args(["--out", out.to_str().unwrap()])).status;
    assert!(status.success());
    for rel in ["bundle.json", "external/region/matrix.csv", "external/region/clustermap.svg", "robustness/heatmap.svg"] {
        assert!(out.join(rel).exists(), "{rel} missing");
    }
    assert!(!out.join("failures.json").exists());
    let bundle: serde_json::Value = serde_json::from_str(&read(&out.join("bundle.json"))).unwrap();
    assert_eq!(bundle["schema_version"], 1);
    assert_eq!(bundle["run"]["mode"], "audit");
    assert_eq!(bundle["entries"][0]["reference_group"], "n");
}

#[test]
fn bad_score_exits_nonzero_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), true);
    let out = dir.path().join("result");
    let res = run(audit(dir.path(), &preds).args(["--out", out.to_str().unwrap()]));
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("row 91"), "{stderr}");
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("failures.json"))).unwrap();
    let msg = manifest["failures"][0]["message"].as_str().unwrap();
    assert!(msg.contains("1.2"), "{msg}");
}

#[test]
fn report_rerender_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), false);
    let first = dir.path().join("first");
    assert!(run(audit(dir.path(), &preds).args(["--out", first.to_str().unwrap()])).status.success());
    let second = dir.path().join("second");
    let bundle = first.join("bundle.json");
    for sub in ["report", "cluster", "pca"] {
        let status = run(fairlens().args([
            sub,
            "--bundle",
            bundle.to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ]))
        .status;
        assert!(status.success(), "{sub}");
        for rel in ["bundle.json", "external/region/clustermap.svg", "external/region/pca.svg", "robustness/heatmap.svg"] {
            assert_eq!(read(&first.join(rel)), read(&second.join(rel)), "{sub}: {rel}");
        }
    }
}

#[test]
fn pca_rejects_unknown_fit_model() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), false);
    let first = dir.path().join("first");
    assert!(run(audit(dir.path(), &preds).args(["--out", first.to_str().unwrap()])).status.success());
    let status = run(fairlens().current_dir(dir.path()).args([
        "pca",
        "--bundle",
        first.join("bundle.json").to_str().unwrap(),
        "--fit-model",
        "nope",
    ]))
    .status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), false);
    let env_out = dir.path().join("from-env");
    let status = run(audit(dir.path(), &preds).env("FAIRLENS_OUT", &env_out)).status;
    assert!(status.success());
    assert!(env_out.join("bundle.json").exists());
    assert!(!dir.path().join("out").exists());

    // the flag wins over the variable
    let flag_out = dir.path().join("from-flag");
    let status = run(audit(dir.path(), &preds)
        .env("FAIRLENS_OUT", &env_out)
        .args(["--out", flag_out.to_str().unwrap()]))
    .status;
    assert!(status.success());
    assert!(flag_out.join("bundle.json").exists());
}

#[test]
fn default_output_is_out() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), false);
    assert!(run(&mut audit(dir.path(), &preds)).status.success());
    assert!(dir.path().join("out/bundle.json").exists());
}

#[test]
fn conflicting_threshold_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let preds = predictions(dir.path(), false);
    let res = run(audit(dir.path(), &preds).args(["--validation-column", "v"]));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn run_with_bad_folds_records_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,sex,y\n");
    for i in 0..6 {
        csv.push_str(&format!("{i},{},{}\n", if i % 2 == 0 { "F" } else { "M" }, i % 2));
    }
    std::fs::write(dir.path().join("tiny.csv"), csv).unwrap();
    std::fs::write(
        dir.path().join("tiny.toml"),
        "name = \"tiny\"\nsource = \"tiny.csv\"\nlabel = \"y\"\npositive_class = \"1\"\npositive_meaning = \"assistive\"\nprotected = [\"sex\"]\n\n[[columns]]\nname = \"x\"\nkind = \"numeric\"\n\n[[columns]]\nname = \"sex\"\nkind = \"binary\"\n\n[[columns]]\nname = \"y\"\nkind = \"binary\"\nrole = \"label\"\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let res = run(fairlens().current_dir(dir.path()).args([
        "run",
        "--dataset",
        "tiny.toml",
        "--folds",
        "10",
        "--seeds",
        "1",
        "--models",
        "logit",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(res.status.code(), Some(1));
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("failures.json"))).unwrap();
    assert_eq!(manifest["failures"][0]["stage"], "splits");
    assert_eq!(manifest["failures"][0]["dataset"], "tiny");
}
