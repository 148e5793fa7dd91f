use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fairlens_core::audit::audit_external_predictions;
use fairlens_core::config::{AuditConfig, AuditThreshold, PredictionSource};
use fairlens_core::fairmatrix::column_names;
use fairlens_core::report::{
    render_clustermap_svg, render_pca_scatter_svg, render_robustness_svg, write_outputs, AuditBundle, SCHEMA_VERSION,
};

/// Two models over five groups, so every matrix is 10 x 13. Group `tiny`
/// has no negatives, which leaves FPR, TNR and AUC imputed.
fn ten_row_bundle(dir: &Path) -> AuditBundle {
    let mut text = String::from("model,y_true,y_score,g\n");
    for (m, shift) in [("alpha", 0.0), ("beta", 0.07)] {
        for (k, g) in ["p", "q", "r", "s"].iter().enumerate() {
            for i in 0..30 {
                let y = i % 2;
                let base = if y == 1 { 0.62 } else { 0.38 };
                let noise = ((i * 13 + k * 5) % 17) as f64 / 40.0 - 0.2;
                let s = (base + noise * (1.0 + k as f64 * 0.4) + shift).clamp(0.0, 1.0);
                text.push_str(&format!("{m},{y},{s:.4},{g}\n"));
            }
        }
        for i in 0..6 {
            text.push_str(&format!("{m},1,{:.2},tiny\n", 0.3 + 0.1 * i as f64 + shift));
        }
    }
    let path = dir.join("preds.csv");
    std::fs::write(&path, text).unwrap();
    let cfg = AuditConfig {
        name: "svgcheck".into(),
        predictions: vec![PredictionSource {
            model: "all".into(),
            path: PathBuf::from(&path),
        }],
        features: vec!["g".into()],
        threshold: AuditThreshold::Fixed(0.5),
        model_column: Some("model".into()),
        reference_groups: BTreeMap::from([("g".into(), "p".into())]),
    };
    audit_external_predictions(&cfg).unwrap()
}

fn class_count(doc: &roxmltree::Document, class: &str) -> usize {
    doc.descendants().filter(|n| n.attribute("class") == Some(class)).count()
}

fn texts(doc: &roxmltree::Document) -> Vec<String> {
    doc.descendants()
        .filter(|n| n.tag_name().name() == "text")
        .map(|n| n.text().unwrap_or_default().to_string())
        .collect()
}

#[test]
fn clustermap_structure() {
    let dir = tempfile::tempdir().unwrap();
    let b = ten_row_bundle(dir.path());
    let e = &b.entries[0];
    assert_eq!(e.matrix.n_rows(), 10);
    let svg = render_clustermap_svg(e).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(class_count(&doc, "cell"), 130);
    assert_eq!(class_count(&doc, "col-merge"), 12);
    assert_eq!(class_count(&doc, "row-merge"), 9);
    let imputed = e.matrix.imputed.iter().flatten().filter(|&&f| f).count();
    assert!(imputed >= 6, "{imputed}");
    assert_eq!(class_count(&doc, "imputed"), imputed);
    assert_eq!(class_count(&doc, "colorbar"), 1);
    let t = texts(&doc);
    // column labels carry the column variance
    for (m, v) in column_names().iter().zip(&e.matrix.column_variances) {
        let label = format!("{m} ({v:.3})");
        assert!(t.contains(&label), "missing column label {label}: {t:?}");
    }
    assert!(t.iter().any(|s| s == "beta:tiny"), "{t:?}");
}

#[test]
fn scatter_structure() {
    let dir = tempfile::tempdir().unwrap();
    let b = ten_row_bundle(dir.path());
    let p = b.entries[0].projection.as_ref().unwrap();
    assert_eq!(p.explained_variance_ratios.len(), 3);
    let svg = render_pca_scatter_svg(p, &["alpha", "beta"], "check").unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(class_count(&doc, "marker"), 10);
    assert_eq!(class_count(&doc, "crosshair"), 2);
    let axis: Vec<String> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("axis-label"))
        .filter_map(|n| n.text().map(String::from))
        .collect();
    assert_eq!(axis.len(), 2);
    assert!(axis[0].starts_with("PC1 (explained variance 0."), "{axis:?}");
    assert!(axis[1].starts_with("PC2 (explained variance 0."), "{axis:?}");
    assert!(texts(&doc).iter().any(|s| s == "p (reference)"));
    // the reference group of every model sits exactly on the crosshair
    for m in &p.models {
        let r = p.groups.iter().position(|g| *g == p.reference).unwrap();
        assert!(m.coordinates.row(r).iter().all(|v| *v == 0.0));
    }
    let one = render_pca_scatter_svg(p, &["beta"], "check").unwrap();
    let doc = roxmltree::Document::parse(&one).unwrap();
    assert_eq!(class_count(&doc, "marker"), 5);
}

#[test]
fn heatmap_structure() {
    let dir = tempfile::tempdir().unwrap();
    let b = ten_row_bundle(dir.path());
    let svg = render_robustness_svg(b.robustness.as_ref().unwrap()).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(class_count(&doc, "cell"), 1);
    assert!(texts(&doc).iter().any(|s| s == "svgcheck/g"));
}

#[test]
fn outputs_layout_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let b = ten_row_bundle(dir.path());
    let out = dir.path().join("out");
    let written = write_outputs(&b, &out, &[]).unwrap();
    for rel in [
        "bundle.json",
        "svgcheck/g/matrix.csv",
        "svgcheck/g/clustermap.svg",
        "svgcheck/g/pca.svg",
        "robustness/means.csv",
        "robustness/stds.csv",
        "robustness/heatmap.svg",
    ] {
        assert!(written.contains(&out.join(rel)), "{rel} not written");
    }
    let csv = std::fs::read_to_string(out.join("svgcheck/g/matrix.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.lines().next().unwrap().ends_with("FOR,PPR,PPREV"));

    let loaded = AuditBundle::load(&out.join("bundle.json")).unwrap();
    assert_eq!(loaded, b);
    assert_eq!(loaded.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn unknown_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let b = ten_row_bundle(dir.path());
    let json = b
        .to_json()
        .unwrap()
        .replacen(&format!("\"schema_version\": {SCHEMA_VERSION}"), "\"schema_version\": 99", 1);
    let err = AuditBundle::from_json(&json).unwrap_err();
    assert!(err.to_string().contains("99"), "{err}");
}

#[test]
fn tampered_bundle_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = ten_row_bundle(dir.path());
    b.entries[0].column_linkage.merges.pop();
    assert!(b.validate().is_err());
    assert!(write_outputs(&b, &dir.path().join("x"), &[]).is_err());
}
