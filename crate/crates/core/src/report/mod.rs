//! Figures (SVG) and the JSON audit bundle.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! bundle.json
//! <dataset>/<feature>/seed<k>/{clustermap.svg, pca.svg, matrix.csv}
//! robustness/{means.csv, stds.csv, heatmap.svg}
//! ```
//!
//! In audit mode the `seed<k>` level is omitted. Every file is a pure
//! function of the bundle.

mod bundle;
mod clustermap;
mod heatmap;
mod scatter;
pub mod svg;

use std::path::{Path, PathBuf};

pub use bundle::*;
pub use clustermap::render_clustermap_svg;
pub use heatmap::render_robustness_svg;
pub use scatter::render_pca_scatter_svg;

use crate::error::{Error, Result};

/// Models drawn in the scatter: `requested` if given, else the two with the
/// highest pooled AUC.
pub fn scatter_models<'a>(bundle: &'a AuditBundle, entry: &FeatureEntry, requested: &'a [String]) -> Vec<&'a str> {
    if !requested.is_empty() {
        return requested.iter().map(String::as_str).collect();
    }
    bundle
        .seed_run(&entry.dataset, entry.seed)
        .map(|r| r.ranked_models().into_iter().take(2).collect())
        .unwrap_or_default()
}

pub fn scatter_title(entry: &FeatureEntry) -> String {
    let seed = entry.seed.map_or_else(|| "external predictions".to_string(), |s| format!("seed {s}"));
    format!(
        "{} / {} / {seed}, aligned on {}",
        entry.dataset, entry.feature, entry.reference_group
    )
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Write the bundle, its CSV sidecars and every figure. Returns the files written.
pub fn write_outputs(bundle: &AuditBundle, out: &Path, plot_models: &[String]) -> Result<Vec<PathBuf>> {
    bundle.validate()?;
    mkdir(out)?;
    let mut written = Vec::new();
    let path = out.join("bundle.json");
    write(&path, &bundle.to_json()?)?;
    written.push(path);

    for entry in &bundle.entries {
        let dir = out.join(entry.output_dir());
        mkdir(&dir)?;
        let path = dir.join("matrix.csv");
        entry.matrix.save_csv(&path)?;
        written.push(path);
        let path = dir.join("clustermap.svg");
        write(&path, &render_clustermap_svg(entry)?)?;
        written.push(path);
        match &entry.projection {
            Some(p) if p.explained_variance_ratios.len() >= 2 => {
                let models = scatter_models(bundle, entry, plot_models);
                let path = dir.join("pca.svg");
                write(&path, &render_pca_scatter_svg(p, &models, &scatter_title(entry))?)?;
                written.push(path);
            }
            _ => log::info!(
                "{}/{}: fewer than two components, scatter skipped",
                entry.dataset,
                entry.feature
            ),
        }
    }

    if let Some(r) = &bundle.robustness {
        let dir = out.join("robustness");
        mkdir(&dir)?;
        r.save_csv(&dir)?;
        written.push(dir.join("means.csv"));
        written.push(dir.join("stds.csv"));
        let path = dir.join("heatmap.svg");
        write(&path, &render_robustness_svg(r)?)?;
        written.push(path);
    }
    Ok(written)
}
