use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairlens_core::config::{
    seed_list, AuditConfig, AuditThreshold, Mode, PredictionSource, RunConfig, PAPER_SCALE,
};
use fairlens_core::ingest::DatasetSpec;
use fairlens_core::models::ModelKind;
use fairlens_core::pipeline::{recluster, reproject, run_pipeline, FailureManifest};
use fairlens_core::report::{write_outputs, AuditBundle, FailureRecord};
use fairlens_core::Error;

/// Multi-metric group fairness audits: trains a model zoo with cross
/// validation (or reads external predictions), builds group metric matrices,
/// clusters metrics and groups, and projects groups with PCA.
#[derive(Parser)]
#[command(name = "fairlens", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate and analyse every dataset, feature and seed.
    Run(RunArgs),
    /// Analyse predictions produced by another system (no training).
    Audit(AuditArgs),
    /// Recompute distances, dendrograms and robustness of an existing bundle.
    Cluster(ReprocessArgs),
    /// Refit the PCA projections of an existing bundle.
    Pca(PcaArgs),
    /// Re-render figures and CSV files from an existing bundle.
    Report(ReprocessArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory; default FAIRLENS_OUT, else `out`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Models drawn in PCA scatters (comma separated); default: the top two by pooled AUC.
    #[arg(long, value_delimiter = ',')]
    plot_models: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (TOML). Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dataset schema files, in addition to those of the config.
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,

    /// Number of seeds; seeds 0..n are used.
    #[arg(long)]
    seeds: Option<u64>,

    /// Number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,

    /// Share of each training fold held out for model selection.
    #[arg(long)]
    validation_fraction: Option<f64>,

    /// Model kinds, e.g. logit,mlp,knn,rf,tree,nb.
    #[arg(long)]
    models: Option<String>,

    /// Random hyperparameter draws per model kind.
    #[arg(long)]
    search_draws: Option<usize>,

    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,

    /// Use 10 seeds, 10 folds and 30 draws unless given explicitly.
    #[arg(long)]
    paper_scale: bool,

    /// Output directory; default from the config, else FAIRLENS_OUT, else `out`.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_delimiter = ',')]
    plot_models: Vec<String>,
}

#[derive(Args)]
struct AuditArgs {
    /// Run config with an [audit] table. Flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Prediction files as MODEL=PATH; repeatable.
    #[arg(long = "predictions", value_parser = parse_prediction)]
    predictions: Vec<PredictionSource>,

    /// Protected feature columns (comma separated).
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,

    /// Fixed decision threshold in [0, 1].
    #[arg(long, conflicts_with = "validation_column")]
    threshold: Option<f64>,

    /// Column flagging rows used to pick the threshold by balanced accuracy.
    #[arg(long)]
    validation_column: Option<String>,

    /// Column naming the model of each row, for files holding several models.
    #[arg(long)]
    model_column: Option<String>,

    /// Reference group as FEATURE=GROUP; repeatable. Default: the largest group.
    #[arg(long = "reference", value_parser = parse_pair)]
    references: Vec<(String, String)>,

    /// Name used for the audited system in outputs.
    #[arg(long)]
    name: Option<String>,

    #[arg(long)]
    jobs: Option<usize>,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReprocessArgs {
    /// Existing bundle.json.
    #[arg(long)]
    bundle: PathBuf,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PcaArgs {
    #[command(flatten)]
    common: ReprocessArgs,

    /// Fit the per-model PCA on this model instead of the best one.
    #[arg(long)]
    fit_model: Option<String>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn parse_prediction(s: &str) -> Result<PredictionSource, String> {
    let (model, path) = parse_pair(s)?;
    Ok(PredictionSource {
        model,
        path: PathBuf::from(path),
    })
}

fn default_out() -> PathBuf {
    std::env::var_os("FAIRLENS_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

/// `--out`, then the config file, then FAIRLENS_OUT, then `out`.
fn resolve_out(flag: Option<PathBuf>, cfg: Option<PathBuf>) -> PathBuf {
    flag.or(cfg).unwrap_or_else(default_out)
}

fn run_config(a: RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::desk(Vec::new(), ModelKind::ALL.to_vec()),
    };
    cfg.mode = Mode::Full;
    for path in &a.datasets {
        cfg.datasets.push(DatasetSpec::from_toml_file(path)?);
    }
    if a.paper_scale {
        cfg.plan.seeds = seed_list(PAPER_SCALE.seeds);
        cfg.plan.k = PAPER_SCALE.folds;
        cfg.search_draws = PAPER_SCALE.draws;
    }
    if let Some(n) = a.seeds {
        cfg.plan.seeds = seed_list(n);
    }
    if let Some(k) = a.folds {
        cfg.plan.k = k;
    }
    if let Some(f) = a.validation_fraction {
        cfg.plan.validation_fraction = f;
    }
    if let Some(m) = &a.models {
        cfg.models = ModelKind::parse_list(m)?;
    }
    if let Some(d) = a.search_draws {
        cfg.search_draws = d;
    }
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    cfg.output = Some(resolve_out(a.out, cfg.output.take()));
    if !a.plot_models.is_empty() {
        cfg.plot_models = a.plot_models;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn audit_config(a: AuditArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::desk(Vec::new(), Vec::new()),
    };
    cfg.mode = Mode::Audit;
    let base = cfg.audit.take();
    let threshold = match (a.threshold, a.validation_column) {
        (Some(t), _) => Some(AuditThreshold::Fixed(t)),
        (None, Some(c)) => Some(AuditThreshold::ValidationColumn(c)),
        (None, None) => base.as_ref().map(|b| b.threshold.clone()),
    };
    let threshold = threshold
        .ok_or_else(|| Error::Config("give --threshold or --validation-column".into()))?;
    let mut reference_groups = base.as_ref().map(|b| b.reference_groups.clone()).unwrap_or_default();
    reference_groups.extend(a.references);
    cfg.audit = Some(AuditConfig {
        name: a
            .name
            .or_else(|| base.as_ref().map(|b| b.name.clone()))
            .unwrap_or_else(|| "external".into()),
        predictions: if a.predictions.is_empty() {
            base.as_ref().map(|b| b.predictions.clone()).unwrap_or_default()
        } else {
            a.predictions
        },
        features: if a.features.is_empty() {
            base.as_ref().map(|b| b.features.clone()).unwrap_or_default()
        } else {
            a.features
        },
        threshold,
        model_column: a.model_column.or_else(|| base.as_ref().and_then(|b| b.model_column.clone())),
        reference_groups: reference_groups.into_iter().collect::<BTreeMap<_, _>>(),
    });
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    cfg.output = Some(resolve_out(a.output.out, cfg.output.take()));
    if !a.output.plot_models.is_empty() {
        cfg.plot_models = a.output.plot_models;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_manifest(out: &Path, failures: &[FailureRecord]) {
    let path = out.join("failures.json");
    let manifest = FailureManifest {
        failures: failures.to_vec(),
    };
    let written = std::fs::create_dir_all(out)
        .map_err(|e| e.to_string())
        .and_then(|_| manifest.to_json().map_err(|e| e.to_string()))
        .and_then(|text| std::fs::write(&path, text).map_err(|e| e.to_string()));
    match written {
        Ok(()) => eprintln!("failure manifest written to {}", path.display()),
        Err(e) => eprintln!("could not write {}: {e}", path.display()),
    }
}

fn error_record(e: &Error) -> FailureRecord {
    match e {
        Error::Stage {
            dataset,
            feature,
            seed,
            stage,
            ..
        } => FailureRecord {
            dataset: dataset.clone(),
            feature: (feature != "*").then(|| feature.clone()),
            seed: seed.parse().ok(),
            stage: stage.to_string(),
            message: e.to_string(),
        },
        _ => FailureRecord {
            dataset: "*".into(),
            feature: None,
            seed: None,
            stage: "setup".into(),
            message: e.to_string(),
        },
    }
}

/// Writes outputs and, when cells failed, the manifest. Returns whether the run was complete.
fn finish(bundle: &AuditBundle, out: &Path, plot_models: &[String]) -> Result<bool, Error> {
    let files = write_outputs(bundle, out, plot_models)?;
    eprintln!("wrote {} files under {}", files.len(), out.display());
    let stale = out.join("failures.json");
    if bundle.is_complete() {
        if stale.exists() {
            std::fs::remove_file(&stale).ok();
        }
        Ok(true)
    } else {
        for f in &bundle.failures {
            eprintln!("failed: {}", f.message);
        }
        write_manifest(out, &bundle.failures);
        Ok(false)
    }
}

fn execute(cli: Cli) -> Result<bool, (Error, Option<PathBuf>)> {
    match cli.command {
        Command::Run(a) => {
            let cfg = run_config(a).map_err(|e| (e, None))?;
            let out = cfg.output.clone().expect("resolved");
            let bundle = run_pipeline(&cfg).map_err(|e| (e, Some(out.clone())))?;
            finish(&bundle, &out, &cfg.plot_models).map_err(|e| (e, Some(out)))
        }
        Command::Audit(a) => {
            let cfg = audit_config(a).map_err(|e| (e, None))?;
            let out = cfg.output.clone().expect("resolved");
            let bundle = run_pipeline(&cfg).map_err(|e| (e, Some(out.clone())))?;
            finish(&bundle, &out, &cfg.plot_models).map_err(|e| (e, Some(out)))
        }
        Command::Cluster(a) => {
            let out = resolve_out(a.output.out.clone(), None);
            let mut bundle = AuditBundle::load(&a.bundle).map_err(|e| (e, None))?;
            recluster(&mut bundle).map_err(|e| (e, Some(out.clone())))?;
            finish(&bundle, &out, &a.output.plot_models).map_err(|e| (e, Some(out)))
        }
        Command::Pca(a) => {
            let out = resolve_out(a.common.output.out.clone(), None);
            let mut bundle = AuditBundle::load(&a.common.bundle).map_err(|e| (e, None))?;
            reproject(&mut bundle, a.fit_model.as_deref()).map_err(|e| (e, Some(out.clone())))?;
            finish(&bundle, &out, &a.common.output.plot_models).map_err(|e| (e, Some(out)))
        }
        Command::Report(a) => {
            let out = resolve_out(a.output.out.clone(), None);
            let bundle = AuditBundle::load(&a.bundle).map_err(|e| (e, None))?;
            finish(&bundle, &out, &a.output.plot_models).map_err(|e| (e, Some(out)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err((e, out)) => {
            eprintln!("error: {e}");
            if let Some(out) = out {
                write_manifest(&out, &[error_record(&e)]);
            }
            ExitCode::from(1)
        }
    }
}
