//! Command implementations: load inputs, delegate to the library, write
//! artifacts and a run manifest into the output directory.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use idclean_core::*;
// The glob brings in the library's single-parameter Result alias; command
// functions use the std form with CliError.
use std::result::Result;

use crate::config::{IterateToml, SynthToml, TrainToml};
use crate::manifest::{RunManifest, Timings};
use crate::{Cli, CliError, Command, FormatArg, RuleArg};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    let workers = cli.workers;
    match cli.command {
        Command::Gen { config, out } => gen(seed, &config, &out),
        Command::Clean {
            data,
            format,
            threshold,
            min_group_size,
            rule,
            head,
            embeddings,
            out,
        } => clean(
            seed,
            workers,
            &data,
            format,
            threshold,
            min_group_size,
            rule,
            head.as_deref(),
            embeddings.as_deref(),
            &out,
        ),
        Command::Train {
            data,
            format,
            config,
            cleaned,
            head,
            embeddings,
            out,
        } => train(
            seed,
            &data,
            format,
            &config,
            cleaned.as_deref(),
            head.as_deref(),
            embeddings.as_deref(),
            &out,
        ),
        Command::Calibrate {
            data,
            format,
            target_precision,
            min_group_size,
            rule,
            sweep_points,
            head,
            embeddings,
            out,
        } => calibrate(
            seed,
            workers,
            &data,
            format,
            target_precision,
            min_group_size,
            rule,
            sweep_points,
            head.as_deref(),
            embeddings.as_deref(),
            &out,
        ),
        Command::Iterate {
            data,
            format,
            config,
            embeddings,
            out,
        } => iterate(
            seed,
            workers,
            &data,
            format,
            &config,
            embeddings.as_deref(),
            &out,
        ),
        Command::EvalPr {
            data,
            format,
            t_min,
            t_max,
            points,
            min_group_size,
            rule,
            head,
            embeddings,
            out,
        } => eval_pr(
            seed,
            workers,
            &data,
            format,
            t_min,
            t_max,
            points,
            min_group_size,
            rule,
            head.as_deref(),
            embeddings.as_deref(),
            &out,
        ),
        Command::EvalVerify {
            data,
            format,
            n_pos,
            n_neg,
            head,
            embeddings,
            out,
        } => eval_verify(
            seed,
            &data,
            format,
            n_pos,
            n_neg,
            head.as_deref(),
            embeddings.as_deref(),
            &out,
        ),
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn infer_format(path: &Path, arg: Option<FormatArg>) -> DatasetFormat {
    match arg {
        Some(FormatArg::Csv) => DatasetFormat::Csv,
        Some(FormatArg::Jsonl) => DatasetFormat::Jsonl,
        None => {
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                DatasetFormat::Csv
            } else {
                DatasetFormat::Jsonl
            }
        }
    }
}

fn load_data(
    path: &Path,
    format: Option<FormatArg>,
    embeddings: Option<&Path>,
) -> Result<WeakDataset, CliError> {
    let ds = load_dataset(path, infer_format(path, format))?;
    match embeddings {
        Some(p) => {
            let table = load_precomputed_embeddings(p)?;
            Ok(ds.with_replaced_features(&table)?)
        }
        None => Ok(ds),
    }
}

fn build_model(ds: &WeakDataset, head: Option<&Path>) -> Result<EmbeddingModel, CliError> {
    match head {
        Some(p) => {
            let h = load_head(p)?;
            if h.ncols() != ds.dim() {
                return Err(idclean_core::Error::Dimension {
                    expected: ds.dim(),
                    found: h.ncols(),
                }
                .into());
            }
            Ok(EmbeddingModel::new(None, h)?)
        }
        None => Ok(EmbeddingModel::identity(ds.dim())),
    }
}

fn gen(seed: u64, config_path: &Path, out: &Path) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("generate");
    let cfg = SynthToml::load(config_path)?.into_core(seed);
    let output = generate(&cfg)?;

    timings.stage("write");
    save_dataset(&output.dataset, &out.join("dataset.jsonl"))?;
    save_metadata(&output.metadata, &out.join("meta.json"))?;

    let mut manifest = RunManifest::new("gen", seed);
    manifest.input("config", config_path);
    manifest.output("dataset", "dataset.jsonl");
    manifest.output("metadata", "meta.json");
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    manifest.results = json!({
        "records": output.dataset.len(),
        "groups": output.dataset.groups().len(),
        "contaminated": output.metadata.contaminated_count,
    });
    manifest.write(out, "")?;
    timings.write(out)?;
    println!(
        "gen: {} records in {} groups ({} contaminated) -> {}",
        output.dataset.len(),
        output.dataset.groups().len(),
        output.metadata.contaminated_count,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn clean(
    seed: u64,
    workers: usize,
    data: &Path,
    format: Option<FormatArg>,
    threshold: f64,
    min_group_size: usize,
    rule: RuleArg,
    head: Option<&Path>,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("load");
    let ds = load_data(data, format, embeddings)?;
    let model = build_model(&ds, head)?;
    let params = CleanParams::new(threshold, min_group_size, rule.into())?;

    timings.stage("clean");
    let (cleaned, diagnostics) =
        run_with_workers(workers, || clean_dataset_full(&ds, &model, &params))?;

    timings.stage("write");
    save_cleaned(&cleaned, &out.join("cleaned.jsonl"))?;
    write_diagnostics(&diagnostics, &out.join("diagnostics.jsonl"))?;

    let mut manifest = RunManifest::new("clean", seed);
    manifest.workers = Some(workers);
    manifest.input("data", data);
    if let Some(p) = head {
        manifest.input("head", p);
    }
    if let Some(p) = embeddings {
        manifest.input("embeddings", p);
    }
    manifest.output("cleaned", "cleaned.jsonl");
    manifest.output("diagnostics", "diagnostics.jsonl");
    manifest.config = serde_json::to_value(&params).expect("params serialize");
    manifest.results = json!({
        "records": ds.len(),
        "kept_count": cleaned.kept_count(),
        "groups_kept": cleaned.kept.len(),
    });
    manifest.write(out, "")?;
    timings.write(out)?;
    println!(
        "clean: kept {} of {} records across {} groups -> {}",
        cleaned.kept_count(),
        ds.len(),
        cleaned.kept.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    seed: u64,
    data: &Path,
    format: Option<FormatArg>,
    config_path: &Path,
    cleaned: Option<&Path>,
    head: Option<&Path>,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("load");
    let mut ds = load_data(data, format, embeddings)?;
    if let Some(p) = cleaned {
        let kept = load_cleaned(p)?;
        ds = ds.restrict_to(&kept.kept_ids())?;
    }
    let model = build_model(&ds, head)?;
    let cfg = TrainToml::load(config_path)?.into_core(seed);

    timings.stage("train");
    let outcome = train_head(&ds, &model, &cfg)?;

    timings.stage("write");
    save_head(outcome.model.head(), &out.join("head.json"))?;
    write_loss_trace(&outcome.trace, &out.join("loss_trace.csv"))?;

    let mut manifest = RunManifest::new("train", seed);
    manifest.input("data", data);
    manifest.input("config", config_path);
    if let Some(p) = cleaned {
        manifest.input("cleaned", p);
    }
    if let Some(p) = head {
        manifest.input("head", p);
    }
    if let Some(p) = embeddings {
        manifest.input("embeddings", p);
    }
    manifest.output("head", "head.json");
    manifest.output("loss_trace", "loss_trace.csv");
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    let last = outcome.trace.last();
    manifest.results = json!({
        "records": ds.len(),
        "iterations": outcome.trace.len(),
        "final_batch_loss": last.map(|p| p.batch_loss),
        "final_active_fraction": last.map(|p| p.active_fraction),
    });
    manifest.write(out, "")?;
    timings.write(out)?;
    println!(
        "train: {} iterations on {} records -> {}",
        outcome.trace.len(),
        ds.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn calibrate(
    seed: u64,
    workers: usize,
    data: &Path,
    format: Option<FormatArg>,
    target_precision: f64,
    min_group_size: usize,
    rule: RuleArg,
    sweep_points: usize,
    head: Option<&Path>,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("load");
    let ds = load_data(data, format, embeddings)?;
    let model = build_model(&ds, head)?;
    let params = CleanParams::new(1.0, min_group_size, rule.into())?;

    timings.stage("calibrate");
    let calibration = run_with_workers(workers, || {
        calibrate_threshold(&model, &ds, target_precision, &params, sweep_points)
    })?;

    timings.stage("write");
    write_pr_csv(&calibration.curve, &out.join("pr_curve.csv"))?;
    let summary = json!({
        "threshold": calibration.threshold,
        "precision": calibration.precision,
        "recall": calibration.recall,
        "target_precision": target_precision,
    });
    let calib_path = out.join("calibration.json");
    std::fs::write(
        &calib_path,
        format!("{}\n", serde_json::to_string_pretty(&summary).unwrap()),
    )
    .map_err(|e| CliError::io(format!("cannot write {}: {e}", calib_path.display())))?;

    let mut manifest = RunManifest::new("calibrate", seed);
    manifest.workers = Some(workers);
    manifest.input("data", data);
    if let Some(p) = head {
        manifest.input("head", p);
    }
    if let Some(p) = embeddings {
        manifest.input("embeddings", p);
    }
    manifest.output("calibration", "calibration.json");
    manifest.output("pr_curve", "pr_curve.csv");
    manifest.config = json!({
        "target_precision": target_precision,
        "min_group_size": min_group_size,
        "component_rule": params.component_rule,
        "sweep_points": sweep_points,
    });
    manifest.results = summary;
    manifest.write(out, "")?;
    timings.write(out)?;
    println!(
        "calibrate: T={:.6} reaches precision {:.4} at recall {:.4} -> {}",
        calibration.threshold,
        calibration.precision,
        calibration.recall,
        out.display()
    );
    Ok(())
}

fn iterate(
    seed: u64,
    workers: usize,
    data: &Path,
    format: Option<FormatArg>,
    config_path: &Path,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("load");
    let ds = load_data(data, format, embeddings)?;
    let toml_cfg = IterateToml::load(config_path)?;
    let cfg = toml_cfg.to_core(seed)?;

    let holdout: BTreeSet<String> = match (&toml_cfg.holdout_labels, toml_cfg.holdout_count) {
        (Some(labels), None) => labels.iter().cloned().collect(),
        (None, Some(count)) => {
            let mut labels: Vec<String> = ds.labels().map(String::from).collect();
            if count == 0 || count >= labels.len() {
                return Err(CliError::config(format!(
                    "holdout_count {count} must be between 1 and {} (group count - 1)",
                    labels.len().saturating_sub(1)
                )));
            }
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            labels.shuffle(&mut rng);
            labels.into_iter().take(count).collect()
        }
        _ => unreachable!("validated at config load"),
    };
    let (train_ds, validation) = holdout_split(&ds, &holdout)?;
    let model = EmbeddingModel::identity(train_ds.dim());

    timings.stage("pipeline");
    let run = run_with_workers(workers, || {
        run_pipeline(&train_ds, &model, &validation, &cfg)
    })?;

    timings.stage("write");
    let collapsed = matches!(run.outcome, PipelineOutcome::Collapsed { .. });
    let suffix = if collapsed { ".partial" } else { "" };

    let mut manifest = RunManifest::new("iterate", seed);
    manifest.workers = Some(workers);
    manifest.input("data", data);
    manifest.input("config", config_path);
    if let Some(p) = embeddings {
        manifest.input("embeddings", p);
    }
    manifest.config = json!({
        "pipeline": serde_json::to_value(&cfg).expect("config serializes"),
        "holdout_labels": holdout.iter().collect::<Vec<_>>(),
    });

    let mut iteration_results = Vec::new();
    for r in &run.runs {
        let cleaned_name = format!("cleaned_{}.jsonl{suffix}", r.iteration);
        let head_name = format!("head_{}.json{suffix}", r.iteration);
        save_cleaned(&r.cleaned, &out.join(&cleaned_name))?;
        save_head(&r.head_snapshot, &out.join(&head_name))?;
        let trace_name = if r.trace.is_empty() {
            None
        } else {
            let name = format!("loss_trace_{}.csv{suffix}", r.iteration);
            write_loss_trace(&r.trace, &out.join(&name))?;
            Some(name)
        };
        manifest.output(&format!("cleaned_{}", r.iteration), &cleaned_name);
        manifest.output(&format!("head_{}", r.iteration), &head_name);
        if let Some(name) = &trace_name {
            manifest.output(&format!("loss_trace_{}", r.iteration), name);
        }
        iteration_results.push(json!({
            "iteration": r.iteration,
            "threshold": r.threshold,
            "precision": r.precision,
            "recall": r.recall,
            "validation_precision": r.validation_precision,
            "validation_recall": r.validation_recall,
            "kept_count": r.cleaned.kept_count(),
            "cleaned_path": cleaned_name,
            "head_path": head_name,
            "loss_trace_path": trace_name,
        }));
    }
    let outcome_json = match &run.outcome {
        PipelineOutcome::Completed => json!("completed"),
        PipelineOutcome::EarlyStopped { gain } => json!({"early_stopped": {"gain": gain}}),
        PipelineOutcome::Collapsed { iteration, message } => {
            json!({"collapsed": {"iteration": iteration, "message": message}})
        }
    };
    manifest.results = json!({
        "iterations": iteration_results,
        "outcome": outcome_json,
    });
    manifest.write(out, suffix)?;
    timings.write(out)?;

    for r in &run.runs {
        println!(
            "iterate {}: T={:.6} kept={} precision={} recall={}",
            r.iteration,
            r.threshold,
            r.cleaned.kept_count(),
            r.precision.map_or("n/a".into(), |v| format!("{v:.4}")),
            r.recall.map_or("n/a".into(), |v| format!("{v:.4}")),
        );
    }
    match &run.outcome {
        PipelineOutcome::Completed => {
            println!("iterate: completed {} iterations -> {}", run.runs.len(), out.display());
            Ok(())
        }
        PipelineOutcome::EarlyStopped { gain } => {
            println!(
                "iterate: stopped early (validation recall gain {gain:.4} below threshold) -> {}",
                out.display()
            );
            Ok(())
        }
        PipelineOutcome::Collapsed { iteration, message } => Err(CliError::numerical(format!(
            "training collapsed at pipeline iteration {iteration}: {message}; partial artifacts kept with .partial suffix"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn eval_pr(
    seed: u64,
    workers: usize,
    data: &Path,
    format: Option<FormatArg>,
    t_min: f64,
    t_max: f64,
    points: usize,
    min_group_size: usize,
    rule: RuleArg,
    head: Option<&Path>,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    if points == 0 || !t_min.is_finite() || !t_max.is_finite() || t_min > t_max {
        return Err(CliError::config(format!(
            "bad sweep: t_min={t_min} t_max={t_max} points={points}"
        )));
    }
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("load");
    let ds = load_data(data, format, embeddings)?;
    let model = build_model(&ds, head)?;
    let params = CleanParams::new(1.0, min_group_size, rule.into())?;
    let thresholds: Vec<f64> = if points == 1 {
        vec![t_min]
    } else {
        (0..points)
            .map(|i| t_min + (t_max - t_min) * i as f64 / (points - 1) as f64)
            .collect()
    };

    timings.stage("sweep");
    let curve = run_with_workers(workers, || pr_curve(&ds, &model, &params, &thresholds))?;

    timings.stage("write");
    write_pr_csv(&curve, &out.join("pr_curve.csv"))?;

    let mut manifest = RunManifest::new("eval-pr", seed);
    manifest.workers = Some(workers);
    manifest.input("data", data);
    if let Some(p) = head {
        manifest.input("head", p);
    }
    if let Some(p) = embeddings {
        manifest.input("embeddings", p);
    }
    manifest.output("pr_curve", "pr_curve.csv");
    manifest.config = json!({
        "t_min": t_min,
        "t_max": t_max,
        "points": points,
        "min_group_size": min_group_size,
        "component_rule": params.component_rule,
    });
    manifest.results = json!({
        "points": curve.len(),
        "max_recall": curve.iter().filter_map(|p| p.recall).fold(0.0f64, f64::max),
    });
    manifest.write(out, "")?;
    timings.write(out)?;
    println!("eval-pr: {} curve points -> {}", curve.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval_verify(
    seed: u64,
    data: &Path,
    format: Option<FormatArg>,
    n_pos: usize,
    n_neg: usize,
    head: Option<&Path>,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    prepare_out(out)?;
    let mut timings = Timings::new();
    timings.stage("load");
    let ds = load_data(data, format, embeddings)?;
    let model = build_model(&ds, head)?;

    timings.stage("verify");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = make_pairs(&ds, n_pos, n_neg, &mut rng)?;
    let report = verification_accuracy(&ds, &pairs, &model, seed)?;

    timings.stage("write");
    save_verification_report(&report, &out.join("verification.json"))?;

    let mut manifest = RunManifest::new("eval-verify", seed);
    manifest.input("data", data);
    if let Some(p) = head {
        manifest.input("head", p);
    }
    if let Some(p) = embeddings {
        manifest.input("embeddings", p);
    }
    manifest.output("verification", "verification.json");
    manifest.config = json!({"n_pos": n_pos, "n_neg": n_neg});
    manifest.results = json!({
        "mean_accuracy": report.mean_accuracy,
        "folds": report.fold_accuracies.len(),
    });
    manifest.write(out, "")?;
    timings.write(out)?;
    println!(
        "eval-verify: mean accuracy {:.4} over {} folds -> {}",
        report.mean_accuracy,
        report.fold_accuracies.len(),
        out.display()
    );
    Ok(())
}
