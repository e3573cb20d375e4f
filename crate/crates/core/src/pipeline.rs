//! The iterative clean → train → re-clean loop, with per-iteration threshold
//! calibration against a labeled validation subset held out from training.
//!
//! Each iteration recalibrates the threshold at a fixed target precision
//! rather than reusing a fixed T: training changes the embedding scale, and
//! comparing models at fixed precision is what makes recall gains
//! meaningful. Re-filtering always applies to the original dataset, never to
//! the previous cleaned subset, so recall can grow.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{CleanedDataset, WeakDataset};
use crate::embed::{pca_fit, EmbeddingModel};
use crate::error::{Error, Result};
use crate::graph::{clean_dataset, dataset_distances, CleanParams};
use crate::metrics::{precision_recall, PrPoint};
use crate::triplet::{train_head, TracePoint, TrainConfig};

/// Default PCA target dimension: min(32, head output dim).
const DEFAULT_PCA_CAP: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    /// Number of filtering passes (the first one uses the base model as-is).
    pub max_iterations: usize,
    /// Calibration target: the largest threshold whose validation precision
    /// still reaches this value is used for filtering.
    pub target_precision: f64,
    /// Early stop: before iteration k ≥ 2, stop when the validation recall
    /// gain of iteration k−1 over k−2 fell below this value (iteration 0
    /// counts as recall 0).
    pub min_recall_gain: f64,
    /// Filtering parameters; the threshold field is recalibrated each
    /// iteration.
    pub clean_params: CleanParams,
    pub train_config: TrainConfig,
    /// Refit PCA on each trained model's cleaned-set head outputs.
    pub refit_pca: bool,
    /// PCA target dimension; None picks min(32, head output dim).
    pub pca_dim: Option<usize>,
    /// Use post-PCA embeddings for graph filtering when a PCA is fitted.
    pub filter_with_pca: bool,
    /// Number of candidate thresholds in the calibration sweep.
    pub sweep_points: usize,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            max_iterations: 2,
            target_precision: 0.99,
            min_recall_gain: 0.0,
            clean_params: CleanParams::default(),
            train_config: TrainConfig::default(),
            refit_pca: true,
            pca_dim: None,
            filter_with_pca: true,
            sweep_points: 64,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        validate_target_precision(self.target_precision)?;
        if !(self.min_recall_gain.is_finite() && self.min_recall_gain >= 0.0) {
            return Err(Error::InvalidConfig(
                "min_recall_gain must be non-negative".into(),
            ));
        }
        if self.sweep_points < 2 {
            return Err(Error::InvalidConfig("sweep_points must be >= 2".into()));
        }
        self.train_config.validate()
    }
}

fn validate_target_precision(target: f64) -> Result<()> {
    if !(target.is_finite() && target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target_precision {target} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Outcome of a threshold calibration sweep.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub threshold: f64,
    /// Validation precision and recall at the chosen threshold.
    pub precision: f64,
    pub recall: f64,
    pub curve: Vec<PrPoint>,
}

/// Sweep candidate thresholds over the observed intra-group distance range
/// of the validation set and return the largest threshold whose measured
/// precision reaches the target, together with the full PR curve.
pub fn calibrate_threshold(
    model: &EmbeddingModel,
    validation: &WeakDataset,
    target_precision: f64,
    params: &CleanParams,
    sweep_points: usize,
) -> Result<Calibration> {
    validate_target_precision(target_precision)?;
    if !validation.fully_truth_labeled() {
        return Err(Error::InsufficientData(
            "calibration needs ground truth for every validation record".into(),
        ));
    }
    let caches = dataset_distances(validation, model)?;
    let lo = caches
        .iter()
        .filter_map(|c| c.min_distance())
        .fold(f64::INFINITY, f64::min);
    let hi = caches
        .iter()
        .filter_map(|c| c.max_distance())
        .fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InsufficientData(
            "validation groups have no intra-group pairs to sweep".into(),
        ));
    }

    let thresholds: Vec<f64> = if hi > lo {
        (0..sweep_points)
            .map(|i| lo + (hi - lo) * i as f64 / (sweep_points - 1) as f64)
            .collect()
    } else {
        vec![hi]
    };

    let mut curve = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let cleaned = crate::graph::clean_cached(&caches, &params.with_threshold(t));
        let (precision, recall) = precision_recall(&cleaned, validation)?;
        curve.push(PrPoint {
            threshold: t,
            precision,
            recall,
            kept_count: cleaned.kept_count(),
        });
    }

    match curve
        .iter()
        .rev()
        .find(|p| p.precision.is_some_and(|v| v >= target_precision))
    {
        Some(point) => Ok(Calibration {
            threshold: point.threshold,
            precision: point.precision.expect("selected point has precision"),
            recall: point
                .recall
                .expect("a point meeting a positive precision target has recall"),
            curve,
        }),
        None => {
            let best = curve
                .iter()
                .max_by(|a, b| {
                    let pa = a.precision.unwrap_or(f64::NEG_INFINITY);
                    let pb = b.precision.unwrap_or(f64::NEG_INFINITY);
                    pa.partial_cmp(&pb).expect("precisions are not NaN")
                })
                .expect("curve is non-empty");
            Err(Error::CalibrationFailed {
                target: target_precision,
                best_precision: best.precision.unwrap_or(0.0),
                best_threshold: best.threshold,
            })
        }
    }
}

/// One pipeline iteration's outputs.
#[derive(Debug, Clone)]
pub struct CleanRun {
    pub iteration: u32,
    pub cleaned: CleanedDataset,
    pub head_snapshot: DMatrix<f64>,
    /// Precision/recall against the dataset's own ground truth, when every
    /// record carries one.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub threshold: f64,
    /// Metrics of the calibrated point on the validation set.
    pub validation_precision: f64,
    pub validation_recall: f64,
    /// Loss trace of the training step that produced this iteration's model
    /// (empty for the first iteration).
    pub trace: Vec<TracePoint>,
}

/// How a pipeline run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineOutcome {
    Completed,
    /// Validation recall gain fell below `min_recall_gain`.
    EarlyStopped { gain: f64 },
    /// Training collapsed; the runs produced so far are preserved.
    Collapsed { iteration: u32, message: String },
}

#[derive(Debug)]
pub struct PipelineRun {
    pub runs: Vec<CleanRun>,
    pub outcome: PipelineOutcome,
    /// The model of the last executed iteration (head plus any refitted PCA).
    pub final_model: EmbeddingModel,
}

/// Run the iterative cleaning pipeline.
///
/// Iteration 1 filters `ds` with the base model at a calibrated threshold.
/// Every further iteration trains the head on the previous cleaned subset,
/// optionally refits PCA on that subset, recalibrates the threshold at the
/// same target precision, and re-filters the original `ds`. Training seeds
/// derive from `train_config.seed` plus the iteration number.
pub fn run_pipeline(
    ds: &WeakDataset,
    base_model: &EmbeddingModel,
    validation: &WeakDataset,
    cfg: &IterationConfig,
) -> Result<PipelineRun> {
    cfg.validate()?;
    if let Some(overlap) = ds.labels().find(|l| validation.groups().contains_key(*l)) {
        return Err(Error::InvalidConfig(format!(
            "validation label {overlap:?} also appears in the training dataset; hold out validation subjects first"
        )));
    }
    if !validation.fully_truth_labeled() {
        return Err(Error::InsufficientData(
            "validation needs ground truth for every record".into(),
        ));
    }
    let ds_has_truth = ds.fully_truth_labeled();

    let mut model = base_model.clone();
    let mut runs: Vec<CleanRun> = Vec::new();
    let mut outcome = PipelineOutcome::Completed;

    for iteration in 1..=cfg.max_iterations {
        let mut trace = Vec::new();
        if iteration > 1 {
            let prev = runs[iteration - 2].validation_recall;
            let before = if iteration > 2 {
                runs[iteration - 3].validation_recall
            } else {
                0.0
            };
            let gain = prev - before;
            if gain < cfg.min_recall_gain {
                outcome = PipelineOutcome::EarlyStopped { gain };
                break;
            }

            // iterations == 0 is an identity pass: the model (head and any
            // PCA) must stay exactly as-is so re-filtering reproduces the
            // previous iteration.
            if cfg.train_config.iterations > 0 {
                let kept_ids = runs[iteration - 2].cleaned.kept_ids();
                let train_ds = ds.restrict_to(&kept_ids)?;
                let train_cfg = TrainConfig {
                    seed: cfg.train_config.seed.wrapping_add(iteration as u64),
                    ..cfg.train_config.clone()
                };
                let trained = match train_head(&train_ds, &model.without_pca(), &train_cfg) {
                    Ok(out) => out,
                    Err(err @ Error::TrainingCollapse { .. }) => {
                        outcome = PipelineOutcome::Collapsed {
                            iteration: iteration as u32,
                            message: err.to_string(),
                        };
                        break;
                    }
                    Err(other) => return Err(other),
                };
                trace = trained.trace;
                model = trained.model;
                if cfg.refit_pca {
                    model = model.with_pca(Some(refit_pca(&model, &train_ds, cfg.pca_dim)?))?;
                }
            }
        }

        let filter_model = if cfg.filter_with_pca {
            model.clone()
        } else {
            model.without_pca()
        };
        let calibration = calibrate_threshold(
            &filter_model,
            validation,
            cfg.target_precision,
            &cfg.clean_params,
            cfg.sweep_points,
        )?;
        let params = cfg.clean_params.with_threshold(calibration.threshold);
        let mut cleaned = clean_dataset(ds, &filter_model, &params)?;
        cleaned.iteration = iteration as u32;
        let (precision, recall) = if ds_has_truth {
            precision_recall(&cleaned, ds)?
        } else {
            (None, None)
        };
        runs.push(CleanRun {
            iteration: iteration as u32,
            cleaned,
            head_snapshot: model.head().clone(),
            precision,
            recall,
            threshold: calibration.threshold,
            validation_precision: calibration.precision,
            validation_recall: calibration.recall,
            trace,
        });
    }

    Ok(PipelineRun {
        runs,
        outcome,
        final_model: model,
    })
}

/// Fit PCA on the head outputs of the cleaned training subset.
fn refit_pca(
    model: &EmbeddingModel,
    train_ds: &WeakDataset,
    pca_dim: Option<usize>,
) -> Result<crate::embed::PcaTransform> {
    let outputs: Vec<DVector<f64>> = train_ds
        .records()
        .iter()
        .map(|r| model.head_output(r))
        .collect::<Result<_>>()?;
    if outputs.len() < 2 {
        return Err(Error::InsufficientData(
            "pca refit needs at least 2 cleaned records".into(),
        ));
    }
    let e = outputs[0].len();
    let m = outputs.len();
    let mut data = DMatrix::zeros(m, e);
    for (i, v) in outputs.iter().enumerate() {
        data.set_row(i, &v.transpose());
    }
    let k = match pca_dim {
        Some(k) => k,
        None => DEFAULT_PCA_CAP.min(e).min(m),
    };
    pca_fit(&data, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{holdout_split, FaceRecord, RecordId};
    use crate::graph::ComponentRule;
    use crate::synth::{generate, SynthConfig};
    use crate::triplet::SamplingPolicy;
    use std::collections::BTreeSet;

    fn rec(id: u64, weak: &str, truth: &str, angle: f64) -> FaceRecord {
        FaceRecord {
            record_id: RecordId(id),
            weak_label: weak.into(),
            features: vec![angle.cos(), angle.sin()],
            truth_label: Some(truth.into()),
        }
    }

    /// One group: two tight sub-chains with a 0.4 rad gap, plus one
    /// mislabeled record 0.29 rad below the first chain. The staged gaps
    /// create three precision/recall regimes across thresholds.
    fn staged_validation() -> WeakDataset {
        let mut records = Vec::new();
        let mut id = 0;
        for i in 0..150 {
            records.push(rec(id, "v", "v", i as f64 * 0.001));
            id += 1;
        }
        for i in 0..150 {
            records.push(rec(id, "v", "v", 0.55 + i as f64 * 0.001));
            id += 1;
        }
        records.push(rec(id, "v", "other", -0.29));
        WeakDataset::new(records, 2).unwrap()
    }

    fn default_params() -> CleanParams {
        CleanParams::new(0.2, 2, ComponentRule::Anchor).unwrap()
    }

    #[test]
    fn calibration_picks_largest_threshold_meeting_target() {
        let ds = staged_validation();
        let model = crate::embed::EmbeddingModel::identity(2);
        let calib = calibrate_threshold(&model, &ds, 0.99, &default_params(), 128).unwrap();
        // At precision ≥ 0.99 the whole group can be kept (precision
        // 300/301 ≈ 0.9967): recall 1.
        assert!(calib.precision >= 0.99);
        assert_eq!(calib.recall, 1.0);
        assert!(calib.threshold > 0.39, "threshold {}", calib.threshold);

        let strict = calibrate_threshold(&model, &ds, 0.999, &default_params(), 128).unwrap();
        // Precision ≥ 0.999 forces the contaminant out, which also keeps the
        // far sub-chain out: recall 0.5 at precision 1.
        assert_eq!(strict.precision, 1.0);
        assert_eq!(strict.recall, 0.5);
        assert!(strict.threshold < calib.threshold);
    }

    #[test]
    fn perfectly_separated_clusters_calibrate_into_the_gap() {
        // Genuine chain with chords ≤ 0.18, one mislabeled record at chord
        // ≈ 1.13: every threshold in the gap achieves precision 1.0 and the
        // calibration returns the largest one.
        let mut records: Vec<FaceRecord> =
            (0..10).map(|i| rec(i, "v", "v", i as f64 * 0.02)).collect();
        records.push(rec(10, "v", "other", 1.2));
        let ds = WeakDataset::new(records, 2).unwrap();
        let model = crate::embed::EmbeddingModel::identity(2);
        let calib = calibrate_threshold(&model, &ds, 1.0, &default_params(), 64).unwrap();
        assert_eq!(calib.precision, 1.0);
        assert_eq!(calib.recall, 1.0);
        let intra_max = 2.0 * ((9.0 * 0.02) / 2.0_f64).sin();
        let gap = 2.0 * ((1.2 - 0.18) / 2.0_f64).sin();
        assert!(calib.threshold > intra_max, "T={} too small", calib.threshold);
        assert!(calib.threshold < gap, "T={} crossed the gap", calib.threshold);
    }

    #[test]
    fn recall_at_looser_precision_target_is_at_least_as_high() {
        let ds = staged_validation();
        let model = crate::embed::EmbeddingModel::identity(2);
        let loose = calibrate_threshold(&model, &ds, 0.99, &default_params(), 128).unwrap();
        let strict = calibrate_threshold(&model, &ds, 0.999, &default_params(), 128).unwrap();
        assert!(loose.recall >= strict.recall);
    }

    #[test]
    fn degenerate_precision_targets_are_rejected() {
        let ds = staged_validation();
        let model = crate::embed::EmbeddingModel::identity(2);
        for bad in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(
                calibrate_threshold(&model, &ds, bad, &default_params(), 16).unwrap_err(),
                Error::InvalidConfig(_)
            ));
        }
    }

    #[test]
    fn unreachable_target_reports_best_achievable() {
        // Two records, the lower id mislabeled: the anchor is always wrong,
        // so precision never exceeds 0.5.
        let records = vec![rec(0, "v", "other", 0.0), rec(1, "v", "v", 0.4)];
        let ds = WeakDataset::new(records, 2).unwrap();
        let model = crate::embed::EmbeddingModel::identity(2);
        let err = calibrate_threshold(&model, &ds, 0.9, &default_params(), 16).unwrap_err();
        match err {
            Error::CalibrationFailed {
                target,
                best_precision,
                ..
            } => {
                assert_eq!(target, 0.9);
                assert!(best_precision <= 0.5);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    /// Small synthetic benchmark split into train and validation parts. The
    /// wide walk step keeps identity clusters hard enough that cleaning at a
    /// strict precision target cannot reach full recall.
    fn small_benchmark() -> (WeakDataset, WeakDataset, SynthConfig) {
        let cfg = SynthConfig {
            n_identities: 12,
            group_size_range: (18, 30),
            latent_dim: 4,
            walk_step: 0.2,
            noise_sigma: 0.01,
            seed: 21,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let holdout: BTreeSet<String> = out
            .dataset
            .labels()
            .take(3)
            .map(String::from)
            .collect();
        let (train, validation) = holdout_split(&out.dataset, &holdout).unwrap();
        (train, validation, cfg)
    }

    fn quick_config() -> IterationConfig {
        IterationConfig {
            max_iterations: 2,
            target_precision: 0.95,
            clean_params: CleanParams::new(0.2, 2, ComponentRule::Anchor).unwrap(),
            train_config: TrainConfig {
                iterations: 40,
                identities_per_batch: 4,
                images_per_identity: 4,
                learning_rate: 0.05,
                policy: SamplingPolicy::Dense,
                ..TrainConfig::default()
            },
            sweep_points: 32,
            ..IterationConfig::default()
        }
    }

    #[test]
    fn single_iteration_reduces_to_one_shot_cleaning() {
        let (train, validation, cfg_synth) = small_benchmark();
        let model = crate::embed::EmbeddingModel::identity(cfg_synth.latent_dim);
        let cfg = IterationConfig {
            max_iterations: 1,
            ..quick_config()
        };
        let run = run_pipeline(&train, &model, &validation, &cfg).unwrap();
        assert_eq!(run.runs.len(), 1);
        assert_eq!(run.outcome, PipelineOutcome::Completed);

        let direct = clean_dataset(
            &train,
            &model,
            &cfg.clean_params.with_threshold(run.runs[0].threshold),
        )
        .unwrap();
        assert_eq!(run.runs[0].cleaned.kept, direct.kept);
        assert!(run.runs[0].precision.is_some());
    }

    #[test]
    fn zero_training_iterations_reproduce_the_first_pass() {
        let (train, validation, cfg_synth) = small_benchmark();
        let model = crate::embed::EmbeddingModel::identity(cfg_synth.latent_dim);
        let cfg = IterationConfig {
            train_config: TrainConfig {
                iterations: 0,
                ..quick_config().train_config
            },
            ..quick_config()
        };
        let run = run_pipeline(&train, &model, &validation, &cfg).unwrap();
        assert_eq!(run.runs.len(), 2);
        assert_eq!(run.runs[0].cleaned.kept, run.runs[1].cleaned.kept);
        assert_eq!(run.runs[0].threshold, run.runs[1].threshold);
    }

    #[test]
    fn impossible_recall_gain_stops_after_one_iteration() {
        let (train, validation, cfg_synth) = small_benchmark();
        let model = crate::embed::EmbeddingModel::identity(cfg_synth.latent_dim);
        // A strict precision target keeps the first validation recall below
        // 1, so a required gain of 1.0 can never be met.
        let cfg = IterationConfig {
            min_recall_gain: 1.0,
            target_precision: 0.999,
            ..quick_config()
        };
        let run = run_pipeline(&train, &model, &validation, &cfg).unwrap();
        assert!(run.runs[0].validation_recall < 1.0);
        assert_eq!(run.runs.len(), 1);
        assert!(matches!(run.outcome, PipelineOutcome::EarlyStopped { .. }));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let (train, validation, cfg_synth) = small_benchmark();
        let model = crate::embed::EmbeddingModel::identity(cfg_synth.latent_dim);
        let cfg = quick_config();
        let a = run_pipeline(&train, &model, &validation, &cfg).unwrap();
        let b = run_pipeline(&train, &model, &validation, &cfg).unwrap();
        assert_eq!(a.runs.len(), b.runs.len());
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.cleaned.kept, rb.cleaned.kept);
            assert_eq!(ra.threshold, rb.threshold);
            assert_eq!(ra.head_snapshot, rb.head_snapshot);
        }
    }

    #[test]
    fn training_collapse_preserves_the_first_run() {
        let (train, validation, cfg_synth) = small_benchmark();
        let model = crate::embed::EmbeddingModel::identity(cfg_synth.latent_dim);
        let cfg = IterationConfig {
            train_config: TrainConfig {
                learning_rate: 1e200,
                ..quick_config().train_config
            },
            ..quick_config()
        };
        let run = run_pipeline(&train, &model, &validation, &cfg).unwrap();
        assert_eq!(run.runs.len(), 1);
        assert!(matches!(
            run.outcome,
            PipelineOutcome::Collapsed { iteration: 2, .. }
        ));
    }

    #[test]
    fn overlapping_validation_labels_are_rejected() {
        let (train, _, cfg_synth) = small_benchmark();
        let model = crate::embed::EmbeddingModel::identity(cfg_synth.latent_dim);
        let err = run_pipeline(&train, &model, &train, &quick_config()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
