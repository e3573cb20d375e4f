//! Cleaning quality metrics — precision and recall of kept sets against
//! ground truth, PR curves over threshold sweeps, and the pair-verification
//! accuracy protocol with cross-validated thresholds.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{CleanedDataset, RecordId, WeakDataset};
use crate::embed::{distance, EmbeddingModel};
use crate::error::{Error, Result};
use crate::graph::{clean_cached, dataset_distances, CleanParams};

/// One point of a precision-recall curve. `precision` is absent when the
/// kept set is empty, `recall` when the dataset has no correctly labeled
/// record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub kept_count: usize,
}

/// A ground-truth verification pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationPair {
    pub a: RecordId,
    pub b: RecordId,
    pub same: bool,
}

/// Precision and recall of a cleaned subset against ground truth.
///
/// A kept record is correct iff its truth label equals its weak label.
/// precision = correct-kept / kept; recall = correct-kept / correct-in-ds,
/// both over the labels of `ds` only.
pub fn precision_recall(
    cleaned: &CleanedDataset,
    ds: &WeakDataset,
) -> Result<(Option<f64>, Option<f64>)> {
    let mut kept_total = 0usize;
    let mut correct_kept = 0usize;
    for (label, ids) in &cleaned.kept {
        if !ds.groups().contains_key(label) {
            return Err(Error::UnknownLabel(label.clone()));
        }
        for id in ids {
            let rec = ds
                .record(*id)
                .ok_or_else(|| Error::InsufficientData(format!("kept record {id} not in dataset")))?;
            kept_total += 1;
            match rec.is_correctly_labeled() {
                Some(true) => correct_kept += 1,
                Some(false) => {}
                None => {
                    return Err(Error::InsufficientData(format!(
                        "record {id} has no truth label"
                    )))
                }
            }
        }
    }
    let mut correct_total = 0usize;
    for rec in ds.records() {
        match rec.is_correctly_labeled() {
            Some(true) => correct_total += 1,
            Some(false) => {}
            None => {
                return Err(Error::InsufficientData(format!(
                    "record {} has no truth label",
                    rec.record_id
                )))
            }
        }
    }
    let precision = (kept_total > 0).then(|| correct_kept as f64 / kept_total as f64);
    let recall = (correct_total > 0).then(|| correct_kept as f64 / correct_total as f64);
    Ok((precision, recall))
}

/// Clean the dataset at each threshold and measure precision/recall.
/// Thresholds must be sorted ascending; per-group distances are computed
/// once and shared across the sweep.
pub fn pr_curve(
    ds: &WeakDataset,
    model: &EmbeddingModel,
    params: &CleanParams,
    thresholds: &[f64],
) -> Result<Vec<PrPoint>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig(
            "thresholds must be sorted ascending".into(),
        ));
    }
    let caches = dataset_distances(ds, model)?;
    thresholds
        .iter()
        .map(|&t| {
            let cleaned = clean_cached(&caches, &params.with_threshold(t));
            let (precision, recall) = precision_recall(&cleaned, ds)?;
            Ok(PrPoint {
                threshold: t,
                precision,
                recall,
                kept_count: cleaned.kept_count(),
            })
        })
        .collect()
}

/// Sample verification pairs from a ground-truth dataset: `n_pos` pairs of
/// records sharing a truth identity and `n_neg` pairs across identities,
/// without replacement, deterministic given the rng state.
pub fn make_pairs(
    eval_ds: &WeakDataset,
    n_pos: usize,
    n_neg: usize,
    rng: &mut impl Rng,
) -> Result<Vec<VerificationPair>> {
    let mut by_truth: BTreeMap<&str, Vec<RecordId>> = BTreeMap::new();
    for rec in eval_ds.records() {
        let truth = rec.truth_label.as_deref().ok_or_else(|| {
            Error::InsufficientData(format!("record {} has no truth label", rec.record_id))
        })?;
        by_truth.entry(truth).or_default().push(rec.record_id);
    }
    if by_truth.len() < 2 || by_truth.values().all(|v| v.len() < 2) {
        return Err(Error::InsufficientData(
            "pair sampling needs >= 2 truth identities and one with >= 2 records".into(),
        ));
    }
    for ids in by_truth.values_mut() {
        ids.sort_unstable();
    }

    let mut positives = Vec::new();
    for ids in by_truth.values() {
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                positives.push((ids[i], ids[j]));
            }
        }
    }
    let groups: Vec<&Vec<RecordId>> = by_truth.values().collect();
    let mut negatives = Vec::new();
    for gi in 0..groups.len() {
        for gj in (gi + 1)..groups.len() {
            for &a in groups[gi] {
                for &b in groups[gj] {
                    negatives.push((a, b));
                }
            }
        }
    }

    if n_pos > positives.len() {
        return Err(Error::InsufficientPairs {
            kind: "positive",
            requested: n_pos,
            available: positives.len(),
        });
    }
    if n_neg > negatives.len() {
        return Err(Error::InsufficientPairs {
            kind: "negative",
            requested: n_neg,
            available: negatives.len(),
        });
    }

    use rand::seq::SliceRandom;
    positives.shuffle(rng);
    negatives.shuffle(rng);
    let mut out = Vec::with_capacity(n_pos + n_neg);
    out.extend(positives[..n_pos].iter().map(|&(a, b)| VerificationPair {
        a,
        b,
        same: true,
    }));
    out.extend(negatives[..n_neg].iter().map(|&(a, b)| VerificationPair {
        a,
        b,
        same: false,
    }));
    Ok(out)
}

/// Result of the cross-validated verification protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub fold_thresholds: Vec<f64>,
}

/// 10-fold cross-validated pair accuracy: folds are seeded and stratified by
/// same/different; for each fold the distance threshold maximizing accuracy
/// on the other nine folds is applied to the held-out fold.
pub fn verification_accuracy(
    ds: &WeakDataset,
    pairs: &[VerificationPair],
    model: &EmbeddingModel,
    seed: u64,
) -> Result<VerificationReport> {
    if pairs.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "verification needs >= 10 pairs, got {}",
            pairs.len()
        )));
    }
    let mut embeddings: HashMap<RecordId, nalgebra::DVector<f64>> = HashMap::new();
    for pair in pairs {
        for id in [pair.a, pair.b] {
            if !embeddings.contains_key(&id) {
                let rec = ds.record(id).ok_or_else(|| {
                    Error::InsufficientData(format!("pair record {id} not in dataset"))
                })?;
                embeddings.insert(id, model.embed(rec)?);
            }
        }
    }
    let scored: Vec<(f64, bool)> = pairs
        .iter()
        .map(|p| Ok((distance(&embeddings[&p.a], &embeddings[&p.b])?, p.same)))
        .collect::<Result<_>>()?;
    Ok(cross_validated_accuracy(&scored, 10, seed))
}

/// Cross-validated accuracy over (distance, same?) scores. Decisions depend
/// only on the distance order, so the result is invariant under strictly
/// monotone transforms of the distances.
pub fn cross_validated_accuracy(
    scored: &[(f64, bool)],
    n_folds: usize,
    seed: u64,
) -> VerificationReport {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut same_idx: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].1).collect();
    let mut diff_idx: Vec<usize> = (0..scored.len()).filter(|&i| !scored[i].1).collect();
    same_idx.shuffle(&mut rng);
    diff_idx.shuffle(&mut rng);

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (pos, &i) in same_idx.iter().enumerate() {
        folds[pos % n_folds].push(i);
    }
    for (pos, &i) in diff_idx.iter().enumerate() {
        folds[pos % n_folds].push(i);
    }

    let mut fold_accuracies = Vec::new();
    let mut fold_thresholds = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            continue;
        }
        let train: Vec<(f64, bool)> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idxs)| idxs.iter().map(|&i| scored[i]))
            .collect();
        let threshold = best_threshold(&train);
        let correct = fold
            .iter()
            .filter(|&&i| {
                let (d, same) = scored[i];
                (d < threshold) == same
            })
            .count();
        fold_accuracies.push(correct as f64 / fold.len() as f64);
        fold_thresholds.push(threshold);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    VerificationReport {
        mean_accuracy,
        fold_accuracies,
        fold_thresholds,
    }
}

/// Threshold maximizing accuracy of "same iff distance < t" on the given
/// scores. Candidates are the midpoints of consecutive distinct sorted
/// distances plus one point below and above the range; the largest
/// maximizer wins ties.
fn best_threshold(scored: &[(f64, bool)]) -> f64 {
    debug_assert!(!scored.is_empty());
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("distances are finite"));
    let n = sorted.len();
    let n_diff = sorted.iter().filter(|(_, same)| !same).count();

    // Below the minimum everything is predicted "different".
    let mut correct = n_diff as isize;
    let mut best = (correct, sorted[0].0 - 1.0);
    let mut i = 0;
    while i < n {
        // Advance over the block of equal distances.
        let d = sorted[i].0;
        while i < n && sorted[i].0 == d {
            correct += if sorted[i].1 { 1 } else { -1 };
            i += 1;
        }
        let candidate = if i < n {
            (d + sorted[i].0) / 2.0
        } else {
            d + 1.0
        };
        if correct >= best.0 {
            best = (correct, candidate);
        }
    }
    best.1
}

/// Write a PR curve as CSV with columns threshold, precision, recall,
/// kept_count. Undefined values become empty fields.
pub fn write_pr_csv(points: &[PrPoint], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["threshold", "precision", "recall", "kept_count"])
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    for p in points {
        w.write_record([
            p.threshold.to_string(),
            p.precision.map(|v| v.to_string()).unwrap_or_default(),
            p.recall.map(|v| v.to_string()).unwrap_or_default(),
            p.kept_count.to_string(),
        ])
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write a verification report as pretty JSON.
pub fn save_verification_report(report: &VerificationReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    use std::io::Write as _;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FaceRecord;
    use crate::graph::ComponentRule;
    use std::collections::BTreeSet;

    fn rec(id: u64, weak: &str, truth: &str, features: Vec<f64>) -> FaceRecord {
        FaceRecord {
            record_id: RecordId(id),
            weak_label: weak.into(),
            features,
            truth_label: Some(truth.into()),
        }
    }

    fn cleaned(entries: &[(&str, &[u64])]) -> CleanedDataset {
        let mut kept = BTreeMap::new();
        for (label, ids) in entries {
            kept.insert(
                label.to_string(),
                ids.iter().map(|&i| RecordId(i)).collect::<BTreeSet<_>>(),
            );
        }
        CleanedDataset {
            kept,
            iteration: 1,
            threshold_used: 0.5,
        }
    }

    /// One group "a" with 6 correct and 2 wrong records.
    fn hand_dataset() -> WeakDataset {
        let mut records = Vec::new();
        for i in 0..6 {
            records.push(rec(i, "a", "a", vec![i as f64, 0.5]));
        }
        records.push(rec(6, "a", "z", vec![6.0, 0.5]));
        records.push(rec(7, "a", "y", vec![7.0, 0.5]));
        WeakDataset::new(records, 2).unwrap()
    }

    #[test]
    fn precision_recall_hand_count() {
        // Kept 4 of which 3 correct; 6 correct in total → (0.75, 0.5).
        let ds = hand_dataset();
        let c = cleaned(&[("a", &[0, 1, 2, 6])]);
        let (p, r) = precision_recall(&c, &ds).unwrap();
        assert_eq!(p, Some(0.75));
        assert_eq!(r, Some(0.5));
    }

    #[test]
    fn perfect_cleaning_scores_one() {
        let ds = hand_dataset();
        let c = cleaned(&[("a", &[0, 1, 2, 3, 4, 5])]);
        let (p, r) = precision_recall(&c, &ds).unwrap();
        assert_eq!(p, Some(1.0));
        assert_eq!(r, Some(1.0));
    }

    #[test]
    fn empty_kept_has_undefined_precision() {
        let ds = hand_dataset();
        let c = cleaned(&[]);
        let (p, r) = precision_recall(&c, &ds).unwrap();
        assert_eq!(p, None);
        assert_eq!(r, Some(0.0));
    }

    #[test]
    fn zero_correct_dataset_has_undefined_recall() {
        let records = vec![
            rec(0, "a", "x", vec![0.0, 1.0]),
            rec(1, "a", "y", vec![1.0, 0.0]),
        ];
        let ds = WeakDataset::new(records, 2).unwrap();
        let c = cleaned(&[("a", &[0])]);
        let (p, r) = precision_recall(&c, &ds).unwrap();
        assert_eq!(p, Some(0.0));
        assert_eq!(r, None);
    }

    #[test]
    fn missing_truth_label_is_an_error() {
        let records = vec![FaceRecord {
            record_id: RecordId(0),
            weak_label: "a".into(),
            features: vec![1.0],
            truth_label: None,
        }];
        let ds = WeakDataset::new(records, 1).unwrap();
        let c = cleaned(&[("a", &[0])]);
        assert!(precision_recall(&c, &ds).is_err());
    }

    /// Three groups of unit-circle points at distinct angular clusters.
    /// Group cluster centers are far apart; intra-cluster chords ≈ 0.06.
    fn three_group_dataset() -> WeakDataset {
        let mut records = Vec::new();
        let mut id = 0;
        // Group "a": anchor (lowest id) correct.
        for (i, truth) in ["a", "a", "z"].iter().enumerate() {
            let angle = 0.0 + i as f64 * 0.06;
            records.push(rec(id, "a", truth, vec![angle.cos(), angle.sin()]));
            id += 1;
        }
        // Group "b": lowest id is mislabeled.
        for (i, truth) in ["z", "b", "b"].iter().enumerate() {
            let angle = 2.0 + i as f64 * 0.06;
            records.push(rec(id, "b", truth, vec![angle.cos(), angle.sin()]));
            id += 1;
        }
        // Group "c": anchor correct.
        for (i, truth) in ["c", "c", "c"].iter().enumerate() {
            let angle = 4.0 + i as f64 * 0.06;
            records.push(rec(id, "c", truth, vec![angle.cos(), angle.sin()]));
            id += 1;
        }
        WeakDataset::new(records, 2).unwrap()
    }

    #[test]
    fn curve_below_min_distance_keeps_anchors_only() {
        // With no edges every node is isolated and the anchor is the lowest
        // record id of the group. Groups "a" and "c" have correct anchors,
        // "b" does not: precision 2/3, recall 2/7.
        let ds = three_group_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.5, 2, ComponentRule::Anchor).unwrap();
        let curve = pr_curve(&ds, &model, &params, &[1e-6]).unwrap();
        assert_eq!(curve[0].kept_count, 3);
        assert_eq!(curve[0].precision, Some(2.0 / 3.0));
        assert_eq!(curve[0].recall, Some(2.0 / 7.0));
    }

    #[test]
    fn curve_at_max_threshold_keeps_everything() {
        let ds = three_group_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.5, 2, ComponentRule::Anchor).unwrap();
        let curve = pr_curve(&ds, &model, &params, &[2.01]).unwrap();
        assert_eq!(curve[0].kept_count, 9);
        assert_eq!(curve[0].precision, Some(7.0 / 9.0));
        assert_eq!(curve[0].recall, Some(1.0));
    }

    #[test]
    fn pr_points_have_count_consistent_precision() {
        let ds = three_group_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.5, 2, ComponentRule::Anchor).unwrap();
        let ts: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
        for p in pr_curve(&ds, &model, &params, &ts).unwrap() {
            if let Some(prec) = p.precision {
                let product = prec * p.kept_count as f64;
                assert!((product - product.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curve_rejects_unsorted_thresholds() {
        let ds = three_group_dataset();
        let model = EmbeddingModel::identity(2);
        let params = CleanParams::new(0.5, 2, ComponentRule::Anchor).unwrap();
        assert!(pr_curve(&ds, &model, &params, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn kept_sets_nest_across_thresholds_on_clustered_data() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..30 {
            let mut records = Vec::new();
            let mut id = 0;
            for g in 0..4 {
                let center = g as f64 * 1.5;
                let n = rng.random_range(6..15);
                for i in 0..n {
                    // A dominant chain plus a couple of scattered outliers.
                    let angle = if i < n - 2 {
                        center + i as f64 * rng.random_range(0.02..0.06)
                    } else {
                        center + rng.random_range(0.8..1.2)
                    };
                    records.push(rec(id, &format!("g{g}"), "t", vec![angle.cos(), angle.sin()]));
                    id += 1;
                }
            }
            let ds = WeakDataset::new(records, 2).unwrap();
            let model = EmbeddingModel::identity(2);
            let caches = dataset_distances(&ds, &model).unwrap();
            let params = CleanParams::new(0.5, 2, ComponentRule::Anchor).unwrap();
            let t1 = rng.random_range(0.08..0.3);
            let t2 = t1 + rng.random_range(0.01..0.5);
            let k1 = clean_cached(&caches, &params.with_threshold(t1));
            let k2 = clean_cached(&caches, &params.with_threshold(t2));
            for (label, set1) in &k1.kept {
                let set2 = k2.kept.get(label).cloned().unwrap_or_default();
                assert!(
                    set1.is_subset(&set2),
                    "group {label} not nested at t1={t1}, t2={t2}"
                );
            }
        }
    }

    #[test]
    fn pair_sampling_respects_truth_labels() {
        let ds = three_group_dataset();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs = make_pairs(&ds, 3, 5, &mut rng).unwrap();
        assert_eq!(pairs.len(), 8);
        for p in &pairs {
            assert_ne!(p.a, p.b);
            let ta = ds.record(p.a).unwrap().truth_label.clone();
            let tb = ds.record(p.b).unwrap().truth_label.clone();
            assert_eq!(p.same, ta == tb);
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(pairs, make_pairs(&ds, 3, 5, &mut rng2).unwrap());
    }

    #[test]
    fn pair_sampling_boundaries() {
        let ds = three_group_dataset();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let only_neg = make_pairs(&ds, 0, 4, &mut rng).unwrap();
        assert!(only_neg.iter().all(|p| !p.same));
        assert!(matches!(
            make_pairs(&ds, 10_000, 0, &mut rng).unwrap_err(),
            Error::InsufficientPairs { kind: "positive", .. }
        ));
    }

    /// Dataset with two tight truth clusters for separable verification.
    fn separable_pairs(n_per: usize) -> (WeakDataset, Vec<VerificationPair>) {
        let mut records = Vec::new();
        let mut id = 0;
        for (truth, center) in [("p", 0.0f64), ("q", 2.0)] {
            for i in 0..n_per {
                let angle = center + i as f64 * 0.01;
                records.push(rec(id, "w", truth, vec![angle.cos(), angle.sin()]));
                id += 1;
            }
        }
        let ds = WeakDataset::new(records, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pairs = make_pairs(&ds, 40, 40, &mut rng).unwrap();
        (ds, pairs)
    }

    #[test]
    fn separable_embeddings_verify_perfectly() {
        let (ds, pairs) = separable_pairs(12);
        let model = EmbeddingModel::identity(2);
        let report = verification_accuracy(&ds, &pairs, &model, 3).unwrap();
        assert_eq!(report.mean_accuracy, 1.0);
        assert_eq!(report.fold_accuracies.len(), 10);
    }

    #[test]
    fn shuffled_labels_verify_at_chance() {
        let (_, pairs) = separable_pairs(40);
        // Replace distances by noise uncorrelated with the labels.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scored: Vec<(f64, bool)> = pairs
            .iter()
            .map(|p| (rng.random_range(0.0..2.0), p.same))
            .collect();
        let report = cross_validated_accuracy(&scored, 10, 5);
        let n = scored.len() as f64;
        let sigma = 0.5 / n.sqrt();
        assert!(
            (report.mean_accuracy - 0.5).abs() <= 3.0 * sigma + 0.08,
            "chance-level accuracy expected, got {}",
            report.mean_accuracy
        );
    }

    #[test]
    fn collapsed_embeddings_predict_everything_same() {
        // All distances equal on balanced pairs: train accuracy ties between
        // all-same and all-different, the tie-break picks the largest
        // candidate threshold, every pair is predicted "same", and the
        // accuracy is the positive fraction.
        let scored: Vec<(f64, bool)> = (0..30).map(|i| (0.0, i % 2 == 0)).collect();
        let report = cross_validated_accuracy(&scored, 10, 1);
        assert_eq!(report.mean_accuracy, 0.5);
        assert!(report.fold_thresholds.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn accuracy_is_invariant_under_monotone_distance_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let scored: Vec<(f64, bool)> = (0..100)
            .map(|_| {
                let same = rng.random_bool(0.5);
                let d = if same {
                    rng.random_range(0.0..1.2)
                } else {
                    rng.random_range(0.5..2.0)
                };
                (d, same)
            })
            .collect();
        let transformed: Vec<(f64, bool)> = scored
            .iter()
            .map(|&(d, s)| (d.powi(3) + 0.5 * d, s))
            .collect();
        let a = cross_validated_accuracy(&scored, 10, 9);
        let b = cross_validated_accuracy(&transformed, 10, 9);
        assert_eq!(a.mean_accuracy, b.mean_accuracy);
        assert_eq!(a.fold_accuracies, b.fold_accuracies);
    }

    #[test]
    fn verification_requires_ten_pairs() {
        let (ds, pairs) = separable_pairs(12);
        let model = EmbeddingModel::identity(2);
        assert!(verification_accuracy(&ds, &pairs[..9], &model, 3).is_err());
    }
}
