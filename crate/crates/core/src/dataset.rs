//! Core data types for weakly labeled identity datasets: records, the
//! grouped dataset, cleaned subsets, and their on-disk formats.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of one observation, unique within a dataset.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One observation: a raw feature vector plus the weak label it was collected
/// under, and optionally the ground-truth label for evaluation subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceRecord {
    pub record_id: RecordId,
    pub weak_label: String,
    pub features: Vec<f64>,
    #[serde(default)]
    pub truth_label: Option<String>,
}

impl FaceRecord {
    /// True when the record's ground truth matches the label it was
    /// collected under.
    pub fn is_correctly_labeled(&self) -> Option<bool> {
        self.truth_label
            .as_deref()
            .map(|t| t == self.weak_label.as_str())
    }
}

/// Records grouped by weak label — the contaminated input dataset.
///
/// Immutable after construction; the group map partitions the record id set
/// and every group is non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakDataset {
    records: Vec<FaceRecord>,
    dim: usize,
    groups: BTreeMap<String, Vec<RecordId>>,
    index: HashMap<RecordId, usize>,
}

impl WeakDataset {
    /// Build a dataset from records, validating the dataset invariants:
    /// consistent feature dimension, finite values, unique record ids.
    ///
    /// An empty record list is allowed (it arises from holdout splits); the
    /// dimension must then be supplied explicitly.
    pub fn new(records: Vec<FaceRecord>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be positive".into(),
            ));
        }
        let mut index = HashMap::with_capacity(records.len());
        let mut groups: BTreeMap<String, Vec<RecordId>> = BTreeMap::new();
        for (pos, rec) in records.iter().enumerate() {
            if rec.features.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: rec.features.len(),
                });
            }
            if rec.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "record {} contains a non-finite feature value",
                    rec.record_id
                )));
            }
            if index.insert(rec.record_id, pos).is_some() {
                return Err(Error::DuplicateRecord(rec.record_id));
            }
            groups
                .entry(rec.weak_label.clone())
                .or_default()
                .push(rec.record_id);
        }
        for ids in groups.values_mut() {
            ids.sort_unstable();
        }
        Ok(WeakDataset {
            records,
            dim,
            groups,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FaceRecord] {
        &self.records
    }

    /// Group map: weak label → record ids sorted ascending.
    pub fn groups(&self) -> &BTreeMap<String, Vec<RecordId>> {
        &self.groups
    }

    pub fn group(&self, label: &str) -> Option<&[RecordId]> {
        self.groups.get(label).map(|v| v.as_slice())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(|s| s.as_str())
    }

    pub fn record(&self, id: RecordId) -> Option<&FaceRecord> {
        self.index.get(&id).map(|&pos| &self.records[pos])
    }

    /// Position of a record in `records()`, if present.
    pub fn position(&self, id: RecordId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// True when every record carries a ground-truth label.
    pub fn fully_truth_labeled(&self) -> bool {
        self.records.iter().all(|r| r.truth_label.is_some())
    }

    /// Dataset with the same records but features replaced from a
    /// precomputed table (e.g. imported embeddings). Every record must be
    /// covered and all replacement vectors must share one dimension.
    pub fn with_replaced_features(&self, features: &HashMap<RecordId, Vec<f64>>) -> Result<Self> {
        let mut dim = None;
        let mut records = Vec::with_capacity(self.records.len());
        for rec in &self.records {
            let feats = features.get(&rec.record_id).ok_or_else(|| {
                Error::InsufficientData(format!(
                    "no precomputed vector for record {}",
                    rec.record_id
                ))
            })?;
            let d = *dim.get_or_insert(feats.len());
            if feats.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: feats.len(),
                });
            }
            records.push(FaceRecord {
                features: feats.clone(),
                ..rec.clone()
            });
        }
        let d = dim.ok_or_else(|| Error::InsufficientData("no records to replace".into()))?;
        WeakDataset::new(records, d)
    }

    /// Dataset restricted to a set of record ids (groups rebuilt; labels
    /// whose every record was dropped disappear).
    pub fn restrict_to(&self, keep: &BTreeSet<RecordId>) -> Result<Self> {
        let records = self
            .records
            .iter()
            .filter(|r| keep.contains(&r.record_id))
            .cloned()
            .collect();
        WeakDataset::new(records, self.dim)
    }
}

/// The kept subset produced by one cleaning pass.
#[derive(Debug, Clone)]
pub struct CleanedDataset {
    pub kept: BTreeMap<String, BTreeSet<RecordId>>,
    pub iteration: u32,
    pub threshold_used: f64,
}

impl CleanedDataset {
    pub fn kept_count(&self) -> usize {
        self.kept.values().map(|s| s.len()).sum()
    }

    pub fn kept_ids(&self) -> BTreeSet<RecordId> {
        self.kept.values().flatten().copied().collect()
    }
}

/// Input format accepted by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One JSON object per line:
    /// `{"record_id": int, "weak_label": str, "features": [float, ...], "truth_label": str|null}`.
    Jsonl,
    /// Features-only import, no header: `record_id,weak_label,f0,...,fd-1`.
    Csv,
}

/// Load a weakly labeled dataset from disk.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<WeakDataset> {
    let records = match format {
        DatasetFormat::Jsonl => load_jsonl_records(path)?,
        DatasetFormat::Csv => load_csv_records(path)?,
    };
    let first = records.first().ok_or_else(|| Error::NoRecords(path.into()))?;
    let dim = first.features.len();
    if dim == 0 {
        return Err(Error::parse(path, 1, "record has an empty feature vector"));
    }
    WeakDataset::new(records, dim)
}

fn load_jsonl_records(path: &Path) -> Result<Vec<FaceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records: Vec<FaceRecord> = Vec::new();
    let mut dim = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FaceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        validate_row(path, line_no, &rec, &mut dim)?;
        records.push(rec);
    }
    Ok(records)
}

fn load_csv_records(path: &Path) -> Result<Vec<FaceRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut records: Vec<FaceRecord> = Vec::new();
    let mut dim = None;
    for (idx, row) in reader.records().enumerate() {
        let line_no = idx + 1;
        let row = row.map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if row.len() < 3 {
            return Err(Error::parse(
                path,
                line_no,
                "expected record_id,weak_label and at least one feature value",
            ));
        }
        let record_id = row[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(path, line_no, format!("bad record_id: {e}")))?;
        let weak_label = row[1].to_string();
        let features = row
            .iter()
            .skip(2)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, line_no, format!("bad feature value: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let rec = FaceRecord {
            record_id: RecordId(record_id),
            weak_label,
            features,
            truth_label: None,
        };
        validate_row(path, line_no, &rec, &mut dim)?;
        records.push(rec);
    }
    Ok(records)
}

fn validate_row(path: &Path, line_no: usize, rec: &FaceRecord, dim: &mut Option<usize>) -> Result<()> {
    if rec.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(
            path,
            line_no,
            format!("record {} has a non-finite feature value", rec.record_id),
        ));
    }
    match *dim {
        None => {
            *dim = Some(rec.features.len());
            Ok(())
        }
        Some(d) if rec.features.len() == d => Ok(()),
        Some(d) => Err(Error::FileDimension {
            path: path.into(),
            line: line_no,
            expected: d,
            found: rec.features.len(),
        }),
    }
}

/// Write a dataset as canonical JSONL, one record per line in record order.
pub fn save_dataset(ds: &WeakDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in ds.records() {
        let line = serde_json::to_string(rec).expect("record serialization cannot fail");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct CleanedRow {
    weak_label: String,
    record_id: RecordId,
    iteration: u32,
}

/// Write a cleaned subset as JSONL rows `{"weak_label", "record_id", "iteration"}`,
/// sorted by label then record id.
///
/// The file format does not carry `threshold_used`; that value lives in the
/// run manifest.
pub fn save_cleaned(ds: &CleanedDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (label, ids) in &ds.kept {
        for id in ids {
            let row = CleanedRow {
                weak_label: label.clone(),
                record_id: *id,
                iteration: ds.iteration,
            };
            let line = serde_json::to_string(&row).expect("row serialization cannot fail");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a cleaned subset written by [`save_cleaned`]. `threshold_used` is not
/// stored in the file and comes back as NaN.
pub fn load_cleaned(path: &Path) -> Result<CleanedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut kept: BTreeMap<String, BTreeSet<RecordId>> = BTreeMap::new();
    let mut iteration = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CleanedRow = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if kept.is_empty() {
            iteration = row.iteration;
        }
        if !kept.entry(row.weak_label).or_default().insert(row.record_id) {
            return Err(Error::DuplicateRecord(row.record_id));
        }
    }
    Ok(CleanedDataset {
        kept,
        iteration,
        threshold_used: f64::NAN,
    })
}

/// Split a dataset by weak label: `labels` become the evaluation part, the
/// rest stay for training. No record appears in both halves.
pub fn holdout_split(
    ds: &WeakDataset,
    labels: &BTreeSet<String>,
) -> Result<(WeakDataset, WeakDataset)> {
    for label in labels {
        if !ds.groups().contains_key(label) {
            return Err(Error::UnknownLabel(label.clone()));
        }
    }
    let (eval, train): (Vec<FaceRecord>, Vec<FaceRecord>) = ds
        .records()
        .iter()
        .cloned()
        .partition(|r| labels.contains(&r.weak_label));
    Ok((
        WeakDataset::new(train, ds.dim())?,
        WeakDataset::new(eval, ds.dim())?,
    ))
}
