//! Embedding production: a frozen base transform composed with a trainable
//! linear head, optional PCA reduction, and L2 normalization onto the unit
//! sphere. Distances between embeddings drive all downstream filtering.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FaceRecord, RecordId, WeakDataset};
use crate::error::{Error, Result};

/// Pre-normalization vectors with a norm below this are treated as a
/// collapsed head rather than silently normalized.
const DEGENERATE_NORM: f64 = 1e-12;

/// Mean-centering PCA projection with orthonormal component rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    mean: DVector<f64>,
    components: DMatrix<f64>,
    explained_variance: Vec<f64>,
}

impl PcaTransform {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// k×n matrix whose rows are the principal directions, ordered by
    /// non-increasing explained variance.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }
}

/// Fit a PCA transform on an m×n matrix of row samples, keeping the top `k`
/// principal directions of the mean-centered data.
pub fn pca_fit(data: &DMatrix<f64>, k: usize) -> Result<PcaTransform> {
    let (m, n) = data.shape();
    if m < 2 {
        return Err(Error::InsufficientData(
            "pca needs at least 2 samples".into(),
        ));
    }
    if k == 0 || k > m.min(n) {
        return Err(Error::InvalidConfig(format!(
            "pca target dimension {k} outside 1..=min(m={m}, n={n})"
        )));
    }

    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (m as f64 - 1.0);
    if cov.trace() < 1e-30 {
        return Err(Error::ZeroVariance);
    }

    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut components = DMatrix::zeros(k, n);
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let mut comp = eig.eigenvectors.column(idx).clone_owned();
        // Fix the sign so the largest-magnitude coordinate is positive;
        // eigenvector signs are otherwise arbitrary.
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if comp[lead] < 0.0 {
            comp.neg_mut();
        }
        components.set_row(row, &comp.transpose());
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }

    Ok(PcaTransform {
        mean,
        components,
        explained_variance,
    })
}

/// Project a vector: `components · (v − mean)`.
pub fn pca_apply(t: &PcaTransform, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != t.input_dim() {
        return Err(Error::Dimension {
            expected: t.input_dim(),
            found: v.len(),
        });
    }
    Ok(&t.components * (v - &t.mean))
}

/// Frozen base transform composed with a trainable linear head; output is
/// optionally PCA-reduced and always L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    base: Option<DMatrix<f64>>,
    head: DMatrix<f64>,
    pca: Option<PcaTransform>,
}

impl EmbeddingModel {
    /// Identity model: no base, identity head of the given dimension.
    pub fn identity(dim: usize) -> Self {
        EmbeddingModel {
            base: None,
            head: DMatrix::identity(dim, dim),
            pca: None,
        }
    }

    pub fn new(base: Option<DMatrix<f64>>, head: DMatrix<f64>) -> Result<Self> {
        if let Some(b) = &base {
            if b.nrows() != head.ncols() {
                return Err(Error::Dimension {
                    expected: head.ncols(),
                    found: b.nrows(),
                });
            }
        }
        Ok(EmbeddingModel {
            base,
            head,
            pca: None,
        })
    }

    pub fn with_head(&self, head: DMatrix<f64>) -> Result<Self> {
        let mut m = self.clone();
        if head.ncols() != self.head.ncols() {
            return Err(Error::Dimension {
                expected: self.head.ncols(),
                found: head.ncols(),
            });
        }
        m.head = head;
        Ok(m)
    }

    pub fn with_pca(&self, pca: Option<PcaTransform>) -> Result<Self> {
        if let Some(p) = &pca {
            if p.input_dim() != self.head.nrows() {
                return Err(Error::Dimension {
                    expected: self.head.nrows(),
                    found: p.input_dim(),
                });
            }
        }
        let mut m = self.clone();
        m.pca = pca;
        Ok(m)
    }

    /// Model with any PCA transform removed.
    pub fn without_pca(&self) -> Self {
        let mut m = self.clone();
        m.pca = None;
        m
    }

    pub fn base(&self) -> Option<&DMatrix<f64>> {
        self.base.as_ref()
    }

    pub fn head(&self) -> &DMatrix<f64> {
        &self.head
    }

    pub fn pca(&self) -> Option<&PcaTransform> {
        self.pca.as_ref()
    }

    /// Raw feature dimension this model accepts.
    pub fn input_dim(&self) -> usize {
        self.base
            .as_ref()
            .map(|b| b.ncols())
            .unwrap_or(self.head.ncols())
    }

    /// Dimension of the final embedding.
    pub fn output_dim(&self) -> usize {
        self.pca
            .as_ref()
            .map(|p| p.output_dim())
            .unwrap_or(self.head.nrows())
    }

    /// Base output for a record (the input the trainable head sees).
    pub fn base_output(&self, rec: &FaceRecord) -> Result<DVector<f64>> {
        if rec.features.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: rec.features.len(),
            });
        }
        let x = DVector::from_column_slice(&rec.features);
        Ok(match &self.base {
            Some(b) => b * x,
            None => x,
        })
    }

    /// Head output before PCA and normalization.
    pub fn head_output(&self, rec: &FaceRecord) -> Result<DVector<f64>> {
        Ok(&self.head * self.base_output(rec)?)
    }

    /// Unit-norm embedding of a record. Errors if the pre-normalization
    /// vector collapses to (near) zero, which signals a pathological head.
    pub fn embed(&self, rec: &FaceRecord) -> Result<DVector<f64>> {
        let z = self.head_output(rec)?;
        let p = match &self.pca {
            Some(t) => pca_apply(t, &z)?,
            None => z,
        };
        let norm = p.norm();
        if !norm.is_finite() || norm < DEGENERATE_NORM {
            return Err(Error::DegenerateEmbedding {
                record: rec.record_id,
            });
        }
        Ok(p / norm)
    }
}

/// Euclidean distance between two embeddings; in [0, 2] for unit vectors.
pub fn distance(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok((a - b).norm())
}

/// Embed every record of a dataset, aligned with `ds.records()`.
pub fn embed_dataset(ds: &WeakDataset, model: &EmbeddingModel) -> Result<Vec<DVector<f64>>> {
    ds.records().iter().map(|r| model.embed(r)).collect()
}

/// Initial trainable head: the identity map when square, otherwise a seeded
/// random matrix with orthonormal rows.
pub fn initial_head(out_dim: usize, in_dim: usize, seed: u64) -> DMatrix<f64> {
    if out_dim == in_dim {
        return DMatrix::identity(out_dim, in_dim);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // QR of an in_dim×out_dim gaussian gives orthonormal columns; the head is
    // their transpose. Requires out_dim <= in_dim for exact orthonormal rows.
    let g = DMatrix::from_fn(in_dim, out_dim.min(in_dim), |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    let q = nalgebra::linalg::QR::new(g).q();
    let mut head = DMatrix::zeros(out_dim, in_dim);
    for r in 0..out_dim.min(in_dim) {
        head.set_row(r, &q.column(r).transpose());
    }
    // A head taller than its input cannot have orthonormal rows; fill the
    // excess rows with scaled gaussians instead.
    for r in in_dim..out_dim {
        for c in 0..in_dim {
            let v: f64 = StandardNormal.sample(&mut rng);
            head[(r, c)] = v / (in_dim as f64).sqrt();
        }
    }
    head
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    shape: [usize; 2],
    data: Vec<Vec<f64>>,
}

/// Serialize a head (or any matrix) as JSON with a shape header.
pub fn save_head(head: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = MatrixFile {
        shape: [head.nrows(), head.ncols()],
        data: (0..head.nrows())
            .map(|r| head.row(r).iter().copied().collect())
            .collect(),
    };
    let out = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, &file)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_head(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed: MatrixFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let [rows, cols] = parsed.shape;
    if parsed.data.len() != rows || parsed.data.iter().any(|r| r.len() != cols) {
        return Err(Error::parse(path, 0, "matrix data does not match shape header"));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (r, row) in parsed.data.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::parse(path, 0, "matrix contains non-finite values"));
            }
            m[(r, c)] = *v;
        }
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRow {
    record_id: RecordId,
    embedding: Vec<f64>,
}

/// Load precomputed per-record vectors (`{"record_id": int, "embedding": [...]}`
/// JSONL). Used to bypass base+head for filtering; head training then treats
/// these vectors as its inputs.
pub fn load_precomputed_embeddings(path: &Path) -> Result<HashMap<RecordId, Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingRow = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if row.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, line_no, "non-finite embedding value"));
        }
        if out.insert(row.record_id, row.embedding).is_some() {
            return Err(Error::DuplicateRecord(row.record_id));
        }
    }
    if out.is_empty() {
        return Err(Error::NoRecords(path.into()));
    }
    Ok(out)
}
