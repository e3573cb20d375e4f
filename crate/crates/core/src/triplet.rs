//! Triplet generation (dense enumeration and sparse random draws), the
//! hinge-floored relative-distance objective, its analytic gradient with
//! per-image aggregation, and plain-SGD training of the embedding head.
//!
//! The objective over a triplet set is
//! `Σ max(‖F(a)−F(p)‖² − ‖F(a)−F(n)‖², C)` with `F` the unit-normalized
//! embedding. With a negative margin `C` this is the standard triplet hinge:
//! satisfied triplets rest at the floor `C` and contribute zero gradient
//! (`max(diff, C) = C + max(diff − C, 0)`).

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{RecordId, WeakDataset};
use crate::embed::EmbeddingModel;
use crate::error::{Error, Result};

/// A relative distance constraint: anchor and positive share a weak label,
/// the negative comes from a different one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: RecordId,
    pub positive: RecordId,
    pub negative: RecordId,
}

/// How training batches are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplingPolicy {
    /// Enumerate every valid triplet over a small m-identity × k-image batch.
    #[default]
    Dense,
    /// Draw independent random triplets; few constraints per distinct image.
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Floor C of the hinge objective; may be negative (default −0.2).
    pub margin: f64,
    pub learning_rate: f64,
    /// Identities per dense batch (m).
    pub identities_per_batch: usize,
    /// Images sampled per identity in a dense batch (k).
    pub images_per_identity: usize,
    pub iterations: usize,
    pub policy: SamplingPolicy,
    /// Triplets per batch under the sparse policy.
    pub sparse_batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: -0.2,
            learning_rate: 0.1,
            identities_per_batch: 10,
            images_per_identity: 8,
            iterations: 500,
            policy: SamplingPolicy::Dense,
            sparse_batch_size: 256,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() {
            return Err(Error::InvalidConfig("margin must be finite".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        match self.policy {
            SamplingPolicy::Dense => {
                if self.identities_per_batch < 2 || self.images_per_identity < 2 {
                    return Err(Error::InvalidConfig(
                        "dense policy needs m >= 2 identities and k >= 2 images (no valid triplets otherwise)"
                            .into(),
                    ));
                }
            }
            SamplingPolicy::Sparse => {
                if self.sparse_batch_size == 0 {
                    return Err(Error::InvalidConfig(
                        "sparse_batch_size must be >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Enumerate all valid triplets over a batch of `m` identity groups with `k`
/// record ids each: every ordered same-group (anchor, positive) pair against
/// every record of every other group. Output size is m·k·(k−1)·(m−1)·k.
pub fn gen_dense(batch: &[Vec<RecordId>]) -> Result<Vec<Triplet>> {
    if batch.len() < 2 {
        return Err(Error::InsufficientData(
            "dense sampling needs at least 2 identities (no negatives otherwise)".into(),
        ));
    }
    let k = batch[0].len();
    if k < 2 {
        return Err(Error::InsufficientData(
            "dense sampling needs at least 2 images per identity".into(),
        ));
    }
    if batch.iter().any(|g| g.len() != k) {
        return Err(Error::InsufficientData(
            "dense batch groups must all have exactly k records (subsample first)".into(),
        ));
    }
    let m = batch.len();
    let mut out = Vec::with_capacity(m * k * (k - 1) * (m - 1) * k);
    for (gi, group) in batch.iter().enumerate() {
        for &anchor in group {
            for &positive in group {
                if positive == anchor {
                    continue;
                }
                for (gj, other) in batch.iter().enumerate() {
                    if gj == gi {
                        continue;
                    }
                    for &negative in other {
                        out.push(Triplet {
                            anchor,
                            positive,
                            negative,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Draw `n` random triplets: uniformly pick an identity with ≥2 records, two
/// distinct records from it, and a negative from a uniformly chosen different
/// identity. Deterministic given the rng state.
pub fn gen_sparse(ds: &WeakDataset, n: usize, rng: &mut impl Rng) -> Result<Vec<Triplet>> {
    let labels: Vec<&str> = ds.labels().collect();
    if labels.len() < 2 {
        return Err(Error::InsufficientData(
            "sparse sampling needs at least 2 identities".into(),
        ));
    }
    let eligible: Vec<usize> = (0..labels.len())
        .filter(|&i| ds.group(labels[i]).map(|g| g.len() >= 2).unwrap_or(false))
        .collect();
    if eligible.is_empty() {
        return Err(Error::InsufficientData(
            "no identity has 2 or more records; no valid anchor-positive pair exists".into(),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let li = eligible[rng.random_range(0..eligible.len())];
        let group = ds.group(labels[li]).expect("eligible label exists");
        let pick = rand::seq::index::sample(rng, group.len(), 2);
        let (anchor, positive) = (group[pick.index(0)], group[pick.index(1)]);
        // Uniform over the other identities, skipping li without rejection.
        let mut lj = rng.random_range(0..labels.len() - 1);
        if lj >= li {
            lj += 1;
        }
        let other = ds.group(labels[lj]).expect("label exists");
        let negative = other[rng.random_range(0..other.len())];
        out.push(Triplet {
            anchor,
            positive,
            negative,
        });
    }
    Ok(out)
}

/// Distinct-image embeddings for a triplet batch, computed once per image.
struct BatchEmbeddings {
    ids: Vec<RecordId>,
    pos: HashMap<RecordId, usize>,
    /// Base outputs (head inputs).
    inputs: Vec<DVector<f64>>,
    /// Pre-normalization norms.
    norms: Vec<f64>,
    /// Unit embeddings.
    units: Vec<DVector<f64>>,
}

fn embed_distinct(
    model: &EmbeddingModel,
    ds: &WeakDataset,
    triplets: &[Triplet],
) -> Result<BatchEmbeddings> {
    let distinct: BTreeSet<RecordId> = triplets
        .iter()
        .flat_map(|t| [t.anchor, t.positive, t.negative])
        .collect();
    let ids: Vec<RecordId> = distinct.into_iter().collect();
    let mut pos = HashMap::with_capacity(ids.len());
    let mut inputs = Vec::with_capacity(ids.len());
    let mut norms = Vec::with_capacity(ids.len());
    let mut units = Vec::with_capacity(ids.len());
    for (i, &id) in ids.iter().enumerate() {
        let rec = ds
            .record(id)
            .ok_or_else(|| Error::InsufficientData(format!("record {id} not in dataset")))?;
        let u = model.base_output(rec)?;
        let z = model.head() * &u;
        let p = match model.pca() {
            Some(t) => crate::embed::pca_apply(t, &z)?,
            None => z,
        };
        let norm = p.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::DegenerateEmbedding { record: id });
        }
        pos.insert(id, i);
        inputs.push(u);
        norms.push(norm);
        units.push(p / norm);
    }
    Ok(BatchEmbeddings {
        ids,
        pos,
        inputs,
        norms,
        units,
    })
}

/// Squared distances between all distinct-image pairs.
fn squared_distances(emb: &BatchEmbeddings) -> DMatrix<f64> {
    let n = emb.ids.len();
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (&emb.units[i] - &emb.units[j]).norm_squared();
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

/// The hinge-floored objective `Σ max(d²_pos − d²_neg, C)` over the batch.
pub fn triplet_loss(
    model: &EmbeddingModel,
    ds: &WeakDataset,
    triplets: &[Triplet],
    margin: f64,
) -> Result<f64> {
    if triplets.is_empty() {
        return Ok(0.0);
    }
    let emb = embed_distinct(model, ds, triplets)?;
    let d2 = squared_distances(&emb);
    let mut loss = 0.0;
    for t in triplets {
        let (a, p, n) = (emb.pos[&t.anchor], emb.pos[&t.positive], emb.pos[&t.negative]);
        loss += (d2[(a, p)] - d2[(a, n)]).max(margin);
    }
    Ok(loss)
}

/// Analytic gradient of [`triplet_loss`] with respect to the head matrix.
///
/// Per-image aggregation: active triplets (diff > C) first accumulate integer
/// coefficients on embedding pairs, then each distinct image is backpropagated
/// once through normalization (and PCA, when present) and the head. Floored
/// triplets contribute exactly zero; doubling the triplet list doubles the
/// gradient bitwise.
pub fn loss_gradient(
    model: &EmbeddingModel,
    ds: &WeakDataset,
    triplets: &[Triplet],
    margin: f64,
) -> Result<DMatrix<f64>> {
    Ok(loss_and_gradient(model, ds, triplets, margin)?.gradient)
}

/// One batch evaluation: loss, number of active triplets, head gradient.
pub struct BatchEvaluation {
    pub loss: f64,
    pub active: usize,
    pub gradient: DMatrix<f64>,
}

pub fn loss_and_gradient(
    model: &EmbeddingModel,
    ds: &WeakDataset,
    triplets: &[Triplet],
    margin: f64,
) -> Result<BatchEvaluation> {
    let head = model.head();
    if triplets.is_empty() {
        return Ok(BatchEvaluation {
            loss: 0.0,
            active: 0,
            gradient: DMatrix::zeros(head.nrows(), head.ncols()),
        });
    }
    let emb = embed_distinct(model, ds, triplets)?;
    let n_img = emb.ids.len();
    let d2 = squared_distances(&emb);

    // coeff[i][j] counts, over active triplets, the contribution of unit
    // vector j to the loss gradient at image i, in units of 2·y_j:
    //   ∂diff/∂y_a = 2(y_n − y_p),  ∂diff/∂y_p = 2(y_p − y_a),
    //   ∂diff/∂y_n = 2(y_a − y_n).
    // Integer accumulation keeps the sum order-free and exactly linear in
    // the triplet list.
    let mut coeff = vec![0i64; n_img * n_img];
    let mut loss = 0.0;
    let mut active = 0;
    for t in triplets {
        let (a, p, n) = (emb.pos[&t.anchor], emb.pos[&t.positive], emb.pos[&t.negative]);
        let diff = d2[(a, p)] - d2[(a, n)];
        loss += diff.max(margin);
        if diff > margin {
            active += 1;
            coeff[a * n_img + n] += 1;
            coeff[a * n_img + p] -= 1;
            coeff[p * n_img + p] += 1;
            coeff[p * n_img + a] -= 1;
            coeff[n * n_img + a] += 1;
            coeff[n * n_img + n] -= 1;
        }
    }

    let e = emb.units[0].len();
    let mut gradient = DMatrix::zeros(head.nrows(), head.ncols());
    for i in 0..n_img {
        let row = &coeff[i * n_img..(i + 1) * n_img];
        if row.iter().all(|&c| c == 0) {
            continue;
        }
        // g = ∂loss/∂y_i = 2 Σ_j coeff[i][j] · y_j
        let mut g = DVector::zeros(e);
        for (j, &c) in row.iter().enumerate() {
            if c != 0 {
                g += &emb.units[j] * (2.0 * c as f64);
            }
        }
        // Through normalization: ∂loss/∂p = (g − (g·y)·y)/‖p‖.
        let y = &emb.units[i];
        let dp = (&g - y * g.dot(y)) / emb.norms[i];
        // Through PCA (linear, mean drops out): ∂loss/∂z = components^T · dp.
        let dz = match model.pca() {
            Some(t) => t.components().transpose() * dp,
            None => dp,
        };
        gradient += dz * emb.inputs[i].transpose();
    }

    Ok(BatchEvaluation {
        loss,
        active,
        gradient,
    })
}

/// One loss-trace row per SGD iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    /// Batch loss normalized by triplet count.
    pub batch_loss: f64,
    pub active_fraction: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub trace: Vec<TracePoint>,
}

/// Train the head by plain SGD: each iteration samples a batch per the
/// policy, computes the analytic gradient, and updates
/// `W ← W − lr·(grad / batch size)`. Deterministic given the seed.
///
/// The per-batch normalization by triplet count keeps dense (large-count)
/// and sparse batches on comparable learning-rate scales; it deviates from
/// the raw objective sum.
pub fn train_head(
    ds: &WeakDataset,
    model: &EmbeddingModel,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = model.clone();
    let mut trace = Vec::with_capacity(cfg.iterations);

    let dense_eligible: Vec<&str> = ds
        .labels()
        .filter(|l| {
            ds.group(l)
                .map(|g| g.len() >= cfg.images_per_identity)
                .unwrap_or(false)
        })
        .collect();
    if matches!(cfg.policy, SamplingPolicy::Dense)
        && dense_eligible.len() < cfg.identities_per_batch
    {
        return Err(Error::InsufficientData(format!(
            "dense policy needs {} identities with >= {} records, found {}",
            cfg.identities_per_batch,
            cfg.images_per_identity,
            dense_eligible.len()
        )));
    }

    for iteration in 0..cfg.iterations {
        let triplets = match cfg.policy {
            SamplingPolicy::Dense => {
                let chosen =
                    rand::seq::index::sample(&mut rng, dense_eligible.len(), cfg.identities_per_batch);
                let batch: Vec<Vec<RecordId>> = chosen
                    .iter()
                    .map(|gi| {
                        let ids = ds.group(dense_eligible[gi]).expect("eligible label");
                        rand::seq::index::sample(&mut rng, ids.len(), cfg.images_per_identity)
                            .iter()
                            .map(|i| ids[i])
                            .collect()
                    })
                    .collect();
                gen_dense(&batch)?
            }
            SamplingPolicy::Sparse => gen_sparse(ds, cfg.sparse_batch_size, &mut rng)?,
        };
        let eval = loss_and_gradient(&current, ds, &triplets, cfg.margin).map_err(|e| match e {
            Error::DegenerateEmbedding { .. } => Error::TrainingCollapse {
                iteration,
                source: Box::new(e),
            },
            other => other,
        })?;
        let count = triplets.len() as f64;
        trace.push(TracePoint {
            iteration,
            batch_loss: eval.loss / count,
            active_fraction: eval.active as f64 / count,
        });
        let new_head = current.head() - eval.gradient * (cfg.learning_rate / count);
        current = current.with_head(new_head)?;
    }

    Ok(TrainOutcome {
        model: current,
        trace,
    })
}

/// Write a loss trace as CSV with columns iteration, batch_loss,
/// active_fraction.
pub fn write_loss_trace(trace: &[TracePoint], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["iteration", "batch_loss", "active_fraction"])
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    for p in trace {
        w.write_record([
            p.iteration.to_string(),
            p.batch_loss.to_string(),
            p.active_fraction.to_string(),
        ])
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
