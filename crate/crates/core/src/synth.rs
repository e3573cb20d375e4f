//! Ground-truthed synthetic weakly labeled datasets: per-identity latent
//! chains (bounded random walks), cross-identity contamination, and a
//! condition-number-controlled linear domain-shift map between latent and
//! observed features.
//!
//! Chains rather than isotropic blobs: the cleaning method exploits
//! multi-hop connectivity, and variance must be able to accumulate along a
//! path while consecutive samples stay close. Contaminants are drawn from
//! other generated identities, matching the failure mode of name-query
//! collection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FaceRecord, RecordId, WeakDataset};
use crate::error::{Error, Result};

/// Walk displacement from the identity center is bounded by this many walk
/// steps.
const BOUND_FACTOR: f64 = 4.0;

/// Single steps are clamped to this many walk steps, which guarantees every
/// in-chain record has a same-identity neighbor within 2·walk_step.
const MAX_STEP_FACTOR: f64 = 1.8;

/// Identities differ in intra-class tightness: each identity scales its
/// steps by a log-uniform factor in [1/TIGHTNESS_SPREAD, 1]. The factor
/// never exceeds 1, so `walk_step` stays the continuity scale for every
/// identity.
const TIGHTNESS_SPREAD: f64 = 3.0;

/// With this probability a contaminant comes from one of the
/// CONFUSABLE_POOL identities whose centers lie closest to the host —
/// mirroring how name queries confuse lookalike people. The rest are drawn
/// uniformly from all other identities.
const CONFUSABLE_PROB: f64 = 0.5;
const CONFUSABLE_POOL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_identities: usize,
    /// Inclusive [lo, hi] group size range.
    pub group_size_range: (usize, usize),
    /// Per-slot probability of replacing a record with another identity's
    /// sample. Must stay below 0.5 so the majority assumption holds.
    pub contamination: f64,
    pub latent_dim: usize,
    /// Continuity scale: expected distance between consecutive chain samples.
    pub walk_step: f64,
    /// Condition number of the latent→observed domain-shift map.
    pub shift_conditioning: f64,
    /// Per-coordinate standard deviation of observation noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_identities: 50,
            group_size_range: (30, 100),
            contamination: 0.15,
            latent_dim: 6,
            walk_step: 0.35,
            shift_conditioning: 5.0,
            noise_sigma: 0.01,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_identities < 2 {
            return Err(Error::InvalidConfig(
                "n_identities must be at least 2".into(),
            ));
        }
        let (lo, hi) = self.group_size_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "group_size_range [{lo}, {hi}] must satisfy 1 <= lo <= hi"
            )));
        }
        if !(0.0..0.5).contains(&self.contamination) {
            return Err(Error::InvalidConfig(
                "contamination must lie in [0, 0.5) so correct records stay the majority".into(),
            ));
        }
        if self.latent_dim < 2 {
            return Err(Error::InvalidConfig("latent_dim must be at least 2".into()));
        }
        if !(self.walk_step.is_finite() && self.walk_step > 0.0) {
            return Err(Error::InvalidConfig("walk_step must be positive".into()));
        }
        if !(self.shift_conditioning.is_finite() && self.shift_conditioning >= 1.0) {
            return Err(Error::InvalidConfig(
                "shift_conditioning must be >= 1".into(),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise_sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Generation summary, written alongside the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub seed: u64,
    pub config: SynthConfig,
    /// Singular values of the domain-shift map, descending.
    pub singular_values: Vec<f64>,
    pub contaminated_count: usize,
    pub total_records: usize,
}

#[derive(Debug)]
pub struct SynthOutput {
    pub dataset: WeakDataset,
    /// Latent points aligned with `dataset.records()`.
    pub latents: Vec<DVector<f64>>,
    /// The latent→observed domain-shift map S.
    pub shift_map: DMatrix<f64>,
    pub metadata: SynthMetadata,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_gaussian(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    nalgebra::linalg::QR::new(g).q()
}

/// Domain-shift map with log-spaced singular values in [1/√κ, √κ], so the
/// condition number is exactly κ and the map is always invertible.
fn shift_map(dim: usize, kappa: f64, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<f64>) {
    let u = random_orthogonal(dim, rng);
    let v = random_orthogonal(dim, rng);
    let sqrt_kappa = kappa.sqrt();
    let singular: Vec<f64> = (0..dim)
        .map(|i| {
            let t = if dim == 1 {
                0.0
            } else {
                i as f64 / (dim - 1) as f64
            };
            // κ^(1/2 − t): from √κ down to 1/√κ.
            sqrt_kappa * kappa.powf(-t)
        })
        .collect();
    let s = &u * DMatrix::from_diagonal(&DVector::from_vec(singular.clone())) * v.transpose();
    (s, singular)
}

/// Generate a weakly labeled dataset with ground truth. Single-threaded and
/// fully determined by the seed.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.latent_dim;
    let bound = BOUND_FACTOR * cfg.walk_step;

    let (shift, singular_values) = shift_map(dim, cfg.shift_conditioning, &mut rng);
    let centers: Vec<DVector<f64>> = (0..cfg.n_identities)
        .map(|_| unit_gaussian(dim, &mut rng))
        .collect();
    let tightness: Vec<f64> = (0..cfg.n_identities)
        .map(|_| {
            let ln_spread = TIGHTNESS_SPREAD.ln();
            (-rng.random_range(0.0..ln_spread)).exp()
        })
        .collect();
    let labels: Vec<String> = (0..cfg.n_identities)
        .map(|i| format!("id_{i:04}"))
        .collect();

    // Most-confusable identities per host: the nearest other centers.
    let pool = CONFUSABLE_POOL.min(cfg.n_identities - 1);
    let confusable: Vec<Vec<usize>> = (0..cfg.n_identities)
        .map(|i| {
            let mut others: Vec<usize> = (0..cfg.n_identities).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                let da = (&centers[a] - &centers[i]).norm();
                let db = (&centers[b] - &centers[i]).norm();
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            others.truncate(pool);
            others
        })
        .collect();

    let mut records = Vec::new();
    let mut latents = Vec::new();
    let mut contaminated_count = 0usize;
    let mut next_id = 0u64;

    for identity in 0..cfg.n_identities {
        let (lo, hi) = cfg.group_size_range;
        let size = rng.random_range(lo..=hi);

        // Per-slot contamination, resampled until correct records hold a
        // strict majority.
        let contaminated: u32 = loop {
            let c = (0..size)
                .filter(|_| rng.random_bool(cfg.contamination))
                .count() as u32;
            if 2 * (size as u32 - c) > size as u32 {
                break c;
            }
        };
        let genuine = size - contaminated as usize;
        contaminated_count += contaminated as usize;

        // Chain: a bounded random walk around the identity center. Steps are
        // clamped so consecutive samples stay within 2·walk_step.
        let center = &centers[identity];
        let step_scale = cfg.walk_step * tightness[identity];
        let identity_bound = bound * tightness[identity];
        let mut point = center.clone();
        for step in 0..genuine {
            if step > 0 {
                let mut delta = DVector::from_fn(dim, |_, _| gaussian(&mut rng))
                    / (dim as f64).sqrt()
                    * step_scale;
                let len = delta.norm();
                let max_len = MAX_STEP_FACTOR * step_scale;
                if len > max_len {
                    delta *= max_len / len;
                }
                point += delta;
                let offset = &point - center;
                let dist = offset.norm();
                if dist > identity_bound {
                    point = center + offset * (identity_bound / dist);
                }
            }
            push_record(
                &mut records,
                &mut latents,
                &mut next_id,
                &labels[identity],
                &labels[identity],
                &point,
                &shift,
                cfg.noise_sigma,
                &mut rng,
            );
        }

        // Contaminants: plausible samples of other identities under this
        // identity's weak label, biased toward confusable (nearby) ones.
        for _ in 0..contaminated {
            let other = if rng.random_bool(CONFUSABLE_PROB) {
                confusable[identity][rng.random_range(0..pool)]
            } else {
                let mut j = rng.random_range(0..cfg.n_identities - 1);
                if j >= identity {
                    j += 1;
                }
                j
            };
            let radius: f64 = rng.random_range(0.0..bound * tightness[other]);
            let latent = &centers[other] + unit_gaussian(dim, &mut rng) * radius;
            push_record(
                &mut records,
                &mut latents,
                &mut next_id,
                &labels[identity],
                &labels[other],
                &latent,
                &shift,
                cfg.noise_sigma,
                &mut rng,
            );
        }
    }

    let total_records = records.len();
    let dataset = WeakDataset::new(records, dim)?;
    Ok(SynthOutput {
        dataset,
        latents,
        shift_map: shift,
        metadata: SynthMetadata {
            seed: cfg.seed,
            config: cfg.clone(),
            singular_values,
            contaminated_count,
            total_records,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn push_record(
    records: &mut Vec<FaceRecord>,
    latents: &mut Vec<DVector<f64>>,
    next_id: &mut u64,
    weak_label: &str,
    truth_label: &str,
    latent: &DVector<f64>,
    shift: &DMatrix<f64>,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) {
    let mut observed = shift * latent;
    if noise_sigma > 0.0 {
        for v in observed.iter_mut() {
            *v += noise_sigma * gaussian(rng);
        }
    }
    records.push(FaceRecord {
        record_id: RecordId(*next_id),
        weak_label: weak_label.to_string(),
        features: observed.iter().copied().collect(),
        truth_label: Some(truth_label.to_string()),
    });
    latents.push(latent.clone());
    *next_id += 1;
}

/// Write generation metadata as pretty JSON.
pub fn save_metadata(meta: &SynthMetadata, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, meta).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    use std::io::Write as _;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    Ok(())
}
