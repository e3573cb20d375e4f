//! TOML run configurations. Seeds never live in config files: every command
//! takes its randomness from the --seed flag so one value determines a run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use idclean_core::{
    CleanParams, ComponentRule, IterationConfig, SamplingPolicy, SynthConfig, TrainConfig,
};

use crate::CliError;

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::config(format!("bad config {}: {e}", path.display())))
}

/// Dataset generation parameters (see `SynthConfig` for semantics).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthToml {
    pub n_identities: usize,
    #[serde(default = "default_group_size_range")]
    pub group_size_range: [usize; 2],
    #[serde(default = "default_contamination")]
    pub contamination: f64,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_walk_step")]
    pub walk_step: f64,
    #[serde(default = "default_shift_conditioning")]
    pub shift_conditioning: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
}

fn default_group_size_range() -> [usize; 2] {
    let (lo, hi) = SynthConfig::default().group_size_range;
    [lo, hi]
}
fn default_contamination() -> f64 {
    SynthConfig::default().contamination
}
fn default_latent_dim() -> usize {
    SynthConfig::default().latent_dim
}
fn default_walk_step() -> f64 {
    SynthConfig::default().walk_step
}
fn default_shift_conditioning() -> f64 {
    SynthConfig::default().shift_conditioning
}
fn default_noise_sigma() -> f64 {
    SynthConfig::default().noise_sigma
}

impl SynthToml {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_toml(path)
    }

    pub fn into_core(self, seed: u64) -> SynthConfig {
        SynthConfig {
            n_identities: self.n_identities,
            group_size_range: (self.group_size_range[0], self.group_size_range[1]),
            contamination: self.contamination,
            latent_dim: self.latent_dim,
            walk_step: self.walk_step,
            shift_conditioning: self.shift_conditioning,
            noise_sigma: self.noise_sigma,
            seed,
        }
    }
}

/// Head training parameters (see `TrainConfig` for semantics).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainToml {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_identities_per_batch")]
    pub identities_per_batch: usize,
    #[serde(default = "default_images_per_identity")]
    pub images_per_identity: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub policy: PolicyToml,
    #[serde(default = "default_sparse_batch_size")]
    pub sparse_batch_size: usize,
}

fn default_margin() -> f64 {
    TrainConfig::default().margin
}
fn default_learning_rate() -> f64 {
    TrainConfig::default().learning_rate
}
fn default_identities_per_batch() -> usize {
    TrainConfig::default().identities_per_batch
}
fn default_images_per_identity() -> usize {
    TrainConfig::default().images_per_identity
}
fn default_iterations() -> usize {
    TrainConfig::default().iterations
}
fn default_sparse_batch_size() -> usize {
    TrainConfig::default().sparse_batch_size
}

impl Default for TrainToml {
    fn default() -> Self {
        TrainToml {
            margin: default_margin(),
            learning_rate: default_learning_rate(),
            identities_per_batch: default_identities_per_batch(),
            images_per_identity: default_images_per_identity(),
            iterations: default_iterations(),
            policy: PolicyToml::default(),
            sparse_batch_size: default_sparse_batch_size(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyToml {
    #[default]
    Dense,
    Sparse,
}

impl TrainToml {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_toml(path)
    }

    pub fn into_core(self, seed: u64) -> TrainConfig {
        TrainConfig {
            margin: self.margin,
            learning_rate: self.learning_rate,
            identities_per_batch: self.identities_per_batch,
            images_per_identity: self.images_per_identity,
            iterations: self.iterations,
            policy: match self.policy {
                PolicyToml::Dense => SamplingPolicy::Dense,
                PolicyToml::Sparse => SamplingPolicy::Sparse,
            },
            sparse_batch_size: self.sparse_batch_size,
            seed,
        }
    }
}

/// Iterative pipeline parameters: cleaning, calibration, training, and the
/// validation holdout. Exactly one of `holdout_labels` / `holdout_count`
/// must be given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateToml {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_target_precision")]
    pub target_precision: f64,
    #[serde(default)]
    pub min_recall_gain: f64,
    #[serde(default = "default_min_group_size")]
    pub min_group_size: usize,
    #[serde(default)]
    pub component_rule: RuleToml,
    #[serde(default = "default_sweep_points")]
    pub sweep_points: usize,
    #[serde(default = "default_true")]
    pub refit_pca: bool,
    #[serde(default)]
    pub pca_dim: Option<usize>,
    #[serde(default = "default_true")]
    pub filter_with_pca: bool,
    #[serde(default)]
    pub holdout_labels: Option<Vec<String>>,
    #[serde(default)]
    pub holdout_count: Option<usize>,
    #[serde(default)]
    pub train: TrainToml,
}

fn default_max_iterations() -> usize {
    2
}
fn default_target_precision() -> f64 {
    0.99
}
fn default_min_group_size() -> usize {
    2
}
fn default_sweep_points() -> usize {
    64
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleToml {
    #[default]
    Anchor,
    Largest,
}

impl From<RuleToml> for ComponentRule {
    fn from(r: RuleToml) -> Self {
        match r {
            RuleToml::Anchor => ComponentRule::Anchor,
            RuleToml::Largest => ComponentRule::Largest,
        }
    }
}

impl IterateToml {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let cfg: IterateToml = read_toml(path)?;
        match (&cfg.holdout_labels, cfg.holdout_count) {
            (Some(_), Some(_)) | (None, None) => Err(CliError::config(
                "config must set exactly one of holdout_labels / holdout_count".into(),
            )),
            _ => Ok(cfg),
        }
    }

    pub fn to_core(&self, seed: u64) -> Result<IterationConfig, CliError> {
        // The threshold is recalibrated per iteration; the placeholder only
        // has to pass CleanParams validation.
        let clean_params = CleanParams::new(0.5, self.min_group_size, self.component_rule.into())
            .map_err(CliError::from)?;
        Ok(IterationConfig {
            max_iterations: self.max_iterations,
            target_precision: self.target_precision,
            min_recall_gain: self.min_recall_gain,
            clean_params,
            train_config: self.train.clone().into_core(seed),
            refit_pca: self.refit_pca,
            pca_dim: self.pca_dim,
            filter_with_pca: self.filter_with_pca,
            sweep_points: self.sweep_points,
        })
    }
}
