//! Cleaning weakly labeled identity datasets.
//!
//! Given records grouped by an unreliable label and a distance-producing
//! embedding model, each group gets a match graph under a tight distance
//! threshold; the connected component of the maximum-degree anchor becomes
//! the cleaned subset for that identity. A trainable linear head is then
//! refined on the cleaned data with a triplet hinge objective, and the
//! improved model re-filters the original data, raising recall at a fixed
//! precision target.

pub mod dataset;
pub mod embed;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod triplet;

pub use dataset::{
    holdout_split, load_cleaned, load_dataset, save_cleaned, save_dataset, CleanedDataset,
    DatasetFormat, FaceRecord, RecordId, WeakDataset,
};
pub use embed::{
    distance, embed_dataset, initial_head, load_head, load_precomputed_embeddings, pca_apply,
    pca_fit, save_head, EmbeddingModel, PcaTransform,
};
pub use error::{Error, Result};
pub use graph::{
    build_graph, clean_dataset, clean_dataset_full, clean_identity, extract_component,
    find_anchor, run_with_workers, write_diagnostics, CleanParams, ComponentRule, GroupDiagnostic,
    IdentityGraph,
};
pub use metrics::{
    make_pairs, pr_curve, precision_recall, save_verification_report, verification_accuracy,
    write_pr_csv, PrPoint, VerificationPair, VerificationReport,
};
pub use pipeline::{
    calibrate_threshold, run_pipeline, Calibration, CleanRun, IterationConfig, PipelineOutcome,
    PipelineRun,
};
pub use synth::{generate, save_metadata, SynthConfig, SynthMetadata, SynthOutput};
pub use triplet::{
    gen_dense, gen_sparse, loss_and_gradient, loss_gradient, train_head, triplet_loss,
    write_loss_trace, SamplingPolicy, TracePoint, TrainConfig, TrainOutcome, Triplet,
};
