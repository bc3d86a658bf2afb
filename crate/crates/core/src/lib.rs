//! Deterministic synthesis of multiscale image priors and kNN distribution
//! metrics for comparing embedding sets.
//!
//! The synthesis path is hierarchical noise ([`noise`]), a nonlinear warp
//! ([`transform`]) and mask-based blending ([`cutmix`]), orchestrated by
//! [`pipeline`] into sharded DIPF datasets ([`shard`]). [`metrics`] scores
//! DIPE embedding files ([`embedding`]).

pub mod cutmix;
pub mod embedding;
pub mod error;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod pipeline;
mod resample;
pub mod rng;
pub mod shard;
pub mod transform;

pub use cutmix::{
    blur, cutmix, diverging_filter, diverging_value, refine_from, refine_mask, sample_pair,
    MaskRefineConfig, MonochromeSource, PriorSource, RefinedMask, SlotKind,
};
pub use embedding::{load_embeddings, write_embeddings, EmbeddingSet};
pub use error::{Error, Result};
pub use image::{clamp01, softmax, MixWeights, PriorImage, SemanticMask};
pub use metrics::{compute_metrics, knn_radius, MetricsReport, DEFAULT_K};
pub use noise::{compute_dmax, mix_hierarchical, sample_scale_noise, upscale, ScalePlan, UpscaleMode};
pub use pipeline::{
    synthesize_dataset, synthesize_dataset_with_workers, synthesize_one, verify_dataset,
    DatasetManifest, OutputFormat, Preset, SynthesisConfig, VerificationReport,
};
pub use rng::{derive_stream, RngStream};
pub use transform::{apply_nonlinear, crop, elastic, rotate, ElasticParams, TransformParams};
