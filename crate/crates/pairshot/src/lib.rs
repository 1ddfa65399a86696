//! Multimodal one-shot learning of paired speech and image data.
//!
//! A model is shown a support set of speech-image pairs, one (or K) per
//! class, with co-occurrence as the only supervision. It must then classify
//! unseen queries within a modality, or match a spoken query to the right
//! image in a matching set by chaining two unimodal nearest-neighbor
//! lookups through the support set.
//!
//! The crate provides:
//!
//! - direct-feature baselines: DTW over speech features ([`dtw`]) and
//!   cosine distance over pixels ([`metric`]);
//! - trained embeddings: from-scratch feedforward and convolutional
//!   networks with hand-derived gradients and Adam ([`network`]), used
//!   either as background classifiers with penultimate-layer transfer or as
//!   Siamese embedders trained with a triplet hinge loss under online
//!   semi-hard mining or offline triplet generation ([`mining`],
//!   [`train`]);
//! - the episodic evaluation protocol with multi-seed confidence intervals
//!   and the worst-case speaker-invariance episodes ([`eval`]);
//! - dataset plumbing: IDX images, FSA1 feature archives, split manifests
//!   with a class-leakage guard, and a synthetic paired-digit generator for
//!   desk-scale experiments ([`io`], [`synth`]).
//!
//! Start with the runnable examples (`cargo run --release --example
//! cross_modal_pipeline`) or the `pairshot` binary, which wires the same
//! building blocks into `gen-synth`, `train`, `eval`, and `report`
//! subcommands.

pub mod data;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod metric;
pub mod mining;
pub mod network;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use data::{
    canonicalize_sequence, flatten_image, invert_pixels, normalize_pixels, unflatten_image,
    ClassId, ClassTable, FeatureSequence, ImageGrid, MatchingSet, PairedDataset, PairedExample,
    SpeakerId, SupportSet,
};
pub use dtw::{dtw_distance, local_frame_distance, DtwConfig, LocalDistance};
pub use error::{Error, Result};
pub use eval::{
    classify_k_shot_speech, classify_one_shot_image, classify_one_shot_speech, cross_modal_match,
    evaluate, evaluate_per_seed_models, sample_episode, sample_speaker_invariance_episode,
    Episode, EpisodeConfig, EvalProtocol, EvalReport, OneShotModel, ShotAggregation, TaskKind,
};
pub use metric::{
    cosine_distance, nearest_neighbor, pairwise_squared_euclidean, squared_euclidean,
    DistanceMatrix,
};
pub use mining::{
    count_valid_triplets, generate_offline_triplets, online_batch_loss, sample_balanced_batch,
    select_semi_hard_negative, triplet_hinge_loss, BalancedBatch, MiningStrategy, Triplet,
    TripletLossConfig,
};
pub use synth::{generate_synthetic_pairs, SyntheticConfig, SyntheticDataset};
pub use tensor::Tensor;
