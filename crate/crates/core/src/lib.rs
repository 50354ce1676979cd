//! Chemistry kernels and data tooling for training and evaluating chemical
//! reasoning models.

pub mod molgraph;
pub mod fingerprint;
pub mod funcgroups;
pub mod extraction;
pub mod rlcore;
pub mod pipeline;
pub mod evalharness;

pub use evalharness::{EvalRecord, MetricSummary, TokenStats};
pub use extraction::{ExtractedAnswer, Expected};
pub use fingerprint::{Fingerprint, FingerprintParams, Similarity, Structure};
pub use molgraph::{MolGraph, ReactionGraph, SmilesError};
pub use pipeline::{GenerationConfig, ReasoningSample, RetentionReport, TaskKind};
pub use rlcore::{AccuracyVariant, DapoGroup, RewardOutcome, RewardSpec, RolloutPanel};
